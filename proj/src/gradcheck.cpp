#include "nkf/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "nkf/data.hpp"
#include "nkf/quadrature.hpp"

namespace nkf {

Eigen::VectorXd finite_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                  const Eigen::VectorXd& x, double eps)
{
    Eigen::VectorXd grad(x.size());
    Eigen::VectorXd probe = x;
    for (Index i = 0; i < x.size(); ++i) {
        probe(i) = x(i) + eps;
        const double up = f(probe);
        probe(i) = x(i) - eps;
        const double down = f(probe);
        probe(i) = x(i);
        grad(i) = (up - down) / (2 * eps);
    }
    return grad;
}

double max_relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor)
{
    if (a.size() != b.size()) throw InputError("max_relative_error: size mismatch");
    double worst = 0.0;
    for (Index i = 0; i < a.size(); ++i) {
        const double scale = std::max({std::abs(a(i)), std::abs(b(i)), floor});
        worst = std::max(worst, std::abs(a(i) - b(i)) / scale);
    }
    return worst;
}

namespace {

Eigen::MatrixXd uniform(Index rows, Index cols, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0)
{
    std::uniform_real_distribution<double> dist(lo, hi);
    Eigen::MatrixXd m(rows, cols);
    for (Index c = 0; c < cols; ++c)
        for (Index r = 0; r < rows; ++r) m(r, c) = dist(rng);
    return m;
}

// Jittered 3 x 3 grid lifted into R^3, so every degree up to 2 has simplices.
Embedding<double> lifted_grid(std::mt19937_64& rng)
{
    Eigen::MatrixXd p(9, 3);
    for (Index v = 0; v < 9; ++v) p.row(v) << double(v % 3), double(v / 3), 0.0;
    p += 0.3 * uniform(9, 3, rng);
    return Embedding<double>(p);
}

struct Tally {
    GradcheckSuite suite;
    double tolerance;

    void add(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric)
    {
        suite.max_rel_error = std::max(suite.max_rel_error, max_relative_error(analytic, numeric));
        ++suite.checks;
    }

    GradcheckSuite done()
    {
        suite.passed = suite.checks > 0 && suite.max_rel_error < tolerance;
        return suite;
    }
};

GradcheckSuite mlp_suite(const GradcheckOptions& o, std::mt19937_64& rng)
{
    Tally t{{"mlp"}, o.tolerance};
    for (int i = 0; i < o.instances; ++i) {
        const Activation act = i % 2 ? Activation::sigmoid : Activation::tanh;
        const std::vector<Index> widths{3, 5, 4, 2};
        const auto mlp = Mlp<double>::random(widths, act, rng);
        const Eigen::MatrixXd x = uniform(3, 4, rng);
        const Eigen::MatrixXd up = uniform(2, 4, rng);
        const auto grad = mlp_backward(mlp, x, up);
        auto on_params = [&](const Eigen::VectorXd& q) {
            auto probe = mlp;
            probe.set_parameters(q);
            return (up.array() * probe.forward(x).array()).sum();
        };
        t.add((1.0 + o.corrupt) * grad.params.flatten(), finite_difference(on_params, mlp.parameters()));
        auto on_inputs = [&](const Eigen::VectorXd& q) {
            const Eigen::MatrixXd xs = Eigen::Map<const Eigen::MatrixXd>(q.data(), 3, 4);
            return (up.array() * mlp.forward(xs).array()).sum();
        };
        const Eigen::VectorXd flat_x = Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
        const Eigen::VectorXd dx = Eigen::Map<const Eigen::VectorXd>(grad.inputs.data(), grad.inputs.size());
        t.add((1.0 + o.corrupt) * dx, finite_difference(on_inputs, flat_x));
    }
    return t.done();
}

GradcheckSuite integration_suite(const GradcheckOptions& o, std::mt19937_64& rng)
{
    Tally t{{"integration"}, o.tolerance};
    const SimplicialComplex complex = grid_complex(3);
    for (int k = 0; k <= 2; ++k)
        for (int i = 0; i < o.instances; ++i) {
            const auto emb = lifted_grid(rng);
            const std::vector<Index> hidden{6};
            const auto form = NeuralKForm<double>::random(3, k, 2, hidden, Activation::tanh, rng);
            const auto geo = prepare_geometry(complex, emb, standard_basis_chains<double>(complex, k),
                                              make_quadrature_plan(k, 3));
            const Eigen::MatrixXd up = uniform(geo.num_chains(), 2, rng);
            const Eigen::VectorXd analytic = integration_matrix_backward(form, geo, up).flatten();
            auto objective = [&](const Eigen::VectorXd& q) {
                auto probe = form;
                probe.psi().set_parameters(q);
                return (up.array() * integration_matrix(probe, geo).array()).sum();
            };
            t.add((1.0 + o.corrupt) * analytic, finite_difference(objective, form.psi().parameters()));
        }
    return t.done();
}

GradcheckSuite classifier_suite(const GradcheckOptions& o, std::mt19937_64& rng)
{
    Tally t{{"classifier"}, o.tolerance};
    const SimplicialComplex complex = grid_complex(3);
    for (int k = 0; k <= 2; ++k)
        for (int i = 0; i < o.instances; ++i) {
            TrainConfig cfg;
            cfg.k = k;
            cfg.hidden_dim = 6;
            cfg.activation = Activation::tanh;
            cfg.readout = std::array{Readout::column_sum, Readout::column_l1, Readout::column_l2}[std::size_t(i % 3)];
            cfg.use_head = i % 2 == 0;
            cfg.num_forms = 3;
            cfg.seed = rng();
            auto model = make_classifier(cfg, 3, 3);
            const auto geo = prepare_geometry(complex, lifted_grid(rng), standard_basis_chains<double>(complex, k),
                                              make_quadrature_plan(k, 3));
            const int label = int(rng() % 3);
            const Eigen::VectorXd analytic = backward(model, geo, forward(model, geo), label);
            auto objective = [&](const Eigen::VectorXd& q) {
                auto probe = model;
                probe.set_parameters(q);
                return loss(forward(probe, geo).logits, label);
            };
            t.add((1.0 + o.corrupt) * analytic, finite_difference(objective, model.parameters()));
        }
    return t.done();
}

// A zero upstream must give exactly zero gradients everywhere.
GradcheckSuite zero_upstream_suite(const GradcheckOptions& o, std::mt19937_64& rng)
{
    Tally t{{"zero_upstream"}, o.tolerance};
    const SimplicialComplex complex = grid_complex(3);
    for (int k = 0; k <= 2; ++k) {
        const std::vector<Index> hidden{6};
        const auto form = NeuralKForm<double>::random(3, k, 2, hidden, Activation::tanh, rng);
        const auto geo = prepare_geometry(complex, lifted_grid(rng), standard_basis_chains<double>(complex, k),
                                          make_quadrature_plan(k, 3));
        const Eigen::MatrixXd up = Eigen::MatrixXd::Zero(geo.num_chains(), 2);
        const Eigen::VectorXd analytic = integration_matrix_backward(form, geo, up).flatten();
        t.add((1.0 + o.corrupt) * analytic, Eigen::VectorXd::Zero(analytic.size()));
    }
    return t.done();
}

} // namespace

std::vector<GradcheckSuite> run_gradcheck(const GradcheckOptions& options)
{
    if (options.instances < 1) throw InputError("gradcheck: need at least one instance");
    std::mt19937_64 rng(options.seed);
    return {zero_upstream_suite(options, rng), mlp_suite(options, rng), integration_suite(options, rng),
            classifier_suite(options, rng)};
}

} // namespace nkf
