#include <doctest.h>

#include "nkf/nn.hpp"
#include "support.hpp"

using namespace nkf;

namespace {

// Straight-line re-evaluation with explicit loops, independent of the
// Eigen expression path used by Mlp::forward.
Eigen::VectorXd reference_forward(const Mlp<double>& mlp, const Eigen::VectorXd& x)
{
    std::vector<double> a(x.data(), x.data() + x.size());
    const auto& layers = mlp.layers();
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const auto& l = layers[li];
        std::vector<double> z(std::size_t(l.weight.rows()));
        for (Index r = 0; r < l.weight.rows(); ++r) {
            double s = l.bias(r);
            for (Index c = 0; c < l.weight.cols(); ++c) s += l.weight(r, c) * a[std::size_t(c)];
            if (li + 1 < layers.size()) {
                switch (mlp.activation()) {
                case Activation::relu: s = s > 0 ? s : 0; break;
                case Activation::tanh: s = std::tanh(s); break;
                case Activation::sigmoid: s = 1 / (1 + std::exp(-s)); break;
                }
            }
            z[std::size_t(r)] = s;
        }
        a = z;
    }
    return Eigen::Map<Eigen::VectorXd>(a.data(), Index(a.size()));
}

Mlp<double> random_mlp(std::vector<Index> widths, Activation act, unsigned seed)
{
    std::mt19937_64 rng(seed);
    auto mlp = Mlp<double>::random(widths, act, rng);
    // Non-zero biases exercise the bias path too.
    Eigen::VectorXd p = mlp.parameters();
    p += testing::random_matrix(p.size(), 1, rng, -0.3, 0.3);
    mlp.set_parameters(p);
    return mlp;
}

} // namespace

TEST_CASE("zero weights return the bias")
{
    DenseLayer<double> layer{Eigen::MatrixXd::Zero(3, 2), Eigen::Vector3d(1, -2, 0.5)};
    const Mlp<double> mlp({layer}, Activation::relu);
    CHECK(mlp_forward(mlp, Eigen::Vector2d(4, -7)) == Eigen::Vector3d(1, -2, 0.5));
    CHECK(mlp_forward(mlp, Eigen::Vector2d(0, 0)) == Eigen::Vector3d(1, -2, 0.5));
}

TEST_CASE("relu clamps between layers")
{
    DenseLayer<double> id{Eigen::Matrix2d::Identity(), Eigen::Vector2d::Zero()};
    const Mlp<double> mlp({id, id}, Activation::relu);
    CHECK(mlp_forward(mlp, Eigen::Vector2d(-1, 2)) == Eigen::Vector2d(0, 2));
}

TEST_CASE("forward matches a straight-line oracle")
{
    for (Activation act : {Activation::relu, Activation::tanh, Activation::sigmoid}) {
        const auto mlp = random_mlp({3, 7, 5, 4}, act, 3);
        std::mt19937_64 rng(5);
        for (int t = 0; t < 10; ++t) {
            const Eigen::VectorXd x = testing::random_matrix(3, 1, rng, -2, 2);
            const Eigen::VectorXd got = mlp_forward(mlp, x);
            const Eigen::VectorXd want = reference_forward(mlp, x);
            CHECK((got - want).cwiseAbs().maxCoeff() < 1e-13);
        }
    }
}

TEST_CASE("forward is column-independent and deterministic")
{
    const auto mlp = random_mlp({2, 16, 8, 6}, Activation::relu, 9);
    std::mt19937_64 rng(1);
    const Eigen::MatrixXd batch = testing::random_matrix(2, 37, rng);
    const Eigen::MatrixXd out = mlp.forward(batch);
    CHECK(out == mlp.forward(batch));
    for (Index c = 0; c < batch.cols(); ++c) CHECK(Eigen::VectorXd(mlp.forward(batch.col(c))) == out.col(c));
}

TEST_CASE("forward rejects bad input")
{
    const auto mlp = random_mlp({2, 3}, Activation::relu, 1);
    CHECK_THROWS_AS(mlp_forward(mlp, Eigen::Vector3d(1, 2, 3)), InputError);
    CHECK_THROWS_AS(mlp_forward(mlp, Eigen::Vector2d(1, std::nan(""))), InputError);
    CHECK_THROWS_AS(Mlp<double>({{Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Zero(3)}}, Activation::relu),
                    InputError);
}

TEST_CASE("parameter flattening round-trips")
{
    auto mlp = random_mlp({3, 4, 2}, Activation::tanh, 4);
    const Eigen::VectorXd p = mlp.parameters();
    CHECK(p.size() == mlp.parameter_count());
    CHECK(p.size() == 3 * 4 + 4 + 4 * 2 + 2);
    CHECK(p(1) == mlp.layers()[0].weight(0, 1));
    auto other = random_mlp({3, 4, 2}, Activation::tanh, 5);
    other.set_parameters(p);
    CHECK(other == mlp);
}

TEST_CASE("backward: zero upstream gives zero gradients")
{
    const auto mlp = random_mlp({3, 5, 2}, Activation::tanh, 2);
    std::mt19937_64 rng(3);
    const Eigen::MatrixXd x = testing::random_matrix(3, 4, rng);
    const auto back = mlp_backward(mlp, x, Eigen::MatrixXd::Zero(2, 4));
    CHECK(back.params.flatten().isZero(0));
    CHECK(back.inputs.isZero(0));
}

TEST_CASE("backward: single linear layer")
{
    const auto mlp = random_mlp({3, 2}, Activation::relu, 6);
    const Eigen::Vector3d x(0.5, -1, 2);
    const Eigen::Vector2d g(3, -0.25);
    const auto back = mlp_backward(mlp, x, g);
    CHECK((back.params.layers[0].weight - g * x.transpose()).isZero(1e-15));
    CHECK((back.params.layers[0].bias - g).isZero(1e-15));
    CHECK((back.inputs - mlp.layers()[0].weight.transpose() * g).isZero(1e-15));
}

TEST_CASE("backward agrees with central differences for smooth activations")
{
    for (Activation act : {Activation::tanh, Activation::sigmoid}) {
        for (unsigned seed = 0; seed < 5; ++seed) {
            auto mlp = random_mlp({3, 6, 4, 2}, act, seed);
            std::mt19937_64 rng(seed + 100);
            const Eigen::MatrixXd x = testing::random_matrix(3, 5, rng);
            const Eigen::MatrixXd g = testing::random_matrix(2, 5, rng);
            const auto back = mlp_backward(mlp, x, g);

            auto objective = [&](const Eigen::VectorXd& p) {
                auto probe = mlp;
                probe.set_parameters(p);
                return (probe.forward(x).array() * g.array()).sum();
            };
            const Eigen::VectorXd fd = testing::finite_difference(objective, mlp.parameters());
            CHECK(testing::max_relative_error(back.params.flatten(), fd) < 1e-4);

            auto input_objective = [&](const Eigen::VectorXd& flat) {
                const Eigen::MatrixXd xi = Eigen::Map<const Eigen::MatrixXd>(flat.data(), 3, 5);
                return (mlp.forward(xi).array() * g.array()).sum();
            };
            const Eigen::VectorXd flat_x = Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
            const Eigen::VectorXd fd_x = testing::finite_difference(input_objective, flat_x);
            const Eigen::VectorXd got_x = Eigen::Map<const Eigen::VectorXd>(back.inputs.data(), back.inputs.size());
            CHECK(testing::max_relative_error(got_x, fd_x) < 1e-4);
        }
    }
}

TEST_CASE("relu subgradient at zero is zero")
{
    DenseLayer<double> first{Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Zero(1)};
    DenseLayer<double> second{Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Zero(1)};
    const Mlp<double> mlp({first, second}, Activation::relu);
    const auto back = mlp_backward(mlp, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1));
    CHECK(back.params.layers[0].weight(0, 0) == 0.0);
    CHECK(back.params.layers[0].bias(0) == 0.0);
    CHECK(back.inputs(0, 0) == 0.0);
}

TEST_CASE("backward is linear in the upstream gradient")
{
    const auto mlp = random_mlp({4, 8, 3}, Activation::tanh, 12);
    std::mt19937_64 rng(13);
    const Eigen::MatrixXd x = testing::random_matrix(4, 6, rng);
    const Eigen::MatrixXd g1 = testing::random_matrix(3, 6, rng);
    const Eigen::MatrixXd g2 = testing::random_matrix(3, 6, rng);
    const double a = 0.7, b = -1.3;
    const Eigen::VectorXd lhs = mlp_backward(mlp, x, a * g1 + b * g2).params.flatten();
    const Eigen::VectorXd rhs = a * mlp_backward(mlp, x, g1).params.flatten()
                                + b * mlp_backward(mlp, x, g2).params.flatten();
    CHECK(testing::max_relative_error(lhs, rhs, 1e-300) < 1e-12);
}

TEST_CASE("optimizers")
{
    SUBCASE("zero gradient leaves parameters unchanged")
    {
        Eigen::VectorXd p = Eigen::Vector3d(1, -2, 3);
        const Eigen::VectorXd before = p;
        Adam adam;
        adam.step(p, Eigen::VectorXd::Zero(3));
        CHECK(p == before);
        Sgd sgd;
        sgd.step(p, Eigen::VectorXd::Zero(3));
        CHECK(p == before);
    }
    SUBCASE("plain sgd step")
    {
        Eigen::VectorXd p = Eigen::VectorXd::Zero(1);
        Sgd sgd({.lr = 0.1});
        sgd.step(p, Eigen::VectorXd::Ones(1));
        CHECK(p(0) == doctest::Approx(-0.1).epsilon(1e-15));
    }
    SUBCASE("non-finite gradient is a divergence")
    {
        Eigen::VectorXd p = Eigen::VectorXd::Zero(2);
        Adam adam;
        CHECK_THROWS_AS(adam.step(p, Eigen::Vector2d(1, std::nan(""))), DivergenceError);
    }
    SUBCASE("quadratic bowl converges to its closed-form minimum")
    {
        // f(p) = 1/2 (p - c)^T A (p - c), minimum at c.
        const Eigen::Vector3d c(0.5, -1.5, 2.0);
        const Eigen::Vector3d diag(1.0, 2.0, 0.5);
        auto grad = [&](const Eigen::VectorXd& p) { return Eigen::VectorXd(diag.cwiseProduct(p - c)); };

        Eigen::VectorXd p = Eigen::VectorXd::Zero(3);
        Sgd sgd({.lr = 0.5});
        for (int i = 0; i < 200; ++i) sgd.step(p, grad(p));
        CHECK((p - c).cwiseAbs().maxCoeff() < 1e-6);

        Eigen::VectorXd q = Eigen::VectorXd::Zero(3);
        Adam adam({.lr = 0.05});
        for (int i = 0; i < 4000; ++i) adam.step(q, grad(q));
        CHECK((q - c).cwiseAbs().maxCoeff() < 1e-6);
    }
    SUBCASE("optimizer_step updates an Mlp")
    {
        auto mlp = random_mlp({2, 2}, Activation::relu, 1);
        auto g = MlpGradient<double>::zeros_like(mlp);
        g.layers[0].bias(0) = 1.0;
        const double before = mlp.layers()[0].bias(0);
        Sgd sgd({.lr = 0.1});
        optimizer_step(sgd, mlp, g);
        CHECK(mlp.layers()[0].bias(0) == doctest::Approx(before - 0.1));
    }
}

TEST_CASE("glorot initialization is seeded and bounded")
{
    std::mt19937_64 a(42), b(42);
    const std::vector<Index> widths{2, 16, 8, 6};
    const auto m1 = Mlp<double>::random(widths, Activation::relu, a);
    const auto m2 = Mlp<double>::random(widths, Activation::relu, b);
    CHECK(m1 == m2);
    const double limit = std::sqrt(6.0 / (2 + 16));
    CHECK(m1.layers()[0].weight.cwiseAbs().maxCoeff() <= limit);
    CHECK(m1.layers()[0].bias.isZero(0));
}
