#ifndef NKF_QUADRATURE_HPP
#define NKF_QUADRATURE_HPP

#include <map>
#include <vector>

#include <Eigen/Sparse>

#include "forms.hpp"

namespace nkf {

/// Sub-simplex of the standard k-simplex; vertex coordinates are lattice
/// numerators over the step count h.
struct SubdivisionCell {
    Eigen::MatrixXi lattice; // k x (k+1), column per vertex
    double volume = 0.0;
};

/// Edgewise (Freudenthal) subdivision of {t >= 0, sum t <= 1} into h^k cells
/// of equal volume 1 / (k! h^k).
struct SimplexSubdivision {
    int k = 0;
    int h = 0;
    std::vector<SubdivisionCell> cells;

    Eigen::MatrixXd vertices(std::size_t cell) const
    {
        return cells[cell].lattice.cast<double>() / double(h);
    }
};

SimplexSubdivision subdivide_simplex(int k, int h);

/// Deduplicated subdivision vertices with vertex-average weights
/// vol(cell) / (k+1) summed over the cells that contain them.
struct QuadraturePlan {
    int k = 0;
    int h = 0;
    Eigen::MatrixXd nodes;   // k x N reference coordinates
    Eigen::VectorXd weights; // N, summing to 1/k!

    Index size() const { return weights.size(); }
};

/// For k = 0 the plan is a single node of weight 1 (point evaluation).
QuadraturePlan make_quadrature_plan(int k, int h);

/// Data-only part of an integration: the quadrature nodes of every simplex
/// in the support of the chains mapped into R^n, the epsilon values of each
/// simplex, and the chain coefficients. Depends on geometry and the plan,
/// never on psi.
template <typename Scalar>
struct IntegrationGeometry {
    int n = 0;
    int k = 0;
    std::vector<std::size_t> simplices;       // support, ascending
    Matrix<Scalar> nodes;                     // n x (S * N), simplex-major
    Vector<Scalar> weights;                   // N
    Matrix<Scalar> epsilon;                   // C(n,k) x S
    Eigen::SparseMatrix<Scalar> coefficients; // m x S

    Index num_chains() const { return coefficients.rows(); }
    Index num_simplices() const { return static_cast<Index>(simplices.size()); }
    Index nodes_per_simplex() const { return weights.size(); }
};

template <typename Scalar>
IntegrationGeometry<Scalar> prepare_geometry(const SimplicialComplex& complex,
                                             const Embedding<Scalar>& embedding,
                                             const ChainTuple<Scalar>& chains,
                                             const QuadraturePlan& plan)
{
    const int k = chains.dim();
    if (plan.k != k)
        throw InputError("integration: plan for k=" + std::to_string(plan.k) + " used with "
                         + std::to_string(k) + "-chains");
    embedding.check_covers(complex);
    const int n = static_cast<int>(embedding.ambient_dim());
    if (k > n) throw InputError("integration: k exceeds ambient dimension");
    const MultiIndexTable table(n, k);

    IntegrationGeometry<Scalar> geo;
    geo.n = n;
    geo.k = k;

    std::map<std::size_t, Index> column;
    for (const auto& chain : chains) {
        chain.check_against(complex);
        for (const auto& term : chain.terms()) column.emplace(term.first, 0);
    }
    for (auto& [simplex, col] : column) {
        col = static_cast<Index>(geo.simplices.size());
        geo.simplices.push_back(simplex);
    }

    const Index S = geo.num_simplices();
    const Index N = plan.size();
    const Matrix<Scalar> reference = plan.nodes.template cast<Scalar>();
    geo.weights = plan.weights.template cast<Scalar>();
    geo.nodes.resize(n, S * N);
    geo.epsilon.resize(table.size(), S);
    for (Index s = 0; s < S; ++s) {
        const std::size_t simplex = geo.simplices[std::size_t(s)];
        const Matrix<Scalar> jac = affine_jacobian(complex, embedding, k, simplex);
        const Vector<Scalar> origin = embedding.point(complex.simplex(k, simplex)[0]);
        geo.epsilon.col(s) = epsilon_all(jac, table);
        if (k == 0)
            geo.nodes.col(s) = origin;
        else
            geo.nodes.middleCols(s * N, N) = (jac * reference).colwise() + origin;
    }

    std::vector<Eigen::Triplet<Scalar>> triplets;
    for (std::size_t i = 0; i < chains.size(); ++i)
        for (const auto& [simplex, coeff] : chains[i].terms())
            triplets.emplace_back(Index(i), column.at(simplex), coeff);
    geo.coefficients.resize(static_cast<Index>(chains.size()), S);
    geo.coefficients.setFromTriplets(triplets.begin(), triplets.end());
    return geo;
}

namespace detail {

template <typename Scalar>
void check_form_matches(const NeuralKForm<Scalar>& form, const IntegrationGeometry<Scalar>& geo)
{
    if (form.n() != geo.n || form.k() != geo.k)
        throw InputError("integration: form is a " + std::to_string(form.k()) + "-form on R^"
                         + std::to_string(form.n()) + ", data are " + std::to_string(geo.k)
                         + "-chains in R^" + std::to_string(geo.n));
}

} // namespace detail

/// S x num_forms matrix of per-simplex integrals over the geometry's support.
template <typename Scalar>
Matrix<Scalar> simplex_integrals(const NeuralKForm<Scalar>& form, const IntegrationGeometry<Scalar>& geo)
{
    detail::check_form_matches(form, geo);
    const Index S = geo.num_simplices();
    const Index N = geo.nodes_per_simplex();
    const Index C = form.num_components();
    Matrix<Scalar> out(S, form.num_forms());
    if (S == 0) return out;
    const Matrix<Scalar> values = form.psi().forward(geo.nodes);
    for (Index s = 0; s < S; ++s) {
        for (int j = 0; j < form.num_forms(); ++j) {
            Scalar total(0);
            for (Index t = 0; t < N; ++t) {
                Scalar g(0);
                for (Index I = 0; I < C; ++I) g += values(j * C + I, s * N + t) * geo.epsilon(I, s);
                total += geo.weights(t) * g;
            }
            out(s, j) = total;
        }
    }
    return out;
}

/// X(i, j) = integral of form j over chain i.
template <typename Scalar>
Matrix<Scalar> integration_matrix(const NeuralKForm<Scalar>& form, const IntegrationGeometry<Scalar>& geo)
{
    const Matrix<Scalar> per_simplex = simplex_integrals(form, geo);
    return geo.coefficients * per_simplex;
}

template <typename Scalar>
Matrix<Scalar> integration_matrix(const NeuralKForm<Scalar>& form, const SimplicialComplex& complex,
                                  const Embedding<Scalar>& embedding, const ChainTuple<Scalar>& chains,
                                  const QuadraturePlan& plan)
{
    return integration_matrix(form, prepare_geometry(complex, embedding, chains, plan));
}

/// Gradient of sum_ij upstream(i,j) * X(i,j) with respect to psi's
/// parameters. Geometry carries no gradient.
template <typename Scalar, typename Derived>
MlpGradient<Scalar> integration_matrix_backward(const NeuralKForm<Scalar>& form,
                                                const IntegrationGeometry<Scalar>& geo,
                                                const Eigen::MatrixBase<Derived>& upstream)
{
    detail::check_form_matches(form, geo);
    if (upstream.rows() != geo.num_chains() || upstream.cols() != form.num_forms())
        throw InputError("integration backward: upstream shape mismatch");
    const Index S = geo.num_simplices();
    const Index N = geo.nodes_per_simplex();
    const Index C = form.num_components();
    if (S == 0) return MlpGradient<Scalar>::zeros_like(form.psi());

    const Matrix<Scalar> per_simplex =
        Matrix<Scalar>(geo.coefficients.transpose()) * upstream.template cast<Scalar>();
    Matrix<Scalar> d_values(form.psi().output_dim(), S * N);
    for (Index s = 0; s < S; ++s)
        for (int j = 0; j < form.num_forms(); ++j)
            for (Index t = 0; t < N; ++t)
                for (Index I = 0; I < C; ++I)
                    d_values(j * C + I, s * N + t) = geo.weights(t) * geo.epsilon(I, s) * per_simplex(s, j);
    return mlp_backward(form.psi(), geo.nodes, d_values).params;
}

/// Integral of form j over one k-simplex (k >= 1).
template <typename Scalar>
Scalar integrate_simplex(const NeuralKForm<Scalar>& form, int j, const SimplicialComplex& complex,
                         const Embedding<Scalar>& embedding, std::size_t simplex,
                         const QuadraturePlan& plan)
{
    if (form.k() == 0) throw InputError("integrate_simplex: use evaluate_points for 0-forms");
    if (j < 0 || j >= form.num_forms()) throw InputError("integrate_simplex: form index out of range");
    const ChainTuple<Scalar> single(
        {Chain<Scalar>(form.k(), {{simplex, Scalar(1)}})});
    return simplex_integrals(form, prepare_geometry(complex, embedding, single, plan))(0, j);
}

template <typename Scalar>
Scalar integrate_chain(const NeuralKForm<Scalar>& form, int j, const SimplicialComplex& complex,
                       const Embedding<Scalar>& embedding, const Chain<Scalar>& chain,
                       const QuadraturePlan& plan)
{
    if (chain.dim() != form.k())
        throw InputError("integrate_chain: " + std::to_string(chain.dim()) + "-chain against a "
                         + std::to_string(form.k()) + "-form");
    if (j < 0 || j >= form.num_forms()) throw InputError("integrate_chain: form index out of range");
    return integration_matrix(form, complex, embedding, ChainTuple<Scalar>({chain}), plan)(0, j);
}

/// 0-form evaluation at embedded vertices: row r is psi(phi(vertices[r])).
template <typename Scalar>
Matrix<Scalar> evaluate_points(const NeuralKForm<Scalar>& form, const Embedding<Scalar>& embedding,
                               std::span<const std::size_t> vertices)
{
    if (form.k() != 0) throw InputError("evaluate_points: form degree must be 0");
    if (embedding.ambient_dim() != form.n()) throw InputError("evaluate_points: dimension mismatch");
    Matrix<Scalar> points(form.n(), static_cast<Index>(vertices.size()));
    for (std::size_t i = 0; i < vertices.size(); ++i) {
        if (static_cast<Index>(vertices[i]) >= embedding.num_vertices())
            throw InputError("evaluate_points: vertex out of range");
        points.col(Index(i)) = embedding.point(vertices[i]);
    }
    return form.psi().forward(points).transpose();
}

} // namespace nkf

#endif
