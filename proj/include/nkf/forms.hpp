#ifndef NKF_FORMS_HPP
#define NKF_FORMS_HPP

#include <algorithm>
#include <span>
#include <vector>

#include "nn.hpp"
#include "simplicial.hpp"

namespace nkf {

/// Strictly increasing k-subsets of the n coordinate axes, in lexicographic
/// order. Axes are 0-based here; the order is part of the checkpoint format.
class MultiIndexTable {
public:
    MultiIndexTable() = default;

    MultiIndexTable(int n, int k) : n_(n), k_(k)
    {
        if (n < 0 || k < 0 || k > n)
            throw InputError("multi_indices: need 0 <= k <= n (n=" + std::to_string(n)
                             + ", k=" + std::to_string(k) + ")");
        std::vector<int> current(static_cast<std::size_t>(k));
        for (int i = 0; i < k; ++i) current[std::size_t(i)] = i;
        while (true) {
            indices_.push_back(current);
            int pos = k - 1;
            while (pos >= 0 && current[std::size_t(pos)] == n - k + pos) --pos;
            if (pos < 0) break;
            ++current[std::size_t(pos)];
            for (int i = pos + 1; i < k; ++i) current[std::size_t(i)] = current[std::size_t(i - 1)] + 1;
        }
    }

    int n() const { return n_; }
    int k() const { return k_; }
    Index size() const { return static_cast<Index>(indices_.size()); }
    const std::vector<int>& operator[](Index i) const { return indices_[std::size_t(i)]; }
    const std::vector<std::vector<int>>& indices() const { return indices_; }

    /// Position of `index` in the table, or -1.
    Index rank(const std::vector<int>& index) const
    {
        const auto it = std::lower_bound(indices_.begin(), indices_.end(), index);
        if (it == indices_.end() || *it != index) return -1;
        return static_cast<Index>(it - indices_.begin());
    }

private:
    int n_ = 0;
    int k_ = 0;
    std::vector<std::vector<int>> indices_;
};

inline MultiIndexTable multi_indices(int n, int k) { return MultiIndexTable(n, k); }

namespace detail {

template <typename Derived>
typename Derived::Scalar small_determinant(const Eigen::MatrixBase<Derived>& m)
{
    switch (m.rows()) {
    case 0: return typename Derived::Scalar(1);
    case 1: return m(0, 0);
    case 2: return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    case 3:
        return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1))
               - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
               + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
    default: return m.partialPivLu().determinant();
    }
}

} // namespace detail

/// Volume spanned by the k columns of `jacobian` after projecting onto the
/// coordinate subspace `rows`: the k x k minor on those rows. Returns 1 for k = 0.
template <typename Derived>
typename Derived::Scalar epsilon_index(const Eigen::MatrixBase<Derived>& jacobian,
                                       std::span<const int> rows)
{
    using Scalar = typename Derived::Scalar;
    const Index k = jacobian.cols();
    if (static_cast<Index>(rows.size()) != k)
        throw InputError("epsilon_index: multi-index of length " + std::to_string(rows.size())
                         + " for a " + std::to_string(k) + "-column jacobian");
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] < 0 || rows[i] >= jacobian.rows() || (i > 0 && rows[i] <= rows[i - 1]))
            throw InputError("epsilon_index: multi-index must be strictly increasing and in range");
    }
    Matrix<Scalar> minor(k, k);
    for (Index r = 0; r < k; ++r) minor.row(r) = jacobian.row(rows[std::size_t(r)]);
    return detail::small_determinant(minor);
}

/// Column j is phi(v_j) - phi(v_0) for the stored vertex order of the simplex.
template <typename Scalar>
Matrix<Scalar> affine_jacobian(const SimplicialComplex& complex, const Embedding<Scalar>& embedding,
                               int k, std::size_t simplex)
{
    if (simplex >= complex.size(k))
        throw InputError("affine_jacobian: no " + std::to_string(k) + "-simplex "
                         + std::to_string(simplex));
    const VertexTuple& v = complex.simplex(k, simplex);
    for (auto vertex : v)
        if (static_cast<Index>(vertex) >= embedding.num_vertices())
            throw InputError("affine_jacobian: vertex " + std::to_string(vertex)
                             + " missing from embedding");
    Matrix<Scalar> jac(embedding.ambient_dim(), k);
    for (int j = 0; j < k; ++j) jac.col(j) = embedding.point(v[std::size_t(j) + 1]) - embedding.point(v[0]);
    return jac;
}

/// All C(n,k) epsilon values of a jacobian in table order.
template <typename Derived>
Vector<typename Derived::Scalar> epsilon_all(const Eigen::MatrixBase<Derived>& jacobian,
                                             const MultiIndexTable& table)
{
    Vector<typename Derived::Scalar> eps(table.size());
    for (Index i = 0; i < table.size(); ++i) eps(i) = epsilon_index(jacobian, std::span<const int>(table[i]));
    return eps;
}

/// Tuple of num_forms k-forms on R^n whose scaling functions are the outputs
/// of one shared MLP. Coefficient of dx_I in form j sits at output
/// j * C(n,k) + rank(I).
template <typename Scalar>
class NeuralKForm {
public:
    NeuralKForm() = default;

    NeuralKForm(Mlp<Scalar> psi, int n, int k, int num_forms)
        : psi_(std::move(psi)), table_(n, k), num_forms_(num_forms)
    {
        if (num_forms < 1) throw InputError("neural k-form: need at least one form");
        if (psi_.input_dim() != n)
            throw InputError("neural k-form: psi input dim " + std::to_string(psi_.input_dim())
                             + " != n = " + std::to_string(n));
        if (psi_.output_dim() != table_.size() * num_forms)
            throw InputError("neural k-form: psi output dim " + std::to_string(psi_.output_dim())
                             + " != C(n,k) * forms = " + std::to_string(table_.size() * num_forms));
    }

    /// Random psi with the given hidden widths.
    static NeuralKForm random(int n, int k, int num_forms, std::span<const Index> hidden,
                              Activation activation, std::mt19937_64& rng)
    {
        const MultiIndexTable table(n, k);
        std::vector<Index> widths{n};
        widths.insert(widths.end(), hidden.begin(), hidden.end());
        widths.push_back(table.size() * num_forms);
        return NeuralKForm(Mlp<Scalar>::random(widths, activation, rng), n, k, num_forms);
    }

    int n() const { return table_.n(); }
    int k() const { return table_.k(); }
    int num_forms() const { return num_forms_; }
    Index num_components() const { return table_.size(); }
    const MultiIndexTable& table() const { return table_; }
    const Mlp<Scalar>& psi() const { return psi_; }
    Mlp<Scalar>& psi() { return psi_; }

    Index slot(Index index_rank, int form) const { return Index(form) * table_.size() + index_rank; }

    template <typename Other>
    NeuralKForm<Other> cast() const
    {
        return NeuralKForm<Other>(psi_.template cast<Other>(), n(), k(), num_forms_);
    }

private:
    Mlp<Scalar> psi_;
    MultiIndexTable table_;
    int num_forms_ = 1;
};

/// Row j holds form j's scaling functions at p, in table order.
template <typename Scalar, typename Derived>
Matrix<Scalar> eval_scalings(const NeuralKForm<Scalar>& form, const Eigen::MatrixBase<Derived>& p)
{
    if (p.cols() != 1 || p.rows() != form.n())
        throw InputError("eval_scalings: point must be a column of length " + std::to_string(form.n()));
    const Vector<Scalar> out = form.psi().forward(p);
    return Eigen::Map<const Matrix<Scalar>>(out.data(), form.num_components(), form.num_forms())
        .transpose();
}

/// Inverse of eval_scalings' reshape: flattens an num_forms x C(n,k) matrix
/// back into psi's output layout.
template <typename Derived>
Vector<typename Derived::Scalar> flatten_scalings(const Eigen::MatrixBase<Derived>& scalings)
{
    Matrix<typename Derived::Scalar> transposed = scalings.transpose();
    return Eigen::Map<const Vector<typename Derived::Scalar>>(transposed.data(), transposed.size());
}

} // namespace nkf

#endif
