#ifndef NKF_SIMPLICIAL_HPP
#define NKF_SIMPLICIAL_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "core.hpp"

namespace nkf {

/// Vertex indices of a simplex, strictly increasing. The stored order is the
/// positive orientation.
using VertexTuple = std::vector<std::size_t>;

/// Abstract simplicial complex closed under faces. Every vertex
/// 0..num_vertices-1 is a 0-simplex; higher simplices are kept per dimension
/// in lexicographic order.
class SimplicialComplex {
public:
    SimplicialComplex() = default;

    std::size_t num_vertices() const { return by_dim_.empty() ? 0 : by_dim_[0].size(); }

    /// Highest dimension with at least one simplex, -1 for the empty complex.
    int dimension() const { return static_cast<int>(by_dim_.size()) - 1; }

    std::size_t size(int k) const
    {
        return (k < 0 || k > dimension()) ? 0 : by_dim_[static_cast<std::size_t>(k)].size();
    }

    const std::vector<VertexTuple>& simplices(int k) const;
    const VertexTuple& simplex(int k, std::size_t i) const { return simplices(k).at(i); }

    /// Position of `vertices` (sorted or not) within its dimension.
    std::optional<std::size_t> index_of(VertexTuple vertices) const;

    bool operator==(const SimplicialComplex& other) const { return by_dim_ == other.by_dim_; }

    friend SimplicialComplex build_complex(const std::vector<VertexTuple>& simplices,
                                           std::size_t num_vertices);

private:
    std::vector<std::vector<VertexTuple>> by_dim_;
    std::vector<std::map<VertexTuple, std::size_t>> lookup_;
};

/// Builds the smallest complex containing every given simplex and all of its
/// faces. Tuples may be given in any vertex order; they are sorted.
/// Throws InputError on an out-of-range vertex, a repeated vertex inside one
/// tuple or an empty tuple.
SimplicialComplex build_complex(const std::vector<VertexTuple>& simplices,
                                std::size_t num_vertices);

/// Per-vertex coordinates in R^n; row v is the image of vertex v.
template <typename Scalar>
class Embedding {
public:
    Embedding() = default;

    explicit Embedding(Matrix<Scalar> coords) : coords_(std::move(coords))
    {
        if (!coords_.allFinite()) throw InputError("embedding: non-finite coordinate");
    }

    Index num_vertices() const { return coords_.rows(); }
    Index ambient_dim() const { return coords_.cols(); }
    const Matrix<Scalar>& coords() const { return coords_; }
    auto point(std::size_t v) const { return coords_.row(static_cast<Index>(v)).transpose(); }

    void check_covers(const SimplicialComplex& complex) const
    {
        if (static_cast<std::size_t>(coords_.rows()) != complex.num_vertices())
            throw InputError("embedding: " + std::to_string(coords_.rows()) + " rows for "
                             + std::to_string(complex.num_vertices()) + " vertices");
    }

private:
    Matrix<Scalar> coords_;
};

/// Finite real combination of oriented k-simplices, stored as terms sorted by
/// simplex index.
template <typename Scalar>
class Chain {
public:
    using Term = std::pair<std::size_t, Scalar>;

    Chain() = default;

    Chain(int dim, std::vector<Term> terms) : dim_(dim), terms_(std::move(terms))
    {
        if (dim < 0) throw InputError("chain: negative dimension");
        std::sort(terms_.begin(), terms_.end(),
                  [](const Term& a, const Term& b) { return a.first < b.first; });
        for (std::size_t i = 0; i < terms_.size(); ++i) {
            if (!std::isfinite(static_cast<double>(terms_[i].second)))
                throw InputError("chain: non-finite coefficient");
            if (i > 0 && terms_[i].first == terms_[i - 1].first)
                throw InputError("chain: repeated simplex index "
                                 + std::to_string(terms_[i].first));
        }
    }

    int dim() const { return dim_; }
    const std::vector<Term>& terms() const { return terms_; }
    bool empty() const { return terms_.empty(); }

    /// Same chain with zero coefficients dropped.
    Chain canonical() const
    {
        Chain out;
        out.dim_ = dim_;
        for (const auto& t : terms_)
            if (t.second != Scalar(0)) out.terms_.push_back(t);
        return out;
    }

    void check_against(const SimplicialComplex& complex) const
    {
        for (const auto& [index, coeff] : terms_)
            if (index >= complex.size(dim_))
                throw InputError("chain: simplex index " + std::to_string(index)
                                 + " out of range for dimension " + std::to_string(dim_));
    }

    bool operator==(const Chain& other) const = default;

private:
    int dim_ = 0;
    std::vector<Term> terms_;
};

/// Ordered tuple of m >= 1 chains of one dimension (a chain-valued column vector).
template <typename Scalar>
class ChainTuple {
public:
    ChainTuple() = default;

    explicit ChainTuple(std::vector<Chain<Scalar>> chains) : chains_(std::move(chains))
    {
        if (chains_.empty()) throw InputError("chain tuple: needs at least one chain");
        for (const auto& c : chains_)
            if (c.dim() != chains_.front().dim())
                throw InputError("chain tuple: mixed chain dimensions");
    }

    int dim() const { return chains_.empty() ? 0 : chains_.front().dim(); }
    std::size_t size() const { return chains_.size(); }
    const Chain<Scalar>& operator[](std::size_t i) const { return chains_[i]; }
    const std::vector<Chain<Scalar>>& chains() const { return chains_; }
    auto begin() const { return chains_.begin(); }
    auto end() const { return chains_.end(); }

    bool operator==(const ChainTuple& other) const = default;

private:
    std::vector<Chain<Scalar>> chains_;
};

/// One chain per k-simplex with coefficient +1, in the complex's order.
template <typename Scalar = double>
ChainTuple<Scalar> standard_basis_chains(const SimplicialComplex& complex, int k)
{
    if (k < 0 || k > complex.dimension() || complex.size(k) == 0)
        throw InputError("standard basis: complex has no " + std::to_string(k) + "-simplices");
    std::vector<Chain<Scalar>> chains;
    chains.reserve(complex.size(k));
    for (std::size_t i = 0; i < complex.size(k); ++i)
        chains.emplace_back(k, std::vector<typename Chain<Scalar>::Term>{{i, Scalar(1)}});
    return ChainTuple<Scalar>(std::move(chains));
}

/// Row i of the result is sum_j L(i, j) * chains[j], canonicalized.
template <typename Derived, typename Scalar>
ChainTuple<Scalar> apply_matrix_left(const Eigen::MatrixBase<Derived>& L,
                                     const ChainTuple<Scalar>& chains)
{
    if (L.cols() != static_cast<Index>(chains.size()))
        throw InputError("apply_matrix_left: matrix has " + std::to_string(L.cols())
                         + " columns for " + std::to_string(chains.size()) + " chains");
    std::vector<Chain<Scalar>> rows;
    rows.reserve(static_cast<std::size_t>(L.rows()));
    for (Index i = 0; i < L.rows(); ++i) {
        std::map<std::size_t, Scalar> acc;
        for (Index j = 0; j < L.cols(); ++j) {
            const Scalar a = static_cast<Scalar>(L(i, j));
            if (a == Scalar(0)) continue;
            for (const auto& [index, coeff] : chains[static_cast<std::size_t>(j)].terms())
                acc[index] += a * coeff;
        }
        std::vector<typename Chain<Scalar>::Term> terms(acc.begin(), acc.end());
        rows.push_back(Chain<Scalar>(chains.dim(), std::move(terms)).canonical());
    }
    return ChainTuple<Scalar>(std::move(rows));
}

template <typename Scalar>
struct PathComplex {
    SimplicialComplex complex;
    Embedding<Scalar> embedding;
    Chain<Scalar> chain;
};

/// Piecewise-linear path through the rows of `points`. Vertices are numbered
/// by lexicographic order of their coordinates (ties keep input order), so a
/// path and its reversal share one complex and differ only in the signs of
/// the returned chain, which integrates to the directed path integral.
template <typename Derived>
PathComplex<typename Derived::Scalar> path_to_complex(const Eigen::MatrixBase<Derived>& points)
{
    using Scalar = typename Derived::Scalar;
    const Index count = points.rows();
    if (count < 2) throw InputError("path_to_complex: need at least 2 points");

    std::vector<std::size_t> order(static_cast<std::size_t>(count));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        for (Index c = 0; c < points.cols(); ++c) {
            if (points(Index(a), c) < points(Index(b), c)) return true;
            if (points(Index(b), c) < points(Index(a), c)) return false;
        }
        return false;
    });
    std::vector<std::size_t> vertex_of(order.size());
    Matrix<Scalar> coords(count, points.cols());
    for (std::size_t v = 0; v < order.size(); ++v) {
        vertex_of[order[v]] = v;
        coords.row(Index(v)) = points.row(Index(order[v]));
    }

    std::vector<VertexTuple> edges;
    for (Index i = 0; i + 1 < count; ++i)
        edges.push_back({vertex_of[std::size_t(i)], vertex_of[std::size_t(i + 1)]});
    SimplicialComplex complex = build_complex(edges, static_cast<std::size_t>(count));

    // The same edge may be traversed more than once; coefficients accumulate.
    std::map<std::size_t, Scalar> acc;
    for (const auto& e : edges) {
        const Scalar sign = e[0] < e[1] ? Scalar(1) : Scalar(-1);
        acc[*complex.index_of(e)] += sign;
    }
    Chain<Scalar> chain(1, {acc.begin(), acc.end()});
    return {std::move(complex), Embedding<Scalar>(std::move(coords)), std::move(chain)};
}

} // namespace nkf

#endif
