#include "nkf/simplicial.hpp"

#include <set>

namespace nkf {

const std::vector<VertexTuple>& SimplicialComplex::simplices(int k) const
{
    static const std::vector<VertexTuple> empty;
    if (k < 0 || k > dimension()) return empty;
    return by_dim_[static_cast<std::size_t>(k)];
}

std::optional<std::size_t> SimplicialComplex::index_of(VertexTuple vertices) const
{
    if (vertices.empty()) return std::nullopt;
    std::sort(vertices.begin(), vertices.end());
    const auto k = vertices.size() - 1;
    if (k >= lookup_.size()) return std::nullopt;
    const auto it = lookup_[k].find(vertices);
    if (it == lookup_[k].end()) return std::nullopt;
    return it->second;
}

namespace {

void insert_with_faces(std::vector<std::set<VertexTuple>>& sets, const VertexTuple& simplex)
{
    const auto k = simplex.size() - 1;
    if (sets.size() <= k) sets.resize(k + 1);
    if (!sets[k].insert(simplex).second || k == 0) return;
    for (std::size_t drop = 0; drop < simplex.size(); ++drop) {
        VertexTuple face;
        face.reserve(k);
        for (std::size_t i = 0; i < simplex.size(); ++i)
            if (i != drop) face.push_back(simplex[i]);
        insert_with_faces(sets, face);
    }
}

} // namespace

SimplicialComplex build_complex(const std::vector<VertexTuple>& simplices, std::size_t num_vertices)
{
    std::vector<std::set<VertexTuple>> sets(1);
    for (std::size_t v = 0; v < num_vertices; ++v) sets[0].insert({v});

    for (VertexTuple simplex : simplices) {
        if (simplex.empty()) throw InputError("build_complex: empty simplex");
        std::sort(simplex.begin(), simplex.end());
        if (simplex.back() >= num_vertices)
            throw InputError("build_complex: vertex " + std::to_string(simplex.back())
                             + " out of range (" + std::to_string(num_vertices) + " vertices)");
        if (std::adjacent_find(simplex.begin(), simplex.end()) != simplex.end())
            throw InputError("build_complex: repeated vertex in simplex");
        insert_with_faces(sets, simplex);
    }

    SimplicialComplex complex;
    if (num_vertices == 0) return complex;
    for (const auto& level : sets) {
        complex.by_dim_.emplace_back(level.begin(), level.end());
        auto& lookup = complex.lookup_.emplace_back();
        for (std::size_t i = 0; i < complex.by_dim_.back().size(); ++i)
            lookup.emplace(complex.by_dim_.back()[i], i);
    }
    return complex;
}

} // namespace nkf
