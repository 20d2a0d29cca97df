#include "nkf/quadrature.hpp"

#include <algorithm>
#include <numeric>

namespace nkf {

SimplexSubdivision subdivide_simplex(int k, int h)
{
    if (k < 1) throw InputError("subdivide_simplex: k must be >= 1");
    if (h < 1) throw InputError("subdivide_simplex: h must be >= 1");

    // Kuhn simplices of the h-scaled cube that lie in {h >= y_1 >= ... >= y_k >= 0};
    // the map t_i = (y_i - y_{i+1}) / h carries that region onto the standard simplex.
    SimplexSubdivision sub{k, h, {}};
    const double volume = 1.0 / (factorial(k) * std::pow(double(h), k));
    std::vector<int> base(std::size_t(k), 0);
    std::vector<int> perm(static_cast<std::size_t>(k));
    while (true) {
        std::iota(perm.begin(), perm.end(), 0);
        do {
            Eigen::MatrixXi y(k, k + 1);
            for (int i = 0; i < k; ++i) y(i, 0) = base[std::size_t(i)];
            for (int v = 1; v <= k; ++v) {
                y.col(v) = y.col(v - 1);
                y(perm[std::size_t(v - 1)], v) += 1;
            }
            bool inside = true;
            for (int v = 0; v <= k && inside; ++v) {
                if (y(0, v) > h) inside = false;
                for (int i = 0; i + 1 < k && inside; ++i)
                    if (y(i, v) < y(i + 1, v)) inside = false;
            }
            if (inside) {
                Eigen::MatrixXi lattice(k, k + 1);
                for (int v = 0; v <= k; ++v)
                    for (int i = 0; i < k; ++i)
                        lattice(i, v) = y(i, v) - (i + 1 < k ? y(i + 1, v) : 0);
                sub.cells.push_back({std::move(lattice), volume});
            }
        } while (std::next_permutation(perm.begin(), perm.end()));

        int pos = k - 1;
        while (pos >= 0 && base[std::size_t(pos)] == h - 1) base[std::size_t(pos--)] = 0;
        if (pos < 0) break;
        ++base[std::size_t(pos)];
    }
    return sub;
}

QuadraturePlan make_quadrature_plan(int k, int h)
{
    if (h < 1) throw InputError("quadrature plan: h must be >= 1");
    QuadraturePlan plan;
    plan.k = k;
    plan.h = h;
    if (k == 0) {
        plan.nodes.resize(0, 1);
        plan.weights = Eigen::VectorXd::Ones(1);
        return plan;
    }
    const SimplexSubdivision sub = subdivide_simplex(k, h);
    std::map<std::vector<int>, double> accumulated;
    for (const auto& cell : sub.cells) {
        for (int v = 0; v <= k; ++v) {
            std::vector<int> key(cell.lattice.col(v).data(), cell.lattice.col(v).data() + k);
            accumulated[key] += cell.volume / double(k + 1);
        }
    }
    plan.nodes.resize(k, static_cast<Index>(accumulated.size()));
    plan.weights.resize(static_cast<Index>(accumulated.size()));
    Index col = 0;
    for (const auto& [key, weight] : accumulated) {
        for (int i = 0; i < k; ++i) plan.nodes(i, col) = double(key[std::size_t(i)]) / double(h);
        plan.weights(col) = weight;
        ++col;
    }
    return plan;
}

} // namespace nkf
