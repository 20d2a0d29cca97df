#ifndef NKF_TESTS_SUPPORT_HPP
#define NKF_TESTS_SUPPORT_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include <Eigen/Dense>

namespace nkf::testing {

/// Central differences of f at x, one coordinate at a time.
inline Eigen::VectorXd finite_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                         const Eigen::VectorXd& x, double eps = 1e-5)
{
    Eigen::VectorXd grad(x.size());
    Eigen::VectorXd probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        probe(i) = x(i) + eps;
        const double up = f(probe);
        probe(i) = x(i) - eps;
        const double down = f(probe);
        probe(i) = x(i);
        grad(i) = (up - down) / (2 * eps);
    }
    return grad;
}

/// Largest entrywise |a - b| / max(|a|, |b|, floor). The floor keeps
/// vanishing gradients from dividing by zero.
inline double max_relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor = 1e-6)
{
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double scale = std::max({std::abs(a(i)), std::abs(b(i)), floor});
        worst = std::max(worst, std::abs(a(i) - b(i)) / scale);
    }
    return worst;
}

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                                     double lo = -1.0, double hi = 1.0)
{
    std::uniform_real_distribution<double> dist(lo, hi);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = dist(rng);
    return m;
}

} // namespace nkf::testing

#endif
