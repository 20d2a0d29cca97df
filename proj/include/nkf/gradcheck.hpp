#ifndef NKF_GRADCHECK_HPP
#define NKF_GRADCHECK_HPP

#include <functional>
#include <string>
#include <vector>

#include "model.hpp"

namespace nkf {

/// Central differences of f at x, one coordinate at a time.
Eigen::VectorXd finite_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                  const Eigen::VectorXd& x, double eps = 1e-5);

/// Largest entrywise |a - b| / max(|a|, |b|, floor).
double max_relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor = 1e-6);

struct GradcheckOptions {
    unsigned long long seed = 0;
    int instances = 4;        // per suite and degree
    double tolerance = 1e-4;
    double corrupt = 0.0;     // analytic gradients are scaled by 1 + corrupt
};

struct GradcheckSuite {
    std::string name;
    int checks = 0;
    double max_rel_error = 0.0;
    bool passed = false;
};

/// Compares analytic gradients with finite differences for the MLP (weights
/// and inputs), the integration matrix (k = 0, 1, 2) and the full classifier
/// loss, plus a zero-upstream sanity suite.
std::vector<GradcheckSuite> run_gradcheck(const GradcheckOptions& options = {});

} // namespace nkf

#endif
