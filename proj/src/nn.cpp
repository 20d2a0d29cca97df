#include "nkf/nn.hpp"

namespace nkf {

std::string_view to_string(Activation activation)
{
    switch (activation) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    }
    return "relu";
}

Activation parse_activation(std::string_view name)
{
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    if (name == "sigmoid") return Activation::sigmoid;
    throw InputError("unknown activation '" + std::string(name) + "'");
}

namespace {

void check_step(const Eigen::Ref<Eigen::VectorXd>& params, const Eigen::Ref<const Eigen::VectorXd>& grad)
{
    if (params.size() != grad.size())
        throw InputError("optimizer: gradient has " + std::to_string(grad.size())
                         + " entries for " + std::to_string(params.size()) + " parameters");
    if (!grad.allFinite()) throw DivergenceError("optimizer: non-finite gradient");
}

} // namespace

void Sgd::step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grad)
{
    check_step(params, grad);
    params -= options_.lr * grad;
}

void Adam::step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grad)
{
    check_step(params, grad);
    if (m_.size() != params.size()) {
        m_ = Eigen::VectorXd::Zero(params.size());
        v_ = Eigen::VectorXd::Zero(params.size());
        step_ = 0;
    }
    ++step_;
    m_ = options_.beta1 * m_ + (1.0 - options_.beta1) * grad;
    v_ = options_.beta2 * v_ + (1.0 - options_.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(options_.beta1, double(step_));
    const double c2 = 1.0 - std::pow(options_.beta2, double(step_));
    params.array() -= options_.lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + options_.eps);
}

} // namespace nkf
