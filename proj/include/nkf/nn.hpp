#ifndef NKF_NN_HPP
#define NKF_NN_HPP

#include <cmath>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "core.hpp"

namespace nkf {

enum class Activation { relu, tanh, sigmoid };

std::string_view to_string(Activation activation);
Activation parse_activation(std::string_view name);

template <typename Scalar>
struct DenseLayer {
    Matrix<Scalar> weight; // out x in
    Vector<Scalar> bias;   // out

    bool operator==(const DenseLayer&) const = default;
};

namespace detail {

template <typename Derived>
void activate_inplace(Eigen::MatrixBase<Derived>& z, Activation activation)
{
    using Scalar = typename Derived::Scalar;
    switch (activation) {
    case Activation::relu: z = z.cwiseMax(Scalar(0)); break;
    case Activation::tanh: z = z.array().tanh().matrix(); break;
    case Activation::sigmoid:
        z = (Scalar(1) / (Scalar(1) + (-z.array()).exp())).matrix();
        break;
    }
}

// Derivative of the activation expressed through its output a = act(z).
// relu'(0) is taken as 0.
template <typename Derived>
auto activation_slope(const Eigen::MatrixBase<Derived>& a, Activation activation)
{
    using Scalar = typename Derived::Scalar;
    Matrix<Scalar> slope(a.rows(), a.cols());
    switch (activation) {
    case Activation::relu:
        slope = (a.array() > Scalar(0)).template cast<Scalar>().matrix();
        break;
    case Activation::tanh: slope = (Scalar(1) - a.array().square()).matrix(); break;
    case Activation::sigmoid: slope = (a.array() * (Scalar(1) - a.array())).matrix(); break;
    }
    return slope;
}

} // namespace detail

/// Fully connected network; the activation follows every layer except the
/// last. Inputs are passed column-wise: one column per point.
template <typename Scalar>
class Mlp {
public:
    Mlp() = default;

    Mlp(std::vector<DenseLayer<Scalar>> layers, Activation activation)
        : layers_(std::move(layers)), activation_(activation)
    {
        if (layers_.empty()) throw InputError("mlp: no layers");
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const auto& l = layers_[i];
            if (l.bias.size() != l.weight.rows())
                throw InputError("mlp: bias/weight mismatch in layer " + std::to_string(i));
            if (i > 0 && l.weight.cols() != layers_[i - 1].weight.rows())
                throw InputError("mlp: layer " + std::to_string(i) + " expects "
                                 + std::to_string(l.weight.cols()) + " inputs, previous yields "
                                 + std::to_string(layers_[i - 1].weight.rows()));
            if (!l.weight.allFinite() || !l.bias.allFinite())
                throw InputError("mlp: non-finite parameter in layer " + std::to_string(i));
        }
    }

    /// Glorot-uniform weights, zero biases. `widths` lists input, hidden and
    /// output sizes.
    static Mlp random(std::span<const Index> widths, Activation activation, std::mt19937_64& rng)
    {
        if (widths.size() < 2) throw InputError("mlp: need at least input and output widths");
        std::vector<DenseLayer<Scalar>> layers;
        for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
            const Index in = widths[i];
            const Index out = widths[i + 1];
            if (in <= 0 || out <= 0) throw InputError("mlp: non-positive layer width");
            const double limit = std::sqrt(6.0 / double(in + out));
            std::uniform_real_distribution<double> dist(-limit, limit);
            DenseLayer<Scalar> layer{Matrix<Scalar>(out, in), Vector<Scalar>::Zero(out)};
            for (Index c = 0; c < in; ++c)
                for (Index r = 0; r < out; ++r) layer.weight(r, c) = static_cast<Scalar>(dist(rng));
            layers.push_back(std::move(layer));
        }
        return Mlp(std::move(layers), activation);
    }

    Index input_dim() const { return layers_.front().weight.cols(); }
    Index output_dim() const { return layers_.back().weight.rows(); }
    Activation activation() const { return activation_; }
    const std::vector<DenseLayer<Scalar>>& layers() const { return layers_; }
    std::vector<DenseLayer<Scalar>>& layers() { return layers_; }

    /// Maps each input column to an output column. Products are evaluated
    /// coefficient-wise so a column's result does not depend on the batch it
    /// travels in.
    template <typename Derived>
    Matrix<Scalar> forward(const Eigen::MatrixBase<Derived>& inputs) const
    {
        check_inputs(inputs);
        Matrix<Scalar> a = inputs.template cast<Scalar>();
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            Matrix<Scalar> z = layers_[i].weight.lazyProduct(a);
            z.colwise() += layers_[i].bias;
            if (i + 1 < layers_.size()) detail::activate_inplace(z, activation_);
            a = std::move(z);
        }
        return a;
    }

    /// Post-activation outputs of every layer, index 0 being the input.
    template <typename Derived>
    std::vector<Matrix<Scalar>> forward_trace(const Eigen::MatrixBase<Derived>& inputs) const
    {
        check_inputs(inputs);
        std::vector<Matrix<Scalar>> trace;
        trace.reserve(layers_.size() + 1);
        trace.push_back(inputs.template cast<Scalar>());
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            Matrix<Scalar> z = layers_[i].weight.lazyProduct(trace.back());
            z.colwise() += layers_[i].bias;
            if (i + 1 < layers_.size()) detail::activate_inplace(z, activation_);
            trace.push_back(std::move(z));
        }
        return trace;
    }

    Index parameter_count() const
    {
        Index count = 0;
        for (const auto& l : layers_) count += l.weight.size() + l.bias.size();
        return count;
    }

    /// Flat view: per layer, the weight row-major then the bias.
    Vector<Scalar> parameters() const { return flatten(layers_); }

    void set_parameters(const Eigen::Ref<const Vector<Scalar>>& flat)
    {
        if (flat.size() != parameter_count())
            throw InputError("mlp: expected " + std::to_string(parameter_count())
                             + " parameters, got " + std::to_string(flat.size()));
        if (!flat.allFinite()) throw InputError("mlp: non-finite parameter");
        unflatten(flat, layers_);
    }

    template <typename Other>
    Mlp<Other> cast() const
    {
        std::vector<DenseLayer<Other>> layers;
        for (const auto& l : layers_)
            layers.push_back({l.weight.template cast<Other>(), l.bias.template cast<Other>()});
        return Mlp<Other>(std::move(layers), activation_);
    }

    bool operator==(const Mlp&) const = default;

    static Vector<Scalar> flatten(const std::vector<DenseLayer<Scalar>>& layers)
    {
        Index count = 0;
        for (const auto& l : layers) count += l.weight.size() + l.bias.size();
        Vector<Scalar> flat(count);
        Index pos = 0;
        for (const auto& l : layers) {
            for (Index r = 0; r < l.weight.rows(); ++r)
                for (Index c = 0; c < l.weight.cols(); ++c) flat(pos++) = l.weight(r, c);
            flat.segment(pos, l.bias.size()) = l.bias;
            pos += l.bias.size();
        }
        return flat;
    }

    static void unflatten(const Eigen::Ref<const Vector<Scalar>>& flat,
                          std::vector<DenseLayer<Scalar>>& layers)
    {
        Index pos = 0;
        for (auto& l : layers) {
            for (Index r = 0; r < l.weight.rows(); ++r)
                for (Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = flat(pos++);
            l.bias = flat.segment(pos, l.bias.size());
            pos += l.bias.size();
        }
    }

private:
    template <typename Derived>
    void check_inputs(const Eigen::MatrixBase<Derived>& inputs) const
    {
        if (inputs.rows() != input_dim())
            throw InputError("mlp: input has dimension " + std::to_string(inputs.rows())
                             + ", expected " + std::to_string(input_dim()));
        if (!inputs.allFinite()) throw InputError("mlp: non-finite input");
    }

    std::vector<DenseLayer<Scalar>> layers_;
    Activation activation_ = Activation::relu;
};

/// Accumulated dLoss/dtheta, shape-congruent with an Mlp.
template <typename Scalar>
struct MlpGradient {
    std::vector<DenseLayer<Scalar>> layers;

    static MlpGradient zeros_like(const Mlp<Scalar>& mlp)
    {
        MlpGradient g;
        for (const auto& l : mlp.layers())
            g.layers.push_back({Matrix<Scalar>::Zero(l.weight.rows(), l.weight.cols()),
                                Vector<Scalar>::Zero(l.bias.size())});
        return g;
    }

    Vector<Scalar> flatten() const { return Mlp<Scalar>::flatten(layers); }

    MlpGradient& operator+=(const MlpGradient& other)
    {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            layers[i].weight += other.layers[i].weight;
            layers[i].bias += other.layers[i].bias;
        }
        return *this;
    }

    bool all_finite() const
    {
        for (const auto& l : layers)
            if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
        return true;
    }
};

template <typename Scalar>
struct MlpBackward {
    MlpGradient<Scalar> params;
    Matrix<Scalar> inputs; // dLoss/dinput, one column per point
};

/// Single-point evaluation.
template <typename Scalar, typename Derived>
Vector<Scalar> mlp_forward(const Mlp<Scalar>& mlp, const Eigen::MatrixBase<Derived>& x)
{
    if (x.cols() != 1) throw InputError("mlp_forward: expected a single column");
    return mlp.forward(x);
}

/// Reverse-mode gradients of sum_columns <upstream, mlp(inputs)>.
template <typename Scalar, typename DerivedX, typename DerivedG>
MlpBackward<Scalar> mlp_backward(const Mlp<Scalar>& mlp, const Eigen::MatrixBase<DerivedX>& inputs,
                                 const Eigen::MatrixBase<DerivedG>& upstream)
{
    if (upstream.rows() != mlp.output_dim() || upstream.cols() != inputs.cols())
        throw InputError("mlp_backward: upstream is " + std::to_string(upstream.rows()) + "x"
                         + std::to_string(upstream.cols()) + ", expected "
                         + std::to_string(mlp.output_dim()) + "x" + std::to_string(inputs.cols()));
    const auto trace = mlp.forward_trace(inputs);
    const auto& layers = mlp.layers();

    MlpBackward<Scalar> out;
    out.params.layers.resize(layers.size());
    Matrix<Scalar> delta = upstream.template cast<Scalar>();
    for (std::size_t i = layers.size(); i-- > 0;) {
        const Matrix<Scalar>& a_in = trace[i];
        out.params.layers[i].weight = delta * a_in.transpose();
        out.params.layers[i].bias = delta.rowwise().sum();
        Matrix<Scalar> back = layers[i].weight.transpose() * delta;
        if (i > 0) back.array() *= detail::activation_slope(a_in, mlp.activation()).array();
        delta = std::move(back);
    }
    out.inputs = std::move(delta);
    return out;
}

struct SgdOptions {
    double lr = 1e-2;
};

/// Plain gradient descent on a flat parameter vector.
class Sgd {
public:
    explicit Sgd(SgdOptions options = {}) : options_(options) {}

    void step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grad);

    double lr() const { return options_.lr; }
    void set_lr(double lr) { options_.lr = lr; }

private:
    SgdOptions options_;
};

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    explicit Adam(AdamOptions options = {}) : options_(options) {}

    void step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grad);

    double lr() const { return options_.lr; }
    void set_lr(double lr) { options_.lr = lr; }

private:
    AdamOptions options_;
    Eigen::VectorXd m_, v_;
    long step_ = 0;
};

/// Applies one optimizer step to an Mlp from its gradient buffer.
template <typename Optimizer>
void optimizer_step(Optimizer& optimizer, Mlp<double>& mlp, const MlpGradient<double>& grad)
{
    Eigen::VectorXd params = mlp.parameters();
    optimizer.step(params, grad.flatten());
    mlp.set_parameters(params);
}

} // namespace nkf

#endif
