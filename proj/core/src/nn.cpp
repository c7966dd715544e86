#include "fedchan/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fedchan/errors.hpp"

namespace fedchan::nn {

std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
        case Activation::tanh: return "tanh";
        case Activation::linear: return "linear";
        case Activation::softmax: return "softmax";
    }
    return "unknown";
}

Activation activation_from_string(std::string_view name) {
    for (auto a : {Activation::relu, Activation::sigmoid, Activation::tanh, Activation::linear,
                   Activation::softmax}) {
        if (to_string(a) == name) return a;
    }
    throw ParseError("unknown activation '" + std::string(name) + "'");
}

LayerSpecs make_mlp(std::size_t input_dim, std::span<const std::size_t> hidden,
                    std::size_t output_dim, Activation output_activation) {
    LayerSpecs specs;
    std::size_t in = input_dim;
    for (std::size_t h : hidden) {
        specs.push_back({in, h, Activation::relu});
        in = h;
    }
    specs.push_back({in, output_dim, output_activation});
    validate(specs);
    return specs;
}

void validate(std::span<const LayerSpec> specs) {
    if (specs.empty()) throw StructuralError("network has no layers");
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto& s = specs[i];
        if (s.input_dim == 0 || s.output_dim == 0)
            throw StructuralError("layer " + std::to_string(i) + ": dimensions must be positive");
        if (i > 0 && specs[i - 1].output_dim != s.input_dim)
            throw StructuralError("layer " + std::to_string(i) + ": input_dim " +
                                  std::to_string(s.input_dim) + " does not match previous output_dim " +
                                  std::to_string(specs[i - 1].output_dim));
        if (s.activation == Activation::softmax && i + 1 != specs.size())
            throw StructuralError("layer " + std::to_string(i) + ": softmax only allowed on the final layer");
    }
}

std::size_t parameter_count(std::span<const LayerSpec> specs) {
    std::size_t n = 0;
    for (const auto& s : specs) n += s.output_dim * s.input_dim + s.output_dim;
    return n;
}

std::size_t ModelWeights::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
}

bool ModelWeights::same_shape(const ModelWeights& other) const {
    if (layers.size() != other.layers.size()) return false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].weight.rows() != other.layers[i].weight.rows() ||
            layers[i].weight.cols() != other.layers[i].weight.cols() ||
            layers[i].bias.size() != other.layers[i].bias.size())
            return false;
    }
    return true;
}

void ModelWeights::set_zero() {
    for (auto& l : layers) {
        l.weight.setZero();
        l.bias.setZero();
    }
}

ModelWeights zero_weights(std::span<const LayerSpec> specs) {
    validate(specs);
    ModelWeights w;
    w.layers.reserve(specs.size());
    for (const auto& s : specs) {
        w.layers.push_back({Matrix::Zero(static_cast<Eigen::Index>(s.output_dim),
                                         static_cast<Eigen::Index>(s.input_dim)),
                            Vector::Zero(static_cast<Eigen::Index>(s.output_dim))});
    }
    return w;
}

ModelWeights init_weights(std::span<const LayerSpec> specs, std::mt19937_64& rng) {
    ModelWeights w = zero_weights(specs);
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const double limit = std::sqrt(6.0 / static_cast<double>(specs[i].input_dim));
        std::uniform_real_distribution<double> dist(-limit, limit);
        auto& m = w.layers[i].weight;
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = dist(rng);
    }
    return w;
}

void check_shapes(const ModelWeights& weights, std::span<const LayerSpec> specs) {
    if (weights.layers.size() != specs.size())
        throw StructuralError("weights have " + std::to_string(weights.layers.size()) +
                              " layers, specs declare " + std::to_string(specs.size()));
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto& l = weights.layers[i];
        if (static_cast<std::size_t>(l.weight.rows()) != specs[i].output_dim ||
            static_cast<std::size_t>(l.weight.cols()) != specs[i].input_dim ||
            static_cast<std::size_t>(l.bias.size()) != specs[i].output_dim)
            throw StructuralError("layer " + std::to_string(i) + ": weight shape " +
                                  std::to_string(l.weight.rows()) + "x" + std::to_string(l.weight.cols()) +
                                  " does not match spec " + std::to_string(specs[i].output_dim) + "x" +
                                  std::to_string(specs[i].input_dim));
    }
}

void flatten_into(const ModelWeights& weights, std::span<double> out) {
    if (out.size() != weights.parameter_count())
        throw StructuralError("flatten target has length " + std::to_string(out.size()) + ", expected " +
                              std::to_string(weights.parameter_count()));
    std::size_t pos = 0;
    for (const auto& l : weights.layers) {
        std::copy_n(l.weight.data(), l.weight.size(), out.data() + pos);
        pos += static_cast<std::size_t>(l.weight.size());
        std::copy_n(l.bias.data(), l.bias.size(), out.data() + pos);
        pos += static_cast<std::size_t>(l.bias.size());
    }
}

std::vector<double> flatten(const ModelWeights& weights) {
    std::vector<double> out(weights.parameter_count());
    flatten_into(weights, out);
    return out;
}

ModelWeights unflatten(std::span<const double> values, std::span<const LayerSpec> specs) {
    const std::size_t expected = parameter_count(specs);
    if (values.size() != expected)
        throw StructuralError("flattened length " + std::to_string(values.size()) +
                              " does not match parameter count " + std::to_string(expected));
    ModelWeights w = zero_weights(specs);
    std::size_t pos = 0;
    for (auto& l : w.layers) {
        std::copy_n(values.data() + pos, l.weight.size(), l.weight.data());
        pos += static_cast<std::size_t>(l.weight.size());
        std::copy_n(values.data() + pos, l.bias.size(), l.bias.data());
        pos += static_cast<std::size_t>(l.bias.size());
    }
    return w;
}

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

namespace {

void apply_activation(Matrix& z, Activation a) {
    switch (a) {
        case Activation::relu: z = z.cwiseMax(0.0); break;
        case Activation::sigmoid: z = z.unaryExpr([](double v) { return sigmoid(v); }); break;
        case Activation::tanh: z = z.array().tanh().matrix(); break;
        case Activation::linear: break;
        case Activation::softmax:
            for (Eigen::Index c = 0; c < z.cols(); ++c) {
                auto col = z.col(c);
                const double m = col.maxCoeff();
                col = (col.array() - m).exp().matrix();
                col /= col.sum();
            }
            break;
    }
}

// dL/dz from dL/da, given the activation output a.
Matrix activation_backward(const Matrix& a, const Matrix& grad, Activation act) {
    switch (act) {
        case Activation::relu: return (a.array() > 0.0).select(grad, 0.0);
        case Activation::sigmoid: return (grad.array() * a.array() * (1.0 - a.array())).matrix();
        case Activation::tanh: return (grad.array() * (1.0 - a.array().square())).matrix();
        case Activation::linear: return grad;
        case Activation::softmax: {
            Matrix out(a.rows(), a.cols());
            for (Eigen::Index c = 0; c < a.cols(); ++c) {
                const double dot = a.col(c).dot(grad.col(c));
                out.col(c) = (a.col(c).array() * (grad.col(c).array() - dot)).matrix();
            }
            return out;
        }
    }
    return grad;
}

}  // namespace

Matrix forward(const ModelWeights& weights, std::span<const LayerSpec> specs, const Matrix& input,
               ForwardCache* cache) {
    check_shapes(weights, specs);
    if (static_cast<std::size_t>(input.rows()) != specs.front().input_dim)
        throw StructuralError("layer 0: input has " + std::to_string(input.rows()) + " rows, expected " +
                              std::to_string(specs.front().input_dim));
    if (cache) {
        cache->activations.resize(specs.size() + 1);
        cache->activations[0] = input;
    }
    Matrix current = input;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto& l = weights.layers[i];
        Matrix z(l.weight.rows(), current.cols());
        z.noalias() = l.weight * current;
        z.colwise() += l.bias;
        apply_activation(z, specs[i].activation);
        current = std::move(z);
        if (cache) cache->activations[i + 1] = current;
    }
    return current;
}

Vector forward(const ModelWeights& weights, std::span<const LayerSpec> specs, const Vector& input) {
    Matrix in = input;
    return forward(weights, specs, in).col(0);
}

ModelWeights backward(const ModelWeights& weights, std::span<const LayerSpec> specs,
                      const ForwardCache& cache, const Matrix& output_grad,
                      const BackwardOptions& options) {
    check_shapes(weights, specs);
    if (cache.activations.size() != specs.size() + 1)
        throw StructuralError("backward called without a matching forward cache");
    const Matrix& out = cache.activations.back();
    if (output_grad.rows() != out.rows() || output_grad.cols() != out.cols())
        throw StructuralError("layer " + std::to_string(specs.size() - 1) + ": output gradient is " +
                              std::to_string(output_grad.rows()) + "x" + std::to_string(output_grad.cols()) +
                              ", expected " + std::to_string(out.rows()) + "x" + std::to_string(out.cols()));

    ModelWeights grads;
    if (options.parameter_grads) grads = zero_weights(specs);

    Matrix grad = output_grad;
    for (std::size_t k = specs.size(); k-- > 0;) {
        Matrix dz = activation_backward(cache.activations[k + 1], grad, specs[k].activation);
        const Matrix& prev = cache.activations[k];
        if (options.parameter_grads) {
            grads.layers[k].weight.noalias() = dz * prev.transpose();
            grads.layers[k].bias = dz.rowwise().sum();
        }
        if (k > 0 || options.input_grad) {
            Matrix g(prev.rows(), prev.cols());
            g.noalias() = weights.layers[k].weight.transpose() * dz;
            grad = std::move(g);
        }
    }
    if (options.input_grad) *options.input_grad = std::move(grad);
    return grads;
}

Vector softmax(const Vector& logits) {
    Matrix m = logits;
    apply_activation(m, Activation::softmax);
    return m.col(0);
}

double gaussian_kl(std::span<const double> mu, std::span<const double> logvar) {
    if (mu.size() != logvar.size())
        throw StructuralError("gaussian_kl: mu has " + std::to_string(mu.size()) + " entries, logvar " +
                              std::to_string(logvar.size()));
    double sum = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        if (!std::isfinite(mu[i]) || !std::isfinite(logvar[i]))
            throw TrainingError("gaussian_kl: non-finite input at index " + std::to_string(i));
        // exp(lv) - lv - 1 >= 0 holds termwise; expm1 keeps it accurate near 0.
        sum += mu[i] * mu[i] + (std::expm1(logvar[i]) - logvar[i]);
    }
    return 0.5 * sum;
}

double gaussian_kl(const Vector& mu, const Vector& logvar) {
    return gaussian_kl(std::span<const double>(mu.data(), static_cast<std::size_t>(mu.size())),
                       std::span<const double>(logvar.data(), static_cast<std::size_t>(logvar.size())));
}

double cross_entropy(std::span<const double> probs, std::size_t label) {
    if (label >= probs.size())
        throw ArgumentError("cross_entropy: label " + std::to_string(label) + " out of range for " +
                            std::to_string(probs.size()) + " classes");
    return -std::log(std::max(probs[label], kProbabilityFloor));
}

double cross_entropy(const Vector& probs, std::size_t label) {
    return cross_entropy(std::span<const double>(probs.data(), static_cast<std::size_t>(probs.size())), label);
}

double gaussian_nll(const Vector& x, const Vector& mu, const Vector& logvar) {
    if (x.size() != mu.size() || x.size() != logvar.size())
        throw StructuralError("gaussian_nll: length mismatch");
    const double log2pi = std::log(2.0 * std::numbers::pi);
    return 0.5 * (log2pi * static_cast<double>(x.size()) + logvar.sum() +
                  ((x - mu).array().square() * (-logvar.array()).exp()).sum());
}

AdamState make_adam_state(const ModelWeights& weights) {
    AdamState s;
    s.first_moment = weights;
    s.first_moment.set_zero();
    s.second_moment = s.first_moment;
    return s;
}

namespace {

void check_grads(const ModelWeights& weights, const ModelWeights& grads) {
    if (!weights.same_shape(grads)) throw StructuralError("gradient shape does not match weights");
    for (std::size_t i = 0; i < grads.layers.size(); ++i) {
        if (!grads.layers[i].weight.allFinite() || !grads.layers[i].bias.allFinite())
            throw TrainingError("non-finite gradient in layer " + std::to_string(i));
    }
}

}  // namespace

void adam_step(ModelWeights& weights, const ModelWeights& grads, AdamState& state, double learning_rate) {
    check_grads(weights, grads);
    if (!state.first_moment.same_shape(weights) || !state.second_moment.same_shape(weights))
        throw StructuralError("Adam moments do not conform to weights");
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    const double b1 = state.beta1, b2 = state.beta2, eps = state.epsilon;

    auto update = [&](auto& w, const auto& g, auto& m, auto& v) {
        m.array() = b1 * m.array() + (1.0 - b1) * g.array();
        v.array() = b2 * v.array() + (1.0 - b2) * g.array().square();
        w.array() -= learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    };
    for (std::size_t i = 0; i < weights.layers.size(); ++i) {
        update(weights.layers[i].weight, grads.layers[i].weight, state.first_moment.layers[i].weight,
               state.second_moment.layers[i].weight);
        update(weights.layers[i].bias, grads.layers[i].bias, state.first_moment.layers[i].bias,
               state.second_moment.layers[i].bias);
    }
}

void sgd_step(ModelWeights& weights, const ModelWeights& grads, double learning_rate) {
    check_grads(weights, grads);
    for (std::size_t i = 0; i < weights.layers.size(); ++i) {
        weights.layers[i].weight -= learning_rate * grads.layers[i].weight;
        weights.layers[i].bias -= learning_rate * grads.layers[i].bias;
    }
}

Optimizer::Optimizer(const ModelWeights& weights, OptimizerKind kind) : kind_(kind) {
    if (kind_ == OptimizerKind::adam) adam_ = make_adam_state(weights);
}

void Optimizer::step(ModelWeights& weights, const ModelWeights& grads, double learning_rate) {
    if (kind_ == OptimizerKind::adam)
        adam_step(weights, grads, adam_, learning_rate);
    else
        sgd_step(weights, grads, learning_rate);
    ++steps_;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw ArgumentError("learning rate must be positive");
    if (batch_size == 0) throw ArgumentError("batch size must be at least 1");
}

void check_finite(const ModelWeights& weights, std::string_view what) {
    for (std::size_t i = 0; i < weights.layers.size(); ++i) {
        if (!weights.layers[i].weight.allFinite() || !weights.layers[i].bias.allFinite())
            throw TrainingError(std::string(what) + ": non-finite parameter in layer " + std::to_string(i));
    }
}

}  // namespace fedchan::nn
