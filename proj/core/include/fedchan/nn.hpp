#pragma once

// Dense feed-forward networks: forward pass, reverse-mode gradients,
// optimizers, flattening and the scalar loss primitives shared by the
// link classifier and both generative path models.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace fedchan::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation : std::uint8_t { relu = 0, sigmoid = 1, tanh = 2, linear = 3, softmax = 4 };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

struct LayerSpec {
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
    Activation activation = Activation::linear;

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

using LayerSpecs = std::vector<LayerSpec>;

/// Builds `input -> hidden... -> output` with relu hidden layers and the
/// given output activation.
LayerSpecs make_mlp(std::size_t input_dim, std::span<const std::size_t> hidden,
                    std::size_t output_dim, Activation output_activation);

/// Throws StructuralError unless dims are positive, consecutive layers chain
/// and softmax appears only on the final layer.
void validate(std::span<const LayerSpec> specs);

std::size_t parameter_count(std::span<const LayerSpec> specs);

struct DenseLayer {
    Matrix weight;  // output_dim x input_dim
    Vector bias;    // output_dim
};

/// Parameters of a dense network; also used as the container for gradients
/// and optimizer moments since they share its shape.
struct ModelWeights {
    std::vector<DenseLayer> layers;

    std::size_t parameter_count() const;
    bool same_shape(const ModelWeights& other) const;
    void set_zero();
};

ModelWeights zero_weights(std::span<const LayerSpec> specs);

/// He-style uniform init: W ~ U(-sqrt(6/fan_in), sqrt(6/fan_in)), b = 0.
ModelWeights init_weights(std::span<const LayerSpec> specs, std::mt19937_64& rng);

/// Throws StructuralError naming the first layer whose shape disagrees.
void check_shapes(const ModelWeights& weights, std::span<const LayerSpec> specs);

/// Layer by layer, weight entries in column-major order then bias.
std::vector<double> flatten(const ModelWeights& weights);
void flatten_into(const ModelWeights& weights, std::span<double> out);
ModelWeights unflatten(std::span<const double> values, std::span<const LayerSpec> specs);

/// Activations kept by forward() for the backward pass. `activations[0]` is
/// the input batch, `activations[i + 1]` the output of layer i.
struct ForwardCache {
    std::vector<Matrix> activations;
};

/// Batched forward pass; each column of `input` is one sample.
Matrix forward(const ModelWeights& weights, std::span<const LayerSpec> specs,
               const Matrix& input, ForwardCache* cache = nullptr);

Vector forward(const ModelWeights& weights, std::span<const LayerSpec> specs,
               const Vector& input);

struct BackwardOptions {
    bool parameter_grads = true;  // false skips dW/db (input gradient only)
    Matrix* input_grad = nullptr; // receives dL/d(input) when set
};

/// Propagates `output_grad` = dL/d(output activations) back through the
/// network cached in `cache`. Gradients are summed over the batch columns.
ModelWeights backward(const ModelWeights& weights, std::span<const LayerSpec> specs,
                      const ForwardCache& cache, const Matrix& output_grad,
                      const BackwardOptions& options = {});

Vector softmax(const Vector& logits);

double sigmoid(double x);

/// KL(N(mu, diag(exp(logvar))) || N(0, I)) = -1/2 sum(1 + logvar - mu^2 - exp(logvar)).
double gaussian_kl(std::span<const double> mu, std::span<const double> logvar);
double gaussian_kl(const Vector& mu, const Vector& logvar);

inline constexpr double kProbabilityFloor = 1e-12;

/// -log(max(probs[label], 1e-12)).
double cross_entropy(std::span<const double> probs, std::size_t label);
double cross_entropy(const Vector& probs, std::size_t label);

/// Negative log-likelihood of x under N(mu, diag(exp(logvar))).
double gaussian_nll(const Vector& x, const Vector& mu, const Vector& logvar);

struct AdamState {
    ModelWeights first_moment;
    ModelWeights second_moment;
    std::uint64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

AdamState make_adam_state(const ModelWeights& weights);

/// One bias-corrected Adam update in place. Throws TrainingError naming the
/// layer index when a gradient entry is not finite.
void adam_step(ModelWeights& weights, const ModelWeights& grads, AdamState& state,
               double learning_rate);

/// Plain gradient step w <- w - lr * g.
void sgd_step(ModelWeights& weights, const ModelWeights& grads, double learning_rate);

enum class OptimizerKind { adam, sgd };

/// Optimizer bound to one network; sgd mode ignores the Adam moments.
class Optimizer {
public:
    Optimizer() = default;
    Optimizer(const ModelWeights& weights, OptimizerKind kind);

    void step(ModelWeights& weights, const ModelWeights& grads, double learning_rate);

    OptimizerKind kind() const { return kind_; }
    std::uint64_t steps() const { return steps_; }
    const AdamState& adam() const { return adam_; }

private:
    OptimizerKind kind_ = OptimizerKind::adam;
    AdamState adam_;
    std::uint64_t steps_ = 0;
};

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t epochs = 30;
    std::size_t batch_size = 100;
    std::uint64_t seed = 0;
    OptimizerKind optimizer = OptimizerKind::adam;

    void validate() const;
};

/// A named network: its layer list plus parameters.
struct Network {
    std::string name;
    LayerSpecs specs;
    ModelWeights weights;

    std::size_t parameter_count() const { return nn::parameter_count(specs); }
};

/// Throws TrainingError if any weight is not finite.
void check_finite(const ModelWeights& weights, std::string_view what);

}  // namespace fedchan::nn
