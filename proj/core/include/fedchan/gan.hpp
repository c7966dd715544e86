#pragma once

// Conditional GAN path model. The generator maps (noise, condition) to a
// per-dimension Gaussian over the path vector; a sample drawn from it is
// scored by the discriminator together with the condition.
//
// Losses (probabilities floored at 1e-12 inside every log):
//   loss_D = -mean log D(real) - mean log(1 - D(fake))
//   loss_G = -mean log D(fake)            (non-saturating generator loss)

#include <cstdint>
#include <vector>

#include "fedchan/nn.hpp"
#include "fedchan/path_data.hpp"
#include "fedchan/synth.hpp"

namespace fedchan::gan {

struct GanArch {
    std::size_t data_dim = synth::kPathDim;
    std::size_t cond_dim = synth::kConditionDim;
    std::size_t noise_dim = 20;
    std::vector<std::size_t> generator_hidden = {280, 560, 1120};
    std::vector<std::size_t> discriminator_hidden = {1120, 560, 280};
};

/// (noise + cond) -> hidden -> 2 * data, linear output (mean, log-variance).
nn::LayerSpecs generator_specs(const GanArch& arch);
/// (data + cond) -> hidden -> 1, sigmoid output.
nn::LayerSpecs discriminator_specs(const GanArch& arch);

struct GanParams {
    GanArch arch;
    nn::Network generator;
    nn::Network discriminator;

    std::vector<nn::Network> networks() const { return {generator, discriminator}; }
};

GanParams init_gan(const GanArch& arch, std::uint64_t seed);
GanParams zero_gan(const GanArch& arch);
void check_contract(const GanParams& params);

/// Generator noise: `z` feeds the network, `eps` draws the output sample.
struct GanNoise {
    nn::Matrix z;    // noise_dim x B
    nn::Matrix eps;  // data_dim x B
};

GanNoise draw_noise(const GanArch& arch, std::size_t batch, Rng& rng);

struct GeneratorOutput {
    nn::Vector mu;
    nn::Vector logvar;  // clamped to [-10, 10]
};

GeneratorOutput generator_forward(const GanParams& params, const nn::Vector& z, const nn::Vector& scaled_condition);

/// Samples mu + exp(logvar / 2) * eps, one column per condition.
nn::Matrix generate(const GanParams& params, const nn::Matrix& scaled_conditions, const GanNoise& noise);

/// Probability in (0, 1) that (path, condition) is real.
double discriminator_forward(const GanParams& params, const nn::Vector& scaled_path,
                             const nn::Vector& scaled_condition);

struct GanLosses {
    double discriminator = 0.0;
    double generator = 0.0;
};

/// Both losses at fixed parameters; fakes use the real batch's conditions.
GanLosses gan_losses(const GanParams& params, const gen::PathDataset& real, const GanNoise& noise);

/// loss_D and its gradient w.r.t. the discriminator parameters.
double discriminator_loss(const GanParams& params, const gen::PathDataset& real, const GanNoise& noise,
                          nn::ModelWeights* grad = nullptr);
/// loss_G and its gradient w.r.t. the generator parameters (through D).
double generator_loss(const GanParams& params, const nn::Matrix& scaled_conditions, const GanNoise& noise,
                      nn::ModelWeights* grad = nullptr);

/// Defaults for local updates: 5 epochs, lr 1e-4, batch 100, Adam.
nn::TrainConfig default_gan_config();

struct GanEpochStats {
    double discriminator_loss = 0.0;
    double generator_loss = 0.0;
};

/// Alternates one discriminator step and one generator step per minibatch.
/// Optimizer state persists across train() calls; epoch e draws its shuffle
/// and noise from (seed, e).
class GanTrainer {
public:
    GanTrainer(GanParams params, nn::TrainConfig cfg);

    const GanParams& params() const { return params_; }
    void set_params(const GanParams& params);

    std::vector<GanEpochStats> train(const gen::PathDataset& data, std::size_t epochs);

    std::uint64_t discriminator_steps() const { return d_opt_.steps(); }
    std::uint64_t generator_steps() const { return g_opt_.steps(); }
    std::size_t epochs_done() const { return epochs_done_; }

    /// One alternating D-step then G-step on `batch`; exposed for tests.
    GanLosses step(const gen::PathDataset& batch, const GanNoise& noise);
    /// Only the discriminator update of step().
    double discriminator_step(const gen::PathDataset& batch, const GanNoise& noise);
    /// Only the generator update of step().
    double generator_step(const nn::Matrix& scaled_conditions, const GanNoise& noise);

private:
    GanParams params_;
    nn::TrainConfig cfg_;
    nn::Optimizer g_opt_;
    nn::Optimizer d_opt_;
    std::size_t epochs_done_ = 0;
};

GanParams train_local_gan(const GanParams& params, const gen::PathDataset& data, const nn::TrainConfig& cfg);

nn::Matrix sample_scaled(const GanParams& params, const nn::Matrix& scaled_conditions, Rng& rng);

synth::PathVector sample_paths_gan(const GanParams& params, const synth::FeatureScaler& scaler,
                                   const synth::LinkCondition& condition, Rng& rng);

}  // namespace fedchan::gan
