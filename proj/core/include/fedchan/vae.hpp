#pragma once

// Conditional VAE path model. The encoder maps (paths, condition) to the
// mean and log-variance of a diagonal Gaussian latent; the decoder maps
// (latent, condition) to a per-dimension Gaussian over the 120 path values.
// Local objective: Gaussian NLL reconstruction + KL(q(z|x) || N(0, I)).

#include <cstdint>
#include <vector>

#include "fedchan/nn.hpp"
#include "fedchan/path_data.hpp"
#include "fedchan/synth.hpp"

namespace fedchan::vae {

struct VaeArch {
    std::size_t data_dim = synth::kPathDim;
    std::size_t cond_dim = synth::kConditionDim;
    std::size_t latent_dim = 20;
    std::vector<std::size_t> encoder_hidden = {200, 80};
    std::vector<std::size_t> decoder_hidden = {80, 200};
};

/// (data + cond) -> hidden -> 2 * latent, linear output.
nn::LayerSpecs encoder_specs(const VaeArch& arch);
/// (latent + cond) -> hidden -> 2 * data, linear output.
nn::LayerSpecs decoder_specs(const VaeArch& arch);

struct VaeParams {
    VaeArch arch;
    nn::Network encoder;
    nn::Network decoder;

    std::vector<nn::Network> networks() const { return {encoder, decoder}; }
};

VaeParams init_vae(const VaeArch& arch, std::uint64_t seed);
VaeParams zero_vae(const VaeArch& arch);
/// Throws StructuralError unless both networks match `params.arch`.
void check_contract(const VaeParams& params);

struct LatentGaussian {
    nn::Vector mu;
    nn::Vector logvar;
};

LatentGaussian encode(const VaeParams& params, const nn::Vector& scaled_paths, const nn::Vector& scaled_condition);

/// z = mu + exp(logvar / 2) * noise.
nn::Vector reparameterize(const nn::Vector& mu, const nn::Vector& logvar, const nn::Vector& noise);

/// out_logvar is clamped to [-10, 10].
LatentGaussian decode(const VaeParams& params, const nn::Vector& z, const nn::Vector& scaled_condition);

struct VaeLoss {
    double reconstruction = 0.0;  // batch mean Gaussian NLL
    double kl = 0.0;              // batch mean KL to the prior
    double total() const { return reconstruction + kl; }
};

struct VaeGradients {
    nn::ModelWeights encoder;
    nn::ModelWeights decoder;
};

/// `noise` is latent_dim x B standard-normal reparameterization noise.
VaeLoss vae_loss(const VaeParams& params, const gen::PathDataset& batch, const nn::Matrix& noise,
                 VaeGradients* grads = nullptr);
VaeLoss vae_loss(const VaeParams& params, const gen::PathDataset& batch, Rng& rng);

/// Defaults for local updates: 5 epochs, lr 1e-4, batch 100, Adam.
nn::TrainConfig default_vae_config();

/// Minibatch trainer that keeps its optimizer state across calls, so a run
/// split into several train() calls follows the same trajectory as one call.
/// Epoch e draws its shuffle and noise from (seed, e).
class VaeTrainer {
public:
    VaeTrainer(VaeParams params, nn::TrainConfig cfg);

    const VaeParams& params() const { return params_; }
    /// Replaces the parameters; optimizer moments are kept.
    void set_params(const VaeParams& params);

    /// Runs `epochs` epochs; returns the mean minibatch loss of each.
    std::vector<double> train(const gen::PathDataset& data, std::size_t epochs);

    std::size_t epochs_done() const { return epochs_done_; }
    std::uint64_t steps() const { return encoder_opt_.steps(); }

private:
    VaeParams params_;
    nn::TrainConfig cfg_;
    nn::Optimizer encoder_opt_;
    nn::Optimizer decoder_opt_;
    std::size_t epochs_done_ = 0;
};

/// cfg.epochs epochs of minibatch training from `params`.
VaeParams train_local_vae(const VaeParams& params, const gen::PathDataset& data, const nn::TrainConfig& cfg);

/// z ~ N(0, I); decode; x ~ N(out_mu, exp(out_logvar)); one column per condition.
nn::Matrix sample_scaled(const VaeParams& params, const nn::Matrix& scaled_conditions, Rng& rng);

/// Unscaled path vector with path losses clamped to 200 dB.
synth::PathVector sample_paths_vae(const VaeParams& params, const synth::FeatureScaler& scaler,
                                   const synth::LinkCondition& condition, Rng& rng);

}  // namespace fedchan::vae
