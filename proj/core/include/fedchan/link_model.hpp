#pragma once

// First-stage classifier: link state (NoLink / LOS / NLOS) from the scaled
// 5-dim link condition. Trained per city and never federated.

#include <array>
#include <span>
#include <vector>

#include "fedchan/nn.hpp"
#include "fedchan/synth.hpp"

namespace fedchan::link {

/// 5 -> [25, 10] -> 3 with softmax output.
nn::LayerSpecs link_model_specs();

struct LinkModel {
    nn::Network network;
    synth::FeatureScaler scaler;  // only the condition dims are used
};

/// Defaults: 30 epochs, lr 1e-3, batch 100, Adam.
nn::TrainConfig default_link_config();

LinkModel init_link_model(const synth::FeatureScaler& scaler, std::uint64_t seed);

struct LinkTrainResult {
    LinkModel model;
    std::vector<double> epoch_loss;  // mean cross-entropy per epoch, after the update
    double initial_loss = 0.0;       // mean cross-entropy before training
};

/// Throws ArgumentError on an empty set and TrainingError when a state is missing.
LinkTrainResult train_link_model(std::span<const synth::LinkRecord> train, const synth::FeatureScaler& scaler,
                                 const nn::TrainConfig& cfg);

/// Probability triple indexed by LinkState.
std::array<double, 3> predict_link_state(const LinkModel& model, const synth::LinkCondition& condition);
/// Same on an already-scaled 5-vector; throws StructuralError on bad length.
std::array<double, 3> predict_scaled(const nn::Network& network, std::span<const double> scaled_condition);

synth::LinkState argmax_state(const std::array<double, 3>& probs);

double mean_cross_entropy(const LinkModel& model, std::span<const synth::LinkRecord> records);
double accuracy(const LinkModel& model, std::span<const synth::LinkRecord> records);

}  // namespace fedchan::link
