#include "fedchan/link_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedchan/errors.hpp"
#include "fedchan/rng.hpp"

namespace fedchan::link {

nn::LayerSpecs link_model_specs() {
    const std::array<std::size_t, 2> hidden = {25, 10};
    return nn::make_mlp(synth::kConditionDim, hidden, synth::kLinkStateCount, nn::Activation::softmax);
}

nn::TrainConfig default_link_config() {
    nn::TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.epochs = 30;
    cfg.batch_size = 100;
    return cfg;
}

LinkModel init_link_model(const synth::FeatureScaler& scaler, std::uint64_t seed) {
    LinkModel m;
    m.scaler = scaler;
    m.network.name = "link";
    m.network.specs = link_model_specs();
    Rng rng = make_rng(seed, {hash_tag("link-init")});
    m.network.weights = nn::init_weights(m.network.specs, rng);
    return m;
}

namespace {

nn::Matrix scaled_conditions(const synth::FeatureScaler& scaler, std::span<const synth::LinkRecord> records,
                             std::span<const std::size_t> idx) {
    nn::Matrix x(static_cast<Eigen::Index>(synth::kConditionDim), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j)
        x.col(static_cast<Eigen::Index>(j)) = scaler.scaled_condition(records[idx[j]].condition);
    return x;
}

double batch_loss(const nn::Matrix& probs, std::span<const synth::LinkRecord> records,
                  std::span<const std::size_t> idx) {
    double sum = 0.0;
    for (std::size_t j = 0; j < idx.size(); ++j) {
        const auto col = probs.col(static_cast<Eigen::Index>(j));
        sum += nn::cross_entropy(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())),
                                 static_cast<std::size_t>(records[idx[j]].state));
    }
    return sum;
}

}  // namespace

double mean_cross_entropy(const LinkModel& model, std::span<const synth::LinkRecord> records) {
    if (records.empty()) throw ArgumentError("mean_cross_entropy: no records");
    std::vector<std::size_t> idx(records.size());
    std::iota(idx.begin(), idx.end(), 0);
    const auto probs = nn::forward(model.network.weights, model.network.specs,
                                   scaled_conditions(model.scaler, records, idx));
    return batch_loss(probs, records, idx) / static_cast<double>(records.size());
}

double accuracy(const LinkModel& model, std::span<const synth::LinkRecord> records) {
    if (records.empty()) throw ArgumentError("accuracy: no records");
    std::vector<std::size_t> idx(records.size());
    std::iota(idx.begin(), idx.end(), 0);
    const auto probs = nn::forward(model.network.weights, model.network.specs,
                                   scaled_conditions(model.scaler, records, idx));
    std::size_t hits = 0;
    for (std::size_t j = 0; j < records.size(); ++j) {
        Eigen::Index best = 0;
        probs.col(static_cast<Eigen::Index>(j)).maxCoeff(&best);
        if (static_cast<synth::LinkState>(best) == records[j].state) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(records.size());
}

LinkTrainResult train_link_model(std::span<const synth::LinkRecord> train, const synth::FeatureScaler& scaler,
                                 const nn::TrainConfig& cfg) {
    cfg.validate();
    if (train.empty()) throw ArgumentError("train_link_model: empty training set");
    std::array<std::size_t, synth::kLinkStateCount> counts{};
    for (const auto& r : train) ++counts[static_cast<std::size_t>(r.state)];
    for (std::size_t s = 0; s < counts.size(); ++s)
        if (counts[s] == 0)
            throw TrainingError(std::string("train_link_model: no ") + synth::to_string(static_cast<synth::LinkState>(s)) +
                                " records; classifier would be degenerate");

    LinkTrainResult result;
    result.model = init_link_model(scaler, cfg.seed);
    auto& net = result.model.network;
    result.initial_loss = mean_cross_entropy(result.model, train);

    nn::Optimizer opt(net.weights, cfg.optimizer);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    nn::ForwardCache cache;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng = make_rng(cfg.seed, {hash_tag("link-epoch"), epoch});
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const auto idx = std::span<const std::size_t>(order).subspan(
                start, std::min(cfg.batch_size, order.size() - start));
            const auto x = scaled_conditions(scaler, train, idx);
            const auto probs = nn::forward(net.weights, net.specs, x, &cache);
            // d(mean CE)/d(probs); the softmax backward turns this into p - onehot.
            nn::Matrix grad = nn::Matrix::Zero(probs.rows(), probs.cols());
            const double inv = 1.0 / static_cast<double>(idx.size());
            for (std::size_t j = 0; j < idx.size(); ++j) {
                const auto label = static_cast<Eigen::Index>(train[idx[j]].state);
                const double p = probs(label, static_cast<Eigen::Index>(j));
                if (p > nn::kProbabilityFloor) grad(label, static_cast<Eigen::Index>(j)) = -inv / p;
            }
            const auto grads = nn::backward(net.weights, net.specs, cache, grad);
            opt.step(net.weights, grads, cfg.learning_rate);
        }
        result.epoch_loss.push_back(mean_cross_entropy(result.model, train));
        if (!std::isfinite(result.epoch_loss.back()))
            throw TrainingError("train_link_model: loss diverged at epoch " + std::to_string(epoch));
    }
    return result;
}

std::array<double, 3> predict_scaled(const nn::Network& network, std::span<const double> scaled_condition) {
    if (scaled_condition.size() != synth::kConditionDim)
        throw StructuralError("predict_link_state: condition has " + std::to_string(scaled_condition.size()) +
                              " entries, expected 5");
    nn::Vector x = Eigen::Map<const nn::Vector>(scaled_condition.data(), static_cast<Eigen::Index>(synth::kConditionDim));
    const auto p = nn::forward(network.weights, network.specs, x);
    return {p(0), p(1), p(2)};
}

std::array<double, 3> predict_link_state(const LinkModel& model, const synth::LinkCondition& condition) {
    const auto x = model.scaler.scaled_condition(condition);
    return predict_scaled(model.network, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

synth::LinkState argmax_state(const std::array<double, 3>& probs) {
    return static_cast<synth::LinkState>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

}  // namespace fedchan::link
