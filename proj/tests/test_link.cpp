#include <doctest.h>

#include <random>

#include "fedchan/errors.hpp"
#include "fedchan/link_model.hpp"

using namespace fedchan;
using synth::LinkState;

namespace {

// State decided by 2-D distance alone: LOS below 300 m, NLOS to 600 m, NoLink beyond.
std::vector<synth::LinkRecord> separable_set(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-900.0, 900.0);
    std::vector<synth::LinkRecord> out;
    while (out.size() < n) {
        synth::LinkRecord r;
        r.condition.dx = u(rng);
        r.condition.dy = u(rng);
        r.condition.dz = 50.0;
        r.condition.gnb = out.size() % 2 ? synth::GnbType::aerial : synth::GnbType::terrestrial;
        const double d = r.condition.distance_2d();
        if (std::abs(d - 300.0) < 25.0 || std::abs(d - 600.0) < 25.0) continue;  // margin around each boundary
        r.state = d < 300.0 ? LinkState::los : d < 600.0 ? LinkState::nlos : LinkState::no_link;
        out.push_back(r);
    }
    return out;
}

}  // namespace

TEST_SUITE("link") {

TEST_CASE("architecture and defaults") {
    const auto specs = link::link_model_specs();
    REQUIRE(specs.size() == 3);
    CHECK(specs[0].input_dim == 5);
    CHECK(specs[0].output_dim == 25);
    CHECK(specs[1].output_dim == 10);
    CHECK(specs[2].output_dim == 3);
    CHECK(specs[2].activation == nn::Activation::softmax);
    const auto cfg = link::default_link_config();
    CHECK(cfg.epochs == 30);
    CHECK(cfg.learning_rate == 1e-3);
    CHECK(cfg.batch_size == 100);
    CHECK(cfg.optimizer == nn::OptimizerKind::adam);
}

TEST_CASE("untrained network at zero input is uniform") {
    const auto m = link::init_link_model(synth::FeatureScaler{}, 3);
    const std::array<double, 5> zero{};
    for (double p : link::predict_scaled(m.network, zero)) {
        CHECK(p >= 0.2);
        CHECK(p <= 0.5);
    }
}

TEST_CASE("predictions lie on the simplex and reject bad lengths") {
    const auto m = link::init_link_model(synth::FeatureScaler{}, 4);
    std::mt19937_64 rng(6);
    std::normal_distribution<double> n(0.0, 2.0);
    for (int i = 0; i < 1000; ++i) {
        std::array<double, 5> x{};
        for (auto& v : x) v = n(rng);
        const auto p = link::predict_scaled(m.network, x);
        CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0).epsilon(1e-9));
        for (double q : p) CHECK((q >= 0.0 && q <= 1.0));
        CHECK(link::predict_scaled(m.network, x) == p);
    }
    const std::array<double, 4> short_input{};
    CHECK_THROWS_AS(link::predict_scaled(m.network, short_input), StructuralError);
}

TEST_CASE("separable toy set is learned to 99% accuracy") {
    const auto train = separable_set(3000, 1);
    const auto test = separable_set(1000, 2);
    const auto scaler = synth::FeatureScaler::fit(train);
    auto cfg = link::default_link_config();
    cfg.epochs = 200;
    cfg.seed = 5;
    const auto r = link::train_link_model(train, scaler, cfg);
    CHECK(link::accuracy(r.model, test) >= 0.99);
}

TEST_CASE("training lowers the loss, stays finite and is deterministic") {
    auto p = synth::default_profiles()[0];
    const auto ds = synth::generate_city(p, 1500);
    const auto scaler = synth::FeatureScaler::fit(ds.records);
    auto cfg = link::default_link_config();
    cfg.seed = 77;
    const auto a = link::train_link_model(ds.records, scaler, cfg);
    const auto b = link::train_link_model(ds.records, scaler, cfg);
    REQUIRE(a.epoch_loss.size() == 30);
    for (double l : a.epoch_loss) CHECK(std::isfinite(l));
    CHECK(a.epoch_loss.back() < a.initial_loss);
    CHECK(a.epoch_loss == b.epoch_loss);
    CHECK(nn::flatten(a.model.network.weights) == nn::flatten(b.model.network.weights));
    CHECK(link::mean_cross_entropy(a.model, ds.records) == doctest::Approx(a.epoch_loss.back()));
}

TEST_CASE("trained model puts more NoLink mass far away than close by") {
    auto p = synth::default_profiles()[2];
    const auto ds = synth::generate_city(p, 4000);
    const auto scaler = synth::FeatureScaler::fit(ds.records);
    auto cfg = link::default_link_config();
    cfg.seed = 12;
    const auto r = link::train_link_model(ds.records, scaler, cfg);
    synth::LinkCondition near, far;
    near.dx = 0.1 * p.nolink_range;
    far.dx = 10.0 * p.nolink_range;
    near.dz = far.dz = 50.0;
    const auto pn = link::predict_link_state(r.model, near);
    const auto pf = link::predict_link_state(r.model, far);
    CHECK(pf[0] > pn[0]);
    CHECK(link::argmax_state(pf) == LinkState::no_link);
}

TEST_CASE("single-class and empty training sets are rejected") {
    auto only_los = separable_set(200, 3);
    for (auto& r : only_los) r.state = LinkState::los;
    const auto scaler = synth::FeatureScaler::fit(only_los);
    CHECK_THROWS_AS(link::train_link_model(only_los, scaler, link::default_link_config()), TrainingError);
    CHECK_THROWS_AS(link::train_link_model({}, scaler, link::default_link_config()), ArgumentError);
}

TEST_CASE("argmax picks the largest probability") {
    CHECK(link::argmax_state({0.2, 0.5, 0.3}) == LinkState::los);
    CHECK(link::argmax_state({0.6, 0.1, 0.3}) == LinkState::no_link);
    CHECK(link::argmax_state({0.1, 0.1, 0.8}) == LinkState::nlos);
}

}  // TEST_SUITE
