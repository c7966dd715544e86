#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fedchan/errors.hpp"
#include "fedchan/path_data.hpp"
#include "fedchan/rng.hpp"
#include "fedchan/vae.hpp"
#include "support.hpp"

using namespace fedchan;
using nn::Matrix;
using nn::Vector;

namespace {

vae::VaeArch small_arch() {
    vae::VaeArch a;
    a.latent_dim = 4;
    a.encoder_hidden = {12, 8};
    a.decoder_hidden = {8, 12};
    return a;
}

gen::PathDataset random_batch(const vae::VaeArch& a, Eigen::Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    gen::PathDataset d;
    d.paths = test::random_matrix(static_cast<Eigen::Index>(a.data_dim), n, rng, 0.5);
    d.conditions = test::random_matrix(static_cast<Eigen::Index>(a.cond_dim), n, rng, 0.5);
    return d;
}

}  // namespace

TEST_SUITE("vae") {

TEST_CASE("default widths and output split") {
    const vae::VaeArch a;
    const auto enc = vae::encoder_specs(a);
    const auto dec = vae::decoder_specs(a);
    CHECK(enc.front().input_dim == 125);
    CHECK(enc.back().output_dim == 40);
    CHECK(dec.front().input_dim == 25);
    CHECK(dec.back().output_dim == 240);
    CHECK(nn::parameter_count(enc) == 44520);

    const auto cfg = vae::default_vae_config();
    CHECK(cfg.epochs == 5);
    CHECK(cfg.batch_size == 100);
    CHECK(cfg.learning_rate == 1e-4);
    CHECK(cfg.optimizer == nn::OptimizerKind::adam);
}

TEST_CASE("zero weights give zero mean and zero log-variance") {
    const auto p = vae::zero_vae(vae::VaeArch{});
    const auto q = vae::encode(p, Vector::Constant(120, 0.3), Vector::Constant(5, -0.2));
    CHECK(q.mu.size() == 20);
    CHECK(q.logvar.size() == 20);
    CHECK(q.mu.isZero());
    CHECK(q.logvar.isZero());
    const auto out = vae::decode(p, Vector::Constant(20, 1.0), Vector::Constant(5, 0.5));
    CHECK(out.mu.size() == 120);
    CHECK(out.mu.isZero());
    CHECK(out.logvar.isZero());
}

TEST_CASE("first half of the encoder output is the mean") {
    auto p = vae::zero_vae(small_arch());
    auto& last = p.encoder.weights.layers.back();
    for (Eigen::Index i = 0; i < last.bias.size(); ++i) last.bias(i) = static_cast<double>(i);
    const auto q = vae::encode(p, Vector::Zero(120), Vector::Zero(5));
    CHECK(q.mu == (Vector(4) << 0, 1, 2, 3).finished());
    CHECK(q.logvar == (Vector(4) << 4, 5, 6, 7).finished());
}

TEST_CASE("decoder log-variance is clamped to [-10, 10]") {
    auto p = vae::zero_vae(small_arch());
    auto& b = p.decoder.weights.layers.back().bias;
    b.segment(120, 120).setConstant(50.0);
    b(120 + 1) = -50.0;
    b(120 + 2) = 3.5;
    const auto out = vae::decode(p, Vector::Zero(4), Vector::Zero(5));
    CHECK(out.logvar(0) == 10.0);
    CHECK(out.logvar(1) == -10.0);
    CHECK(out.logvar(2) == 3.5);
}

TEST_CASE("reparameterization") {
    const Vector mu = (Vector(3) << 1.5, -2.0, 0.25).finished();
    const Vector noise = (Vector(3) << 0.3, -1.2, 2.0).finished();
    CHECK((vae::reparameterize(mu, Vector::Constant(3, -50.0), noise) - mu).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(vae::reparameterize(Vector::Zero(3), Vector::Zero(3), noise) == noise);
    CHECK(vae::reparameterize(mu, Vector::Constant(3, std::log(4.0)), noise).isApprox(mu + 2.0 * noise, 1e-15));
    CHECK_THROWS_AS(vae::reparameterize(mu, Vector::Zero(2), noise), StructuralError);

    Rng rng(9);
    std::normal_distribution<double> n;
    const Vector ones = Vector::Ones(20);
    Vector sum = Vector::Zero(20);
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
        Vector e(20);
        for (auto& v : e) v = n(rng);
        sum += vae::reparameterize(ones, Vector::Zero(20), e);
    }
    CHECK(((sum / draws) - ones).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("loss at the perfect-reconstruction limit is 60 ln(2 pi) per sample") {
    // Decoder output pinned to (x, 0) by biases; encoder pinned to the prior.
    vae::VaeArch a = small_arch();
    auto p = vae::zero_vae(a);
    gen::PathDataset batch;
    batch.paths = Matrix::Constant(120, 3, 0.0);
    batch.paths.col(0).setConstant(0.4);
    batch.paths.col(1).setConstant(0.4);
    batch.paths.col(2).setConstant(0.4);
    batch.conditions = Matrix::Zero(5, 3);
    p.decoder.weights.layers.back().bias.head(120).setConstant(0.4);
    Rng rng(1);
    const auto loss = vae::vae_loss(p, batch, rng);
    CHECK(loss.kl == 0.0);
    CHECK(loss.reconstruction == doctest::Approx(60.0 * std::log(2.0 * std::numbers::pi)).epsilon(1e-12));
    CHECK(loss.total() == doctest::Approx(110.2726).epsilon(1e-6));
}

TEST_CASE("loss terms are finite, KL non-negative, empty batch rejected") {
    const auto a = small_arch();
    const auto p = vae::init_vae(a, 4);
    Rng rng(2);
    for (int t = 0; t < 20; ++t) {
        const auto l = vae::vae_loss(p, random_batch(a, 7, 100 + t), rng);
        CHECK(std::isfinite(l.reconstruction));
        CHECK(l.kl >= 0.0);
    }
    gen::PathDataset empty;
    empty.paths = Matrix(120, 0);
    empty.conditions = Matrix(5, 0);
    CHECK_THROWS_AS(vae::vae_loss(p, empty, rng), ArgumentError);
    CHECK_THROWS_AS(vae::vae_loss(p, random_batch(a, 3, 1), Matrix::Zero(4, 2)), StructuralError);
}

TEST_CASE("analytic gradient matches central differences on a 10-sample batch") {
    const auto a = small_arch();
    auto p = vae::init_vae(a, 11);
    const auto batch = random_batch(a, 10, 5);
    std::mt19937_64 rng(6);
    const Matrix noise = test::random_matrix(4, 10, rng);
    vae::VaeGradients g;
    vae::vae_loss(p, batch, noise, &g);

    // h = 1e-4: at a loss near 1.8e3, one ulp over h = 1e-5 already exceeds 1e-4 of the smallest entries.
    auto loss = [&] { return vae::vae_loss(p, batch, noise).total(); };
    const auto ge = nn::flatten(g.encoder);
    const auto gd = nn::flatten(g.decoder);
    double worst = 0.0;
    for (std::size_t i = 0; i < ge.size(); ++i)
        worst = std::max(worst, test::rel_err(ge[i], test::central_difference(p.encoder.weights, i, loss, 1e-4)));
    for (std::size_t i = 0; i < gd.size(); ++i)
        worst = std::max(worst, test::rel_err(gd[i], test::central_difference(p.decoder.weights, i, loss, 1e-4)));
    CHECK(worst < 1e-4);
}

TEST_CASE("50 Adam steps on a 100-sample toy set cut the loss below 0.9x") {
    const auto a = small_arch();
    const auto p = vae::init_vae(a, 21);
    const auto data = random_batch(a, 100, 22);
    nn::TrainConfig cfg = vae::default_vae_config();
    cfg.learning_rate = 1e-3;
    cfg.batch_size = 100;
    cfg.seed = 3;
    vae::VaeTrainer t(p, cfg);
    const auto losses = t.train(data, 50);
    CHECK(t.steps() == 50);
    CHECK(losses.back() < 0.9 * losses.front());
}

TEST_CASE("one full-batch SGD step matches the hand-computed update") {
    // Zero weights: z = noise, decoder output (0, 0). Per sample, dL/d out_mu = -x and
    // dL/d out_logvar = (1 - x^2)/2; encoder gradient vanishes.
    vae::VaeArch a;
    a.data_dim = 1;
    a.cond_dim = 1;
    a.latent_dim = 1;
    a.encoder_hidden = {};
    a.decoder_hidden = {};
    const auto p = vae::zero_vae(a);
    gen::PathDataset data;
    data.paths = (Matrix(1, 2) << 0.5, -0.8).finished();
    data.conditions = (Matrix(1, 2) << 0.3, 0.9).finished();
    nn::TrainConfig cfg;
    cfg.optimizer = nn::OptimizerKind::sgd;
    cfg.learning_rate = 0.1;
    cfg.batch_size = 2;
    cfg.epochs = 1;
    cfg.seed = 8;
    const auto q = vae::train_local_vae(p, data, cfg);

    const double eta = 0.1;
    const double mean_x = (0.5 - 0.8) / 2.0;
    const double mean_xc = (0.5 * 0.3 - 0.8 * 0.9) / 2.0;
    const double mean_dlv = ((1.0 - 0.25) / 2.0 + (1.0 - 0.64) / 2.0) / 2.0;
    const double mean_dlv_c = ((1.0 - 0.25) / 2.0 * 0.3 + (1.0 - 0.64) / 2.0 * 0.9) / 2.0;
    const auto& dec = q.decoder.weights.layers[0];
    CHECK(std::abs(dec.bias(0) - eta * mean_x) < 1e-9);
    CHECK(std::abs(dec.weight(0, 1) - eta * mean_xc) < 1e-9);
    CHECK(std::abs(dec.bias(1) + eta * mean_dlv) < 1e-9);
    CHECK(std::abs(dec.weight(1, 1) + eta * mean_dlv_c) < 1e-9);
    for (double v : nn::flatten(q.encoder.weights)) CHECK(v == 0.0);
}

TEST_CASE("training is deterministic and resumable") {
    const auto a = small_arch();
    const auto p = vae::init_vae(a, 30);
    const auto data = random_batch(a, 250, 31);
    auto cfg = vae::default_vae_config();
    cfg.seed = 32;
    const auto x = vae::train_local_vae(p, data, cfg);
    const auto y = vae::train_local_vae(p, data, cfg);
    CHECK(nn::flatten(x.encoder.weights) == nn::flatten(y.encoder.weights));
    CHECK(nn::flatten(x.decoder.weights) == nn::flatten(y.decoder.weights));

    vae::VaeTrainer t(p, cfg);
    t.train(data, 2);
    t.train(data, 3);
    CHECK(nn::flatten(t.params().decoder.weights) == nn::flatten(x.decoder.weights));

    cfg.seed = 33;
    const auto z = vae::train_local_vae(p, data, cfg);
    CHECK(nn::flatten(z.decoder.weights) != nn::flatten(x.decoder.weights));

    gen::PathDataset empty;
    empty.paths = Matrix(120, 0);
    empty.conditions = Matrix(5, 0);
    CHECK_THROWS_AS(vae::train_local_vae(p, empty, cfg), ArgumentError);
}

TEST_CASE("model trained on a single point samples around it") {
    auto a = small_arch();
    a.decoder_hidden = {16};
    a.encoder_hidden = {16};
    std::mt19937_64 gen(40);
    const Vector point = test::random_matrix(120, 1, gen, 0.4).col(0);
    const Vector cond = test::random_matrix(5, 1, gen, 0.4).col(0);
    gen::PathDataset data;
    data.paths = point.replicate(1, 200);
    data.conditions = cond.replicate(1, 200);
    auto cfg = vae::default_vae_config();
    cfg.learning_rate = 1e-2;
    cfg.batch_size = 20;
    cfg.seed = 41;
    cfg.epochs = 1500;  // the posterior first collapses onto one latent point; the decoder stops using z later
    const auto p = vae::train_local_vae(vae::init_vae(a, 42), data, cfg);

    Rng rng(43);
    const Matrix x = vae::sample_scaled(p, cond.replicate(1, 10000), rng);
    const Vector mean = x.rowwise().mean();
    CHECK((mean - point).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("unscaled samples respect the 200 dB ceiling and are reproducible") {
    auto p = vae::zero_vae(vae::VaeArch{});
    p.decoder.weights.layers.back().bias.head(120).setConstant(5.0);  // far above the scaled range
    std::vector<double> lo(125, 0.0), hi(125, 1.0);
    for (std::size_t k = 0; k < 20; ++k) {
        lo[5 + 6 * k] = 60.0;
        hi[5 + 6 * k] = 200.0;
    }
    const synth::FeatureScaler scaler(lo, hi);
    synth::LinkCondition c;
    c.dx = 0.5;
    Rng a(5), b(5);
    const auto s = vae::sample_paths_vae(p, scaler, c, a);
    CHECK(s == vae::sample_paths_vae(p, scaler, c, b));
    for (std::size_t k = 0; k < 20; ++k) CHECK(s[6 * k] <= 200.0);
    CHECK(synth::strongest_path_loss(s) == 200.0);
}

}  // TEST_SUITE
