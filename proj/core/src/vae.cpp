#include "fedchan/vae.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "fedchan/errors.hpp"
#include "fedchan/rng.hpp"

namespace fedchan::vae {

using gen::GaussianBatch;
using gen::PathDataset;
using nn::Matrix;
using nn::Vector;

nn::LayerSpecs encoder_specs(const VaeArch& arch) {
    return nn::make_mlp(arch.data_dim + arch.cond_dim, arch.encoder_hidden, 2 * arch.latent_dim,
                        nn::Activation::linear);
}

nn::LayerSpecs decoder_specs(const VaeArch& arch) {
    return nn::make_mlp(arch.latent_dim + arch.cond_dim, arch.decoder_hidden, 2 * arch.data_dim,
                        nn::Activation::linear);
}

VaeParams init_vae(const VaeArch& arch, std::uint64_t seed) {
    VaeParams p;
    p.arch = arch;
    p.encoder.name = "vae_enc";
    p.encoder.specs = encoder_specs(arch);
    p.decoder.name = "vae_dec";
    p.decoder.specs = decoder_specs(arch);
    Rng rng = make_rng(seed, {hash_tag("vae-init")});
    p.encoder.weights = nn::init_weights(p.encoder.specs, rng);
    p.decoder.weights = nn::init_weights(p.decoder.specs, rng);
    return p;
}

VaeParams zero_vae(const VaeArch& arch) {
    VaeParams p = init_vae(arch, 0);
    p.encoder.weights.set_zero();
    p.decoder.weights.set_zero();
    return p;
}

void check_contract(const VaeParams& params) {
    if (params.encoder.specs != encoder_specs(params.arch))
        throw StructuralError("VAE encoder layers do not match the architecture");
    if (params.decoder.specs != decoder_specs(params.arch))
        throw StructuralError("VAE decoder layers do not match the architecture");
    nn::check_shapes(params.encoder.weights, params.encoder.specs);
    nn::check_shapes(params.decoder.weights, params.decoder.specs);
}

namespace {

void require_rows(const Matrix& m, std::size_t rows, const char* what) {
    if (static_cast<std::size_t>(m.rows()) != rows)
        throw StructuralError(std::string(what) + " has " + std::to_string(m.rows()) + " entries, expected " +
                              std::to_string(rows));
}

}  // namespace

LatentGaussian encode(const VaeParams& params, const Vector& scaled_paths, const Vector& scaled_condition) {
    require_rows(scaled_paths, params.arch.data_dim, "encode: path vector");
    require_rows(scaled_condition, params.arch.cond_dim, "encode: condition");
    const Vector out = nn::forward(params.encoder.weights, params.encoder.specs,
                                   Vector(gen::stack_rows(scaled_paths, scaled_condition).col(0)));
    const auto L = static_cast<Eigen::Index>(params.arch.latent_dim);
    return {out.head(L), out.tail(L)};
}

Vector reparameterize(const Vector& mu, const Vector& logvar, const Vector& noise) {
    if (mu.size() != logvar.size() || mu.size() != noise.size())
        throw StructuralError("reparameterize: length mismatch");
    return mu + ((0.5 * logvar.array()).exp() * noise.array()).matrix();
}

LatentGaussian decode(const VaeParams& params, const Vector& z, const Vector& scaled_condition) {
    require_rows(z, params.arch.latent_dim, "decode: latent");
    require_rows(scaled_condition, params.arch.cond_dim, "decode: condition");
    const Matrix out = nn::forward(params.decoder.weights, params.decoder.specs, gen::stack_rows(z, scaled_condition));
    const auto g = gen::split_gaussian_head(out);
    return {g.mu.col(0), g.logvar.col(0)};
}

VaeLoss vae_loss(const VaeParams& params, const PathDataset& batch, const Matrix& noise, VaeGradients* grads) {
    if (batch.empty()) throw ArgumentError("vae_loss: empty batch");
    require_rows(batch.paths, params.arch.data_dim, "vae_loss: path batch");
    require_rows(batch.conditions, params.arch.cond_dim, "vae_loss: condition batch");
    require_rows(noise, params.arch.latent_dim, "vae_loss: noise");
    if (noise.cols() != batch.paths.cols()) throw StructuralError("vae_loss: noise batch size mismatch");

    const auto L = static_cast<Eigen::Index>(params.arch.latent_dim);
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    const double log2pi = std::log(2.0 * std::numbers::pi);

    nn::ForwardCache enc_cache, dec_cache;
    const Matrix enc_out = nn::forward(params.encoder.weights, params.encoder.specs,
                                       gen::stack_rows(batch.paths, batch.conditions), grads ? &enc_cache : nullptr);
    const Matrix mu = enc_out.topRows(L);
    const Matrix logvar = enc_out.bottomRows(L);
    const Matrix sigma = (0.5 * logvar.array()).exp().matrix();
    const Matrix z = mu + (sigma.array() * noise.array()).matrix();

    const Matrix dec_out = nn::forward(params.decoder.weights, params.decoder.specs,
                                       gen::stack_rows(z, batch.conditions), grads ? &dec_cache : nullptr);
    const GaussianBatch out = gen::split_gaussian_head(dec_out);
    const Matrix resid = batch.paths - out.mu;
    const Matrix inv_var = (-out.logvar.array()).exp().matrix();

    VaeLoss loss;
    const double d = static_cast<double>(params.arch.data_dim);
    loss.reconstruction =
        inv_b * 0.5 * (log2pi * d * static_cast<double>(batch.size()) + out.logvar.sum() +
                       (resid.array().square() * inv_var.array()).sum());
    loss.kl = inv_b * 0.5 * (mu.array().square() + (logvar.array().exp() - 1.0) - logvar.array()).sum();
    if (!std::isfinite(loss.reconstruction) || !std::isfinite(loss.kl))
        throw TrainingError("vae_loss: non-finite loss");

    if (grads) {
        Matrix d_mu_out = -inv_b * (resid.array() * inv_var.array()).matrix();
        Matrix d_lv_out = inv_b * 0.5 * (1.0 - resid.array().square() * inv_var.array()).matrix();
        d_lv_out = (out.raw_logvar.array().abs() < gen::kLogvarClamp).select(d_lv_out, 0.0);

        Matrix dec_in_grad;
        nn::BackwardOptions dec_opts;
        dec_opts.input_grad = &dec_in_grad;
        grads->decoder = nn::backward(params.decoder.weights, params.decoder.specs, dec_cache,
                                      gen::stack_rows(d_mu_out, d_lv_out), dec_opts);
        const Matrix dz = dec_in_grad.topRows(L);

        const Matrix d_mu = dz + inv_b * mu;
        const Matrix d_lv = (dz.array() * 0.5 * sigma.array() * noise.array() +
                             inv_b * 0.5 * (logvar.array().exp() - 1.0))
                                .matrix();
        grads->encoder = nn::backward(params.encoder.weights, params.encoder.specs, enc_cache,
                                      gen::stack_rows(d_mu, d_lv));
    }
    return loss;
}

VaeLoss vae_loss(const VaeParams& params, const PathDataset& batch, Rng& rng) {
    const Matrix noise = gen::standard_normal(static_cast<Eigen::Index>(params.arch.latent_dim),
                                              static_cast<Eigen::Index>(batch.size()), rng);
    return vae_loss(params, batch, noise);
}

nn::TrainConfig default_vae_config() {
    nn::TrainConfig cfg;
    cfg.learning_rate = 1e-4;
    cfg.epochs = 5;
    cfg.batch_size = 100;
    return cfg;
}

VaeTrainer::VaeTrainer(VaeParams params, nn::TrainConfig cfg)
    : params_(std::move(params)),
      cfg_(cfg),
      encoder_opt_(params_.encoder.weights, cfg.optimizer),
      decoder_opt_(params_.decoder.weights, cfg.optimizer) {
    cfg_.validate();
    check_contract(params_);
}

void VaeTrainer::set_params(const VaeParams& params) {
    check_contract(params);
    if (!params.encoder.weights.same_shape(params_.encoder.weights) ||
        !params.decoder.weights.same_shape(params_.decoder.weights))
        throw StructuralError("set_params: architecture differs from the trainer's");
    params_ = params;
}

std::vector<double> VaeTrainer::train(const PathDataset& data, std::size_t epochs) {
    if (data.empty()) throw ArgumentError("train_local_vae: empty training split");
    std::vector<double> losses;
    std::vector<std::size_t> order(data.size());
    for (std::size_t e = 0; e < epochs; ++e, ++epochs_done_) {
        Rng rng = make_rng(cfg_.seed, {hash_tag("vae-epoch"), epochs_done_});
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        double sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
            const auto idx =
                std::span<const std::size_t>(order).subspan(start, std::min(cfg_.batch_size, order.size() - start));
            const PathDataset batch = gen::gather(data, idx);
            const Matrix noise = gen::standard_normal(static_cast<Eigen::Index>(params_.arch.latent_dim),
                                                      static_cast<Eigen::Index>(idx.size()), rng);
            VaeGradients g;
            const auto loss = vae_loss(params_, batch, noise, &g);
            encoder_opt_.step(params_.encoder.weights, g.encoder, cfg_.learning_rate);
            decoder_opt_.step(params_.decoder.weights, g.decoder, cfg_.learning_rate);
            sum += loss.total();
            ++batches;
        }
        losses.push_back(sum / static_cast<double>(batches));
    }
    return losses;
}

VaeParams train_local_vae(const VaeParams& params, const PathDataset& data, const nn::TrainConfig& cfg) {
    VaeTrainer trainer(params, cfg);
    trainer.train(data, cfg.epochs);
    return trainer.params();
}

Matrix sample_scaled(const VaeParams& params, const Matrix& scaled_conditions, Rng& rng) {
    require_rows(scaled_conditions, params.arch.cond_dim, "sample: condition batch");
    const auto n = scaled_conditions.cols();
    const Matrix z = gen::standard_normal(static_cast<Eigen::Index>(params.arch.latent_dim), n, rng);
    const Matrix dec_out =
        nn::forward(params.decoder.weights, params.decoder.specs, gen::stack_rows(z, scaled_conditions));
    const auto g = gen::split_gaussian_head(dec_out);
    const Matrix eps = gen::standard_normal(g.mu.rows(), n, rng);
    return g.mu + ((0.5 * g.logvar.array()).exp() * eps.array()).matrix();
}

synth::PathVector sample_paths_vae(const VaeParams& params, const synth::FeatureScaler& scaler,
                                   const synth::LinkCondition& condition, Rng& rng) {
    const Matrix cond = scaler.scaled_condition(condition);
    const Matrix x = sample_scaled(params, cond, rng);
    return scaler.unscale_paths(x.col(0));
}

}  // namespace fedchan::vae
