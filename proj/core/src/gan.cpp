#include "fedchan/gan.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedchan/errors.hpp"
#include "fedchan/rng.hpp"

namespace fedchan::gan {

using gen::PathDataset;
using nn::Matrix;
using nn::Vector;

nn::LayerSpecs generator_specs(const GanArch& arch) {
    return nn::make_mlp(arch.noise_dim + arch.cond_dim, arch.generator_hidden, 2 * arch.data_dim,
                        nn::Activation::linear);
}

nn::LayerSpecs discriminator_specs(const GanArch& arch) {
    return nn::make_mlp(arch.data_dim + arch.cond_dim, arch.discriminator_hidden, 1, nn::Activation::sigmoid);
}

GanParams init_gan(const GanArch& arch, std::uint64_t seed) {
    GanParams p;
    p.arch = arch;
    p.generator.name = "gan_gen";
    p.generator.specs = generator_specs(arch);
    p.discriminator.name = "gan_disc";
    p.discriminator.specs = discriminator_specs(arch);
    Rng rng = make_rng(seed, {hash_tag("gan-init")});
    p.generator.weights = nn::init_weights(p.generator.specs, rng);
    p.discriminator.weights = nn::init_weights(p.discriminator.specs, rng);
    return p;
}

GanParams zero_gan(const GanArch& arch) {
    GanParams p;
    p.arch = arch;
    p.generator.name = "gan_gen";
    p.generator.specs = generator_specs(arch);
    p.generator.weights = nn::zero_weights(p.generator.specs);
    p.discriminator.name = "gan_disc";
    p.discriminator.specs = discriminator_specs(arch);
    p.discriminator.weights = nn::zero_weights(p.discriminator.specs);
    return p;
}

void check_contract(const GanParams& params) {
    if (params.generator.specs != generator_specs(params.arch))
        throw StructuralError("GAN generator layers do not match the architecture");
    if (params.discriminator.specs != discriminator_specs(params.arch))
        throw StructuralError("GAN discriminator layers do not match the architecture");
    nn::check_shapes(params.generator.weights, params.generator.specs);
    nn::check_shapes(params.discriminator.weights, params.discriminator.specs);
}

GanNoise draw_noise(const GanArch& arch, std::size_t batch, Rng& rng) {
    GanNoise n;
    n.z = gen::standard_normal(static_cast<Eigen::Index>(arch.noise_dim), static_cast<Eigen::Index>(batch), rng);
    n.eps = gen::standard_normal(static_cast<Eigen::Index>(arch.data_dim), static_cast<Eigen::Index>(batch), rng);
    return n;
}

namespace {

void require_rows(const Matrix& m, std::size_t rows, const char* what) {
    if (static_cast<std::size_t>(m.rows()) != rows)
        throw StructuralError(std::string(what) + " has " + std::to_string(m.rows()) + " entries, expected " +
                              std::to_string(rows));
}

void check_noise(const GanParams& params, const GanNoise& noise, Eigen::Index batch) {
    require_rows(noise.z, params.arch.noise_dim, "generator noise");
    require_rows(noise.eps, params.arch.data_dim, "sample noise");
    if (noise.z.cols() != batch || noise.eps.cols() != batch)
        throw StructuralError("noise batch size does not match the condition batch");
}

struct GeneratorPass {
    nn::ForwardCache cache;
    gen::GaussianBatch head;
    Matrix sigma;
    Matrix fake;
};

GeneratorPass run_generator(const GanParams& params, const Matrix& conditions, const GanNoise& noise,
                            bool keep_cache) {
    require_rows(conditions, params.arch.cond_dim, "generator condition batch");
    check_noise(params, noise, conditions.cols());
    GeneratorPass pass;
    const Matrix out = nn::forward(params.generator.weights, params.generator.specs,
                                   gen::stack_rows(noise.z, conditions), keep_cache ? &pass.cache : nullptr);
    pass.head = gen::split_gaussian_head(out);
    pass.sigma = (0.5 * pass.head.logvar.array()).exp().matrix();
    pass.fake = pass.head.mu + (pass.sigma.array() * noise.eps.array()).matrix();
    return pass;
}

double clamped_neg_log(double p) { return -std::log(std::max(p, nn::kProbabilityFloor)); }

double discriminator_update_loss(const GanParams& params, const PathDataset& real, const Matrix& fake,
                                 nn::ModelWeights* grad) {
    const auto B = real.paths.cols();
    Matrix input(real.paths.rows() + real.conditions.rows(), 2 * B);
    input.topLeftCorner(real.paths.rows(), B) = real.paths;
    input.topRightCorner(real.paths.rows(), B) = fake;
    input.bottomLeftCorner(real.conditions.rows(), B) = real.conditions;
    input.bottomRightCorner(real.conditions.rows(), B) = real.conditions;

    nn::ForwardCache cache;
    const Matrix out =
        nn::forward(params.discriminator.weights, params.discriminator.specs, input, grad ? &cache : nullptr);
    const double inv_b = 1.0 / static_cast<double>(B);
    double loss = 0.0;
    Matrix d_out = Matrix::Zero(1, 2 * B);
    for (Eigen::Index j = 0; j < B; ++j) {
        const double p_real = out(0, j);
        const double q_fake = 1.0 - out(0, B + j);
        loss += inv_b * (clamped_neg_log(p_real) + clamped_neg_log(q_fake));
        if (p_real > nn::kProbabilityFloor) d_out(0, j) = -inv_b / p_real;
        if (q_fake > nn::kProbabilityFloor) d_out(0, B + j) = inv_b / q_fake;
    }
    if (grad) *grad = nn::backward(params.discriminator.weights, params.discriminator.specs, cache, d_out);
    return loss;
}

double generator_update_loss(const GanParams& params, const Matrix& conditions, const GanNoise& noise,
                             const GeneratorPass& pass, nn::ModelWeights* grad) {
    const auto B = conditions.cols();
    nn::ForwardCache d_cache;
    const Matrix out = nn::forward(params.discriminator.weights, params.discriminator.specs,
                                   gen::stack_rows(pass.fake, conditions), grad ? &d_cache : nullptr);
    const double inv_b = 1.0 / static_cast<double>(B);
    double loss = 0.0;
    Matrix d_out = Matrix::Zero(1, B);
    for (Eigen::Index j = 0; j < B; ++j) {
        const double p = out(0, j);
        loss += inv_b * clamped_neg_log(p);
        if (p > nn::kProbabilityFloor) d_out(0, j) = -inv_b / p;
    }
    if (grad) {
        Matrix d_input;
        nn::BackwardOptions opts;
        opts.parameter_grads = false;
        opts.input_grad = &d_input;
        nn::backward(params.discriminator.weights, params.discriminator.specs, d_cache, d_out, opts);
        const Matrix d_fake = d_input.topRows(static_cast<Eigen::Index>(params.arch.data_dim));
        Matrix d_lv = (d_fake.array() * 0.5 * pass.sigma.array() * noise.eps.array()).matrix();
        d_lv = (pass.head.raw_logvar.array().abs() < gen::kLogvarClamp).select(d_lv, 0.0);
        *grad = nn::backward(params.generator.weights, params.generator.specs, pass.cache,
                             gen::stack_rows(d_fake, d_lv));
    }
    return loss;
}

void check_real_batch(const GanParams& params, const PathDataset& real) {
    if (real.empty()) throw ArgumentError("gan: empty batch");
    require_rows(real.paths, params.arch.data_dim, "real path batch");
    require_rows(real.conditions, params.arch.cond_dim, "real condition batch");
}

}  // namespace

GeneratorOutput generator_forward(const GanParams& params, const Vector& z, const Vector& scaled_condition) {
    require_rows(z, params.arch.noise_dim, "generator_forward: noise");
    require_rows(scaled_condition, params.arch.cond_dim, "generator_forward: condition");
    const Matrix out =
        nn::forward(params.generator.weights, params.generator.specs, gen::stack_rows(z, scaled_condition));
    const auto g = gen::split_gaussian_head(out);
    return {g.mu.col(0), g.logvar.col(0)};
}

Matrix generate(const GanParams& params, const Matrix& scaled_conditions, const GanNoise& noise) {
    return run_generator(params, scaled_conditions, noise, false).fake;
}

double discriminator_forward(const GanParams& params, const Vector& scaled_path, const Vector& scaled_condition) {
    require_rows(scaled_path, params.arch.data_dim, "discriminator_forward: path");
    require_rows(scaled_condition, params.arch.cond_dim, "discriminator_forward: condition");
    const Matrix out = nn::forward(params.discriminator.weights, params.discriminator.specs,
                                   gen::stack_rows(scaled_path, scaled_condition));
    return out(0, 0);
}

double discriminator_loss(const GanParams& params, const PathDataset& real, const GanNoise& noise,
                          nn::ModelWeights* grad) {
    check_real_batch(params, real);
    const auto pass = run_generator(params, real.conditions, noise, false);
    return discriminator_update_loss(params, real, pass.fake, grad);
}

double generator_loss(const GanParams& params, const Matrix& scaled_conditions, const GanNoise& noise,
                      nn::ModelWeights* grad) {
    if (scaled_conditions.cols() == 0) throw ArgumentError("gan: empty batch");
    const auto pass = run_generator(params, scaled_conditions, noise, grad != nullptr);
    return generator_update_loss(params, scaled_conditions, noise, pass, grad);
}

GanLosses gan_losses(const GanParams& params, const PathDataset& real, const GanNoise& noise) {
    check_real_batch(params, real);
    const auto pass = run_generator(params, real.conditions, noise, false);
    GanLosses l;
    l.discriminator = discriminator_update_loss(params, real, pass.fake, nullptr);
    l.generator = generator_update_loss(params, real.conditions, noise, pass, nullptr);
    return l;
}

nn::TrainConfig default_gan_config() {
    nn::TrainConfig cfg;
    cfg.learning_rate = 1e-4;
    cfg.epochs = 5;
    cfg.batch_size = 100;
    return cfg;
}

GanTrainer::GanTrainer(GanParams params, nn::TrainConfig cfg)
    : params_(std::move(params)),
      cfg_(cfg),
      g_opt_(params_.generator.weights, cfg.optimizer),
      d_opt_(params_.discriminator.weights, cfg.optimizer) {
    cfg_.validate();
    check_contract(params_);
}

void GanTrainer::set_params(const GanParams& params) {
    check_contract(params);
    if (!params.generator.weights.same_shape(params_.generator.weights) ||
        !params.discriminator.weights.same_shape(params_.discriminator.weights))
        throw StructuralError("set_params: architecture differs from the trainer's");
    params_ = params;
}

double GanTrainer::discriminator_step(const PathDataset& batch, const GanNoise& noise) {
    check_real_batch(params_, batch);
    const auto pass = run_generator(params_, batch.conditions, noise, false);
    nn::ModelWeights grad;
    const double loss = discriminator_update_loss(params_, batch, pass.fake, &grad);
    d_opt_.step(params_.discriminator.weights, grad, cfg_.learning_rate);
    return loss;
}

double GanTrainer::generator_step(const Matrix& scaled_conditions, const GanNoise& noise) {
    const auto pass = run_generator(params_, scaled_conditions, noise, true);
    nn::ModelWeights grad;
    const double loss = generator_update_loss(params_, scaled_conditions, noise, pass, &grad);
    g_opt_.step(params_.generator.weights, grad, cfg_.learning_rate);
    return loss;
}

GanLosses GanTrainer::step(const PathDataset& batch, const GanNoise& noise) {
    check_real_batch(params_, batch);
    // The generator is untouched by the D-step, so one forward pass serves both.
    const auto pass = run_generator(params_, batch.conditions, noise, true);
    GanLosses l;
    nn::ModelWeights d_grad;
    l.discriminator = discriminator_update_loss(params_, batch, pass.fake, &d_grad);
    d_opt_.step(params_.discriminator.weights, d_grad, cfg_.learning_rate);

    nn::ModelWeights g_grad;
    l.generator = generator_update_loss(params_, batch.conditions, noise, pass, &g_grad);
    g_opt_.step(params_.generator.weights, g_grad, cfg_.learning_rate);
    return l;
}

std::vector<GanEpochStats> GanTrainer::train(const PathDataset& data, std::size_t epochs) {
    if (data.empty()) throw ArgumentError("train_local_gan: empty training split");
    std::vector<GanEpochStats> stats;
    std::vector<std::size_t> order(data.size());
    for (std::size_t e = 0; e < epochs; ++e, ++epochs_done_) {
        Rng rng = make_rng(cfg_.seed, {hash_tag("gan-epoch"), epochs_done_});
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        GanEpochStats s;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
            const auto idx =
                std::span<const std::size_t>(order).subspan(start, std::min(cfg_.batch_size, order.size() - start));
            const PathDataset batch = gen::gather(data, idx);
            const GanNoise noise = draw_noise(params_.arch, idx.size(), rng);
            const auto l = step(batch, noise);
            s.discriminator_loss += l.discriminator;
            s.generator_loss += l.generator;
            ++batches;
        }
        s.discriminator_loss /= static_cast<double>(batches);
        s.generator_loss /= static_cast<double>(batches);
        if (!std::isfinite(s.discriminator_loss) || !std::isfinite(s.generator_loss))
            throw TrainingError("train_local_gan: non-finite loss at epoch " + std::to_string(epochs_done_));
        stats.push_back(s);
    }
    return stats;
}

GanParams train_local_gan(const GanParams& params, const PathDataset& data, const nn::TrainConfig& cfg) {
    GanTrainer trainer(params, cfg);
    trainer.train(data, cfg.epochs);
    return trainer.params();
}

Matrix sample_scaled(const GanParams& params, const Matrix& scaled_conditions, Rng& rng) {
    const GanNoise noise = draw_noise(params.arch, static_cast<std::size_t>(scaled_conditions.cols()), rng);
    return generate(params, scaled_conditions, noise);
}

synth::PathVector sample_paths_gan(const GanParams& params, const synth::FeatureScaler& scaler,
                                   const synth::LinkCondition& condition, Rng& rng) {
    const Matrix cond = scaler.scaled_condition(condition);
    return scaler.unscale_paths(sample_scaled(params, cond, rng).col(0));
}

}  // namespace fedchan::gan
