#pragma once

// Pieces shared by the two generative path models: the scaled training
// matrices and the per-dimension Gaussian output head.

#include <span>

#include "fedchan/nn.hpp"
#include "fedchan/synth.hpp"

namespace fedchan::gen {

/// Output log-variance is clamped to [-kLogvarClamp, kLogvarClamp].
inline constexpr double kLogvarClamp = 10.0;

/// Column j of `paths` / `conditions` is one scaled training example.
struct PathDataset {
    nn::Matrix paths;       // data_dim x N
    nn::Matrix conditions;  // cond_dim x N

    std::size_t size() const { return static_cast<std::size_t>(paths.cols()); }
    bool empty() const { return size() == 0; }
};

/// Scales the path-bearing records (NoLink dropped) with `scaler`.
PathDataset make_path_dataset(std::span<const synth::LinkRecord> records, const synth::FeatureScaler& scaler);

/// Columns `idx` of `data`.
PathDataset gather(const PathDataset& data, std::span<const std::size_t> idx);

/// Mean and (clamped) log-variance of a diagonal Gaussian, one column per sample.
struct GaussianBatch {
    nn::Matrix mu;
    nn::Matrix logvar;
    nn::Matrix raw_logvar;  // before clamping, for the clamp gradient mask
};

/// Splits a 2*d x B network output into (mu, clamped logvar).
GaussianBatch split_gaussian_head(const nn::Matrix& output);

/// [top; bottom] row concatenation.
nn::Matrix stack_rows(const nn::Matrix& top, const nn::Matrix& bottom);

nn::Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng);

/// 64-bit FNV-1a over the raw bytes of the flattened networks.
std::uint64_t checksum(std::span<const nn::Network> networks);

}  // namespace fedchan::gen
