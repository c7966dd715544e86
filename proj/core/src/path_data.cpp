#include "fedchan/path_data.hpp"

#include <cstring>

#include "fedchan/errors.hpp"

namespace fedchan::gen {

PathDataset make_path_dataset(std::span<const synth::LinkRecord> records, const synth::FeatureScaler& scaler) {
    const auto kept = synth::with_paths(records);
    PathDataset d;
    d.paths.resize(static_cast<Eigen::Index>(synth::kPathDim), static_cast<Eigen::Index>(kept.size()));
    d.conditions.resize(static_cast<Eigen::Index>(synth::kConditionDim), static_cast<Eigen::Index>(kept.size()));
    for (std::size_t j = 0; j < kept.size(); ++j) {
        d.paths.col(static_cast<Eigen::Index>(j)) = scaler.scaled_paths(kept[j].paths);
        d.conditions.col(static_cast<Eigen::Index>(j)) = scaler.scaled_condition(kept[j].condition);
    }
    return d;
}

PathDataset gather(const PathDataset& data, std::span<const std::size_t> idx) {
    PathDataset out;
    out.paths.resize(data.paths.rows(), static_cast<Eigen::Index>(idx.size()));
    out.conditions.resize(data.conditions.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) {
        out.paths.col(static_cast<Eigen::Index>(j)) = data.paths.col(static_cast<Eigen::Index>(idx[j]));
        out.conditions.col(static_cast<Eigen::Index>(j)) = data.conditions.col(static_cast<Eigen::Index>(idx[j]));
    }
    return out;
}

GaussianBatch split_gaussian_head(const nn::Matrix& output) {
    if (output.rows() % 2 != 0) throw StructuralError("Gaussian head needs an even number of outputs");
    const auto d = output.rows() / 2;
    GaussianBatch g;
    g.mu = output.topRows(d);
    g.raw_logvar = output.bottomRows(d);
    g.logvar = g.raw_logvar.cwiseMax(-kLogvarClamp).cwiseMin(kLogvarClamp);
    return g;
}

nn::Matrix stack_rows(const nn::Matrix& top, const nn::Matrix& bottom) {
    if (top.cols() != bottom.cols()) throw StructuralError("stack_rows: column count mismatch");
    nn::Matrix out(top.rows() + bottom.rows(), top.cols());
    out.topRows(top.rows()) = top;
    out.bottomRows(bottom.rows()) = bottom;
    return out;
}

nn::Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    nn::Matrix m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = normal(rng);
    return m;
}

std::uint64_t checksum(std::span<const nn::Network> networks) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& net : networks) {
        for (double v : nn::flatten(net.weights)) {
            unsigned char bytes[sizeof(double)];
            std::memcpy(bytes, &v, sizeof(double));
            for (unsigned char b : bytes) {
                h ^= b;
                h *= 0x100000001b3ULL;
            }
        }
    }
    return h;
}

}  // namespace fedchan::gen
