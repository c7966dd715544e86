#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "fedchan/nn.hpp"

namespace fedchan::test {

/// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("fedchan_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

/// |a - b| / max(|a|, |b|, floor).
inline double rel_err(double a, double b, double floor = 1e-6) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Reference to flattened coordinate `index` (weights column-major, then bias, per layer).
inline double& coordinate(nn::ModelWeights& w, std::size_t index) {
    for (auto& layer : w.layers) {
        const auto nw = static_cast<std::size_t>(layer.weight.size());
        if (index < nw) return layer.weight.data()[index];
        index -= nw;
        const auto nb = static_cast<std::size_t>(layer.bias.size());
        if (index < nb) return layer.bias.data()[index];
        index -= nb;
    }
    throw std::out_of_range("coordinate index past the end");
}

/// Central difference of `loss()` with respect to coordinate `index` of `w`.
template <class Loss>
double central_difference(nn::ModelWeights& w, std::size_t index, Loss&& loss, double h = 1e-5) {
    double& x = coordinate(w, index);
    const double saved = x;
    x = saved + h;
    const double up = loss();
    x = saved - h;
    const double down = loss();
    x = saved;
    return (up - down) / (2.0 * h);
}

inline nn::Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    nn::Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

}  // namespace fedchan::test
