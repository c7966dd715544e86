#pragma once

// Distribution distances between generated and held-out path-loss samples:
// empirical CDFs, histogram KL divergence and the 1-D Wasserstein-1 distance.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedchan/link_model.hpp"
#include "fedchan/synth.hpp"

namespace fedchan::metrics {

/// Sorted, non-empty sample of path-loss values (dB).
class EmpiricalDistribution {
public:
    explicit EmpiricalDistribution(std::vector<double> samples);

    const std::vector<double>& sorted() const { return sorted_; }
    std::size_t size() const { return sorted_.size(); }
    /// Fraction of samples <= x (right-continuous).
    double cdf(double x) const;

private:
    std::vector<double> sorted_;
};

struct CdfPoint {
    double value = 0.0;
    double probability = 0.0;
};

/// One point per distinct value: (v, fraction of samples <= v).
std::vector<CdfPoint> empirical_cdf(std::span<const double> samples);

inline constexpr std::size_t kDefaultBins = 100;
inline constexpr double kHistogramEpsilon = 1e-10;

/// KL(p || q) between histograms on shared uniform bins spanning the union
/// range, each bin count smoothed by `epsilon` before normalization.
double kl_divergence_hist(std::span<const double> p_samples, std::span<const double> q_samples,
                          std::size_t n_bins = kDefaultBins, double epsilon = kHistogramEpsilon);

/// Integral over u in (0, 1) of |F_a^{-1}(u) - F_b^{-1}(u)|.
double wasserstein1(std::span<const double> a_samples, std::span<const double> b_samples);

enum class Method { vae, gan, fl_vae, fl_gan };

const char* to_string(Method m);
std::optional<Method> method_from_string(const std::string& s);

struct MetricsRow {
    std::string city;
    Method method = Method::vae;
    double kl_divergence = 0.0;
    double wasserstein = 0.0;
    std::size_t samples = 0;
};

using MetricsReport = std::vector<MetricsRow>;

/// Draws one unscaled path vector for a condition.
using PathSampler = std::function<synth::PathVector(const synth::LinkCondition&, Rng&)>;

struct EvaluationResult {
    MetricsRow row;
    std::vector<double> test_losses;       // strongest-path loss of each eligible test record
    std::vector<double> generated_losses;  // strongest-path loss of each generated vector
    std::optional<double> link_accuracy;   // link model accuracy on the full test split
};

/// For each test record with a link, generates one path vector conditioned on
/// the record's condition and compares pooled strongest-path losses.
EvaluationResult evaluate_model(const PathSampler& sampler, const link::LinkModel* link_model,
                                std::span<const synth::LinkRecord> test, const std::string& city, Method method,
                                Rng& rng);

struct LabeledDistribution {
    std::string label;
    std::vector<double> samples;
};

/// Columns: label,value_db,cdf
void write_cdf_csv(std::span<const LabeledDistribution> dists, const std::filesystem::path& path);
std::string cdf_csv(std::span<const LabeledDistribution> dists);

/// Columns: city,method,kl,wasserstein
void write_report_csv(const MetricsReport& report, const std::filesystem::path& path);
std::string report_csv(const MetricsReport& report);
MetricsReport parse_report_csv(const std::string& text);

/// gnuplot commands plotting every label of a CDF csv.
std::string cdf_plot_script(const std::string& csv_name, std::span<const std::string> labels,
                            const std::string& title);

/// Published distances for the dense-urban source cities; annotation only.
struct ReferenceValue {
    const char* city;
    Method method;
    double kl;
    double wasserstein;
};

std::span<const ReferenceValue> published_reference();

}  // namespace fedchan::metrics
