#include "fedchan/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fedchan/dataset_io.hpp"
#include "fedchan/errors.hpp"

namespace fedchan::metrics {

EmpiricalDistribution::EmpiricalDistribution(std::vector<double> samples) : sorted_(std::move(samples)) {
    if (sorted_.empty()) throw ArgumentError("empirical distribution needs at least one sample");
    std::sort(sorted_.begin(), sorted_.end());
}

double EmpiricalDistribution::cdf(double x) const {
    const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
    return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
}

std::vector<CdfPoint> empirical_cdf(std::span<const double> samples) {
    if (samples.empty()) throw ArgumentError("empirical_cdf: empty sample");
    std::vector<double> s(samples.begin(), samples.end());
    std::sort(s.begin(), s.end());
    std::vector<CdfPoint> out;
    const double n = static_cast<double>(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i + 1 < s.size() && s[i + 1] == s[i]) continue;
        out.push_back({s[i], static_cast<double>(i + 1) / n});
    }
    return out;
}

double kl_divergence_hist(std::span<const double> p_samples, std::span<const double> q_samples,
                          std::size_t n_bins, double epsilon) {
    if (p_samples.empty() || q_samples.empty()) throw ArgumentError("kl_divergence_hist: empty sample");
    if (n_bins == 0) throw ArgumentError("kl_divergence_hist: need at least one bin");
    const auto [p_lo, p_hi] = std::minmax_element(p_samples.begin(), p_samples.end());
    const auto [q_lo, q_hi] = std::minmax_element(q_samples.begin(), q_samples.end());
    const double lo = std::min(*p_lo, *q_lo);
    const double hi = std::max(*p_hi, *q_hi);
    const double width = hi - lo;

    auto histogram = [&](std::span<const double> xs) {
        std::vector<double> h(n_bins, 0.0);
        for (double x : xs) {
            std::size_t b = 0;
            if (width > 0.0)
                b = std::min(n_bins - 1, static_cast<std::size_t>((x - lo) / width * static_cast<double>(n_bins)));
            h[b] += 1.0;
        }
        const double total = static_cast<double>(xs.size()) + epsilon * static_cast<double>(n_bins);
        for (auto& v : h) v = (v + epsilon) / total;
        return h;
    };
    const auto p = histogram(p_samples);
    const auto q = histogram(q_samples);
    double kl = 0.0;
    for (std::size_t i = 0; i < n_bins; ++i) kl += p[i] * std::log(p[i] / q[i]);
    return std::max(kl, 0.0);
}

double wasserstein1(std::span<const double> a_samples, std::span<const double> b_samples) {
    if (a_samples.empty() || b_samples.empty()) throw ArgumentError("wasserstein1: empty sample");
    std::vector<double> a(a_samples.begin(), a_samples.end());
    std::vector<double> b(b_samples.begin(), b_samples.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const std::uint64_t n = a.size(), m = b.size();
    // Quantile breakpoints i/n and j/m, compared exactly on the common grid 1/(n*m).
    std::uint64_t i = 0, j = 0, prev = 0;
    double total = 0.0;
    while (i < n && j < m) {
        const std::uint64_t next_a = (i + 1) * m;
        const std::uint64_t next_b = (j + 1) * n;
        const std::uint64_t next = std::min(next_a, next_b);
        total += static_cast<double>(next - prev) * std::abs(a[i] - b[j]);
        prev = next;
        if (next_a == next) ++i;
        if (next_b == next) ++j;
    }
    return total / static_cast<double>(n * m);
}

const char* to_string(Method m) {
    switch (m) {
        case Method::vae: return "VAE";
        case Method::gan: return "GAN";
        case Method::fl_vae: return "FL-VAE";
        case Method::fl_gan: return "FL-GAN";
    }
    return "?";
}

std::optional<Method> method_from_string(const std::string& s) {
    for (auto m : {Method::vae, Method::gan, Method::fl_vae, Method::fl_gan})
        if (s == to_string(m)) return m;
    return std::nullopt;
}

EvaluationResult evaluate_model(const PathSampler& sampler, const link::LinkModel* link_model,
                                std::span<const synth::LinkRecord> test, const std::string& city, Method method,
                                Rng& rng) {
    EvaluationResult r;
    for (const auto& rec : test) {
        if (rec.state == synth::LinkState::no_link) continue;
        r.test_losses.push_back(synth::strongest_path_loss(rec.paths));
        r.generated_losses.push_back(synth::strongest_path_loss(sampler(rec.condition, rng)));
    }
    if (r.test_losses.empty()) throw ArgumentError("evaluate_model: no test records with a link for " + city);
    r.row.city = city;
    r.row.method = method;
    r.row.kl_divergence = kl_divergence_hist(r.test_losses, r.generated_losses);
    r.row.wasserstein = wasserstein1(r.test_losses, r.generated_losses);
    r.row.samples = r.test_losses.size();
    if (link_model) r.link_accuracy = link::accuracy(*link_model, test);
    return r;
}

std::string cdf_csv(std::span<const LabeledDistribution> dists) {
    std::ostringstream out;
    out << "label,value_db,cdf\n";
    for (const auto& d : dists)
        for (const auto& p : empirical_cdf(d.samples))
            out << d.label << ',' << io::format_double(p.value) << ',' << io::format_double(p.probability) << "\n";
    return out.str();
}

void write_cdf_csv(std::span<const LabeledDistribution> dists, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ParseError("cannot open " + path.string() + " for writing");
    out << cdf_csv(dists);
}

std::string report_csv(const MetricsReport& report) {
    std::ostringstream out;
    out << "city,method,kl,wasserstein\n";
    for (const auto& r : report)
        out << r.city << ',' << to_string(r.method) << ',' << io::format_double(r.kl_divergence) << ','
            << io::format_double(r.wasserstein) << "\n";
    return out.str();
}

void write_report_csv(const MetricsReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ParseError("cannot open " + path.string() + " for writing");
    out << report_csv(report);
}

MetricsReport parse_report_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "city,method,kl,wasserstein")
        throw ParseError("report: unexpected header");
    MetricsReport report;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::array<std::string, 4> f;
        std::istringstream ls(line);
        for (auto& field : f)
            if (!std::getline(ls, field, ',')) throw ParseError("report:" + std::to_string(line_no) + ": too few fields");
        MetricsRow r;
        r.city = f[0];
        const auto m = method_from_string(f[1]);
        if (!m) throw ParseError("report:" + std::to_string(line_no) + ": unknown method '" + f[1] + "'");
        r.method = *m;
        try {
            r.kl_divergence = std::stod(f[2]);
            r.wasserstein = std::stod(f[3]);
        } catch (const std::exception&) {
            throw ParseError("report:" + std::to_string(line_no) + ": bad number");
        }
        report.push_back(r);
    }
    return report;
}

std::string cdf_plot_script(const std::string& csv_name, std::span<const std::string> labels,
                            const std::string& title) {
    std::ostringstream out;
    out << "# gnuplot script; run: gnuplot <this file>\n"
        << "set datafile separator ','\n"
        << "set terminal pngcairo size 800,600\n"
        << "set output '" << csv_name.substr(0, csv_name.rfind('.')) << ".png'\n"
        << "set title '" << title << "'\n"
        << "set xlabel 'Path loss (dB)'\n"
        << "set ylabel 'CDF'\n"
        << "set key bottom right\n"
        << "plot ";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out << (i ? ", \\\n     " : "") << "'" << csv_name << "' using 2:(strcol(1) eq '" << labels[i]
            << "' ? $3 : 1/0) with steps title '" << labels[i] << "'";
    }
    out << "\n";
    return out.str();
}

std::span<const ReferenceValue> published_reference() {
    static constexpr ReferenceValue table[] = {
        {"Beijing", Method::vae, 1.91, 13.92},   {"Beijing", Method::gan, 3.08, 13.09},
        {"Beijing", Method::fl_vae, 1.63, 13.55}, {"Beijing", Method::fl_gan, 1.51, 12.47},
        {"Boston", Method::vae, 2.35, 12.48},    {"Boston", Method::gan, 1.66, 11.63},
        {"Boston", Method::fl_vae, 2.29, 12.05},  {"Boston", Method::fl_gan, 1.25, 11.33},
        {"London", Method::vae, 1.70, 14.03},    {"London", Method::gan, 3.29, 12.86},
        {"London", Method::fl_vae, 1.69, 13.95},  {"London", Method::fl_gan, 1.25, 12.50},
    };
    return table;
}

}  // namespace fedchan::metrics
