#pragma once

// Experiment pipeline behind the command-line tool. Every command reads and
// writes files under one output directory:
//
//   <out>/data/<city>.csv, <city>.meta           gen-data
//   <out>/models/link_<city>.fcw                 train-link
//   <out>/models/scaler_<tag>.txt                train-link, train
//   <out>/models/{vae_enc,vae_dec}_<tag>.fcw     train --mode vae|fl-vae
//   <out>/models/{gan_gen,gan_disc}_<tag>.fcw    train --mode gan|fl-gan
//   <out>/history/<mode>_<tag>.csv               train
//   <out>/results/report.csv, cdf_<city>.csv/.gp eval
//   <out>/results/summary.csv, summary.txt       report
//
// <tag> is the city id for standalone models and "fl" for federated ones.
// Outputs are byte-identical for identical config and seed.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fedchan/fed.hpp"
#include "fedchan/metrics.hpp"
#include "fedchan/nn.hpp"
#include "fedchan/synth.hpp"

namespace fedchan::exp {

struct CitySetup {
    synth::CityProfile profile;
    std::size_t links = 5000;
    std::string reference;  // source city in the published table, may be empty
};

struct ExperimentConfig {
    std::vector<CitySetup> cities;
    double test_fraction = 0.2;
    nn::TrainConfig link;
    fed::FedConfig fed;             // rounds, local epochs, optimizer and architectures of every path model
    std::size_t standalone_epochs = 500;
    bool use_exchange = false;      // route federated rounds through <out>/exchange/<mode>
    std::filesystem::path out_dir = "out";
    std::optional<std::uint64_t> seed;
    unsigned workers = 1;

    /// Throws ArgumentError when the seed is unset, a city repeats or a value is out of range.
    void validate() const;
    /// Throws ArgumentError for an unknown city.
    const CitySetup& city(const std::string& id) const;
    std::uint64_t require_seed() const;
};

/// Three default cities at 5k links each with the published training settings.
ExperimentConfig default_config();

/// Published link counts: Beijing 36k, London 25.8k, Boston 23k, matched by `reference`.
void apply_paper_scale(ExperimentConfig& config);

/// INI-style overrides. Sections: [experiment], [link], [path], [vae], [gan],
/// [city.<id>]. Unknown sections or keys raise ParseError naming `source`.
void apply_ini(ExperimentConfig& config, const std::string& text, const std::string& source);
void apply_ini_file(ExperimentConfig& config, const std::filesystem::path& path);

/// Canonical INI text of `config`; apply_ini(default_config(), to_ini(c)) reproduces c.
std::string to_ini(const ExperimentConfig& config);

enum class TrainMode { vae, gan, fl_vae, fl_gan };

const char* to_string(TrainMode m);
/// Accepts vae, gan, fl-vae, fl-gan; throws ArgumentError otherwise.
TrainMode train_mode_from_string(const std::string& s);
bool is_federated(TrainMode m);
metrics::Method method_of(TrainMode m);

class Layout {
public:
    explicit Layout(std::filesystem::path root) : root_(std::move(root)) {}
    const std::filesystem::path& root() const { return root_; }
    std::filesystem::path data_dir() const { return root_ / "data"; }
    std::filesystem::path models_dir() const { return root_ / "models"; }
    std::filesystem::path history_dir() const { return root_ / "history"; }
    std::filesystem::path results_dir() const { return root_ / "results"; }
    std::filesystem::path exchange_dir(TrainMode m) const { return root_ / "exchange" / to_string(m); }
    std::filesystem::path dataset(const std::string& city) const { return data_dir() / (city + ".csv"); }
    std::filesystem::path link_weights(const std::string& city) const;
    std::filesystem::path scaler(const std::string& tag) const;
    /// Network files of `mode` for `tag`, in network order.
    std::vector<std::filesystem::path> model_weights(TrainMode mode, const std::string& tag) const;
    std::filesystem::path history(TrainMode mode, const std::string& tag) const;
    std::filesystem::path report() const { return results_dir() / "report.csv"; }
    std::filesystem::path cdf(const std::string& city) const { return results_dir() / ("cdf_" + city + ".csv"); }
    std::filesystem::path summary_csv() const { return results_dir() / "summary.csv"; }
    std::filesystem::path summary_text() const { return results_dir() / "summary.txt"; }

private:
    std::filesystem::path root_;
};

inline constexpr const char* kFederatedTag = "fl";

/// Loads <out>/data/<city>.csv; ArgumentError if gen-data has not produced it.
synth::CityDataset load_city(const ExperimentConfig& config, const std::string& city);

/// Writes one dataset (stratified split) per city; returns the CSV paths.
std::vector<std::filesystem::path> cmd_gen_data(const ExperimentConfig& config, std::ostream& log);

struct LinkSummary {
    std::string city;
    double test_accuracy = 0.0;
    double final_loss = 0.0;
};
std::vector<LinkSummary> cmd_train_link(const ExperimentConfig& config, std::ostream& log);

/// Standalone modes need `city`; federated modes train on every city and reject one.
void cmd_train(const ExperimentConfig& config, TrainMode mode, const std::optional<std::string>& city,
               std::ostream& log);

/// One row per (city, method) whose weights exist; throws ArgumentError when none do.
metrics::MetricsReport cmd_eval(const ExperimentConfig& config, std::ostream& log);

struct SummaryRow {
    metrics::MetricsRow metrics;
    std::optional<double> final_train_loss;
    std::optional<metrics::ReferenceValue> reference;
};
/// Reads results/report.csv and the histories; throws ArgumentError when results are missing.
std::vector<SummaryRow> cmd_report(const ExperimentConfig& config, std::ostream& log);

}  // namespace fedchan::exp
