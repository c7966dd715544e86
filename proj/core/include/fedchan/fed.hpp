#pragma once

// Federated averaging over city clients. Each round the server broadcasts
// the global networks, every client trains locally for a few epochs, and the
// server replaces the global networks by the sample-count weighted average
// of the client networks (each network averaged separately).

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedchan/exchange.hpp"
#include "fedchan/gan.hpp"
#include "fedchan/nn.hpp"
#include "fedchan/path_data.hpp"
#include "fedchan/vae.hpp"

namespace fedchan::fed {

/// output[i] = sum_k (n_k / n) * updates[k][i], summed pairwise in the given
/// order. Throws ArgumentError on length mismatch or a zero count.
std::vector<double> aggregate_weighted(std::span<const std::vector<double>> updates,
                                       std::span<const std::uint64_t> counts);

/// Aggregates network j of every client into network j of the result.
std::vector<nn::Network> aggregate_networks(std::span<const std::vector<nn::Network>> updates,
                                            std::span<const std::uint64_t> counts);

enum class ModelKind { vae, gan };

const char* to_string(ModelKind kind);

/// Local training behind a uniform interface so rounds are model-agnostic.
class LocalTrainer {
public:
    virtual ~LocalTrainer() = default;
    virtual std::vector<nn::Network> networks() const = 0;
    /// Overwrites the parameters; local optimizer state is kept.
    virtual void load(std::span<const nn::Network> networks) = 0;
    /// Trains `epochs` epochs on the client's data; one loss per epoch.
    virtual std::vector<double> train(std::size_t epochs) = 0;
};

struct FedConfig {
    ModelKind kind = ModelKind::vae;
    std::size_t rounds = 100;
    std::size_t local_epochs = 5;
    std::size_t batch_size = 100;
    double learning_rate = 1e-4;
    nn::OptimizerKind optimizer = nn::OptimizerKind::adam;
    std::uint64_t seed = 0;
    unsigned workers = 1;  // clients trained concurrently within a round
    std::optional<std::filesystem::path> exchange_dir;
    vae::VaeArch vae_arch;
    gan::GanArch gan_arch;

    nn::TrainConfig local_config(const std::string& client_id) const;
};

/// Seed of the stream owned by `client_id` under the experiment seed. A
/// standalone run of that city with the same seed uses the same stream.
std::uint64_t client_seed(std::uint64_t seed, const std::string& client_id);

/// Global initial networks for cfg.kind, a pure function of cfg.seed.
std::vector<nn::Network> initial_networks(const FedConfig& cfg);

/// `data` must outlive the trainer.
std::unique_ptr<LocalTrainer> make_trainer(const FedConfig& cfg, const std::string& client_id,
                                           const gen::PathDataset& data);

struct Client {
    std::string id;
    std::uint64_t sample_count = 0;  // n_k
    std::unique_ptr<LocalTrainer> trainer;
};

/// Builds one client per (id, dataset); n_k is the dataset size.
struct ClientData {
    std::string id;
    const gen::PathDataset* data = nullptr;
};
std::vector<Client> make_clients(const FedConfig& cfg, std::span<const ClientData> data);

struct ClientRoundStats {
    std::string id;
    std::uint64_t sample_count = 0;
    std::vector<double> losses;  // one per local epoch

    double mean_loss() const;
};

struct RoundRecord {
    std::size_t round = 0;
    std::vector<ClientRoundStats> clients;
    std::uint64_t checksum = 0;  // of the aggregated networks
    double wall_seconds = 0.0;
};

using RoundHistory = std::vector<RoundRecord>;

struct RoundResult {
    std::vector<nn::Network> global;
    RoundRecord record;
};

/// One broadcast / local-train / aggregate cycle. Clients are aggregated in
/// ascending id order. A failing client aborts the round with its id.
RoundResult fed_round(std::span<const nn::Network> global, std::span<Client> clients, const FedConfig& cfg,
                      std::size_t round, const ExchangeDirectory* exchange = nullptr);

struct FederationResult {
    std::vector<nn::Network> global;
    RoundHistory history;
};

FederationResult run_federation(const FedConfig& cfg, std::span<Client> clients);
/// Starts from `initial` instead of initial_networks(cfg).
FederationResult run_federation(const FedConfig& cfg, std::span<Client> clients,
                                std::vector<nn::Network> initial);

/// Columns: round,client,mean_local_loss,checksum
void write_history_csv(const RoundHistory& history, const std::filesystem::path& path);

std::string checksum_hex(std::uint64_t checksum);

}  // namespace fedchan::fed
