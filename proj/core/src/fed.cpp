#include "fedchan/fed.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numeric>
#include <thread>

#include "fedchan/dataset_io.hpp"
#include "fedchan/errors.hpp"
#include "fedchan/rng.hpp"

namespace fedchan::fed {

namespace {

// Pairwise sum of terms[lo, hi).
double pairwise_sum(std::span<const double> terms) {
    if (terms.size() <= 2) {
        double s = 0.0;
        for (double t : terms) s += t;
        return s;
    }
    const auto half = terms.size() / 2;
    return pairwise_sum(terms.first(half)) + pairwise_sum(terms.subspan(half));
}

}  // namespace

std::vector<double> aggregate_weighted(std::span<const std::vector<double>> updates,
                                       std::span<const std::uint64_t> counts) {
    if (updates.empty()) throw ArgumentError("aggregate_weighted: no updates");
    if (updates.size() != counts.size())
        throw ArgumentError("aggregate_weighted: " + std::to_string(updates.size()) + " updates but " +
                            std::to_string(counts.size()) + " counts");
    const std::size_t len = updates.front().size();
    std::uint64_t total = 0;
    for (std::size_t k = 0; k < updates.size(); ++k) {
        if (updates[k].size() != len)
            throw ArgumentError("aggregate_weighted: update " + std::to_string(k) + " has length " +
                                std::to_string(updates[k].size()) + ", expected " + std::to_string(len));
        if (counts[k] == 0) throw ArgumentError("aggregate_weighted: client " + std::to_string(k) + " has n_k = 0");
        total += counts[k];
    }
    std::vector<double> weights(counts.size());
    for (std::size_t k = 0; k < counts.size(); ++k)
        weights[k] = static_cast<double>(counts[k]) / static_cast<double>(total);

    std::vector<double> out(len);
    std::vector<double> terms(updates.size());
    for (std::size_t i = 0; i < len; ++i) {
        // A combination of equal values is that value; skip the rounding of sum_k w_k x.
        const double first = updates.front()[i];
        if (std::all_of(updates.begin(), updates.end(), [&](const auto& u) { return u[i] == first; })) {
            out[i] = first;
            continue;
        }
        for (std::size_t k = 0; k < updates.size(); ++k) terms[k] = weights[k] * updates[k][i];
        out[i] = pairwise_sum(terms);
    }
    return out;
}

std::vector<nn::Network> aggregate_networks(std::span<const std::vector<nn::Network>> updates,
                                            std::span<const std::uint64_t> counts) {
    if (updates.empty()) throw ArgumentError("aggregate_networks: no updates");
    const auto& first = updates.front();
    std::vector<nn::Network> out;
    for (std::size_t j = 0; j < first.size(); ++j) {
        std::vector<std::vector<double>> flat;
        flat.reserve(updates.size());
        for (const auto& u : updates) {
            if (u.size() != first.size() || u[j].specs != first[j].specs)
                throw ArgumentError("aggregate_networks: client networks differ in shape");
            flat.push_back(nn::flatten(u[j].weights));
        }
        nn::Network net;
        net.name = first[j].name;
        net.specs = first[j].specs;
        net.weights = nn::unflatten(aggregate_weighted(flat, counts), net.specs);
        out.push_back(std::move(net));
    }
    return out;
}

const char* to_string(ModelKind kind) { return kind == ModelKind::vae ? "vae" : "gan"; }

nn::TrainConfig FedConfig::local_config(const std::string& client_id) const {
    nn::TrainConfig c;
    c.learning_rate = learning_rate;
    c.epochs = local_epochs;
    c.batch_size = batch_size;
    c.optimizer = optimizer;
    c.seed = client_seed(seed, client_id);
    return c;
}

std::uint64_t client_seed(std::uint64_t seed, const std::string& client_id) {
    return derive_seed(seed, {hash_tag("client"), hash_tag(client_id)});
}

std::vector<nn::Network> initial_networks(const FedConfig& cfg) {
    const auto init_seed = derive_seed(cfg.seed, {hash_tag("global-init")});
    if (cfg.kind == ModelKind::vae) return vae::init_vae(cfg.vae_arch, init_seed).networks();
    return gan::init_gan(cfg.gan_arch, init_seed).networks();
}

namespace {

class VaeLocalTrainer final : public LocalTrainer {
public:
    VaeLocalTrainer(const vae::VaeArch& arch, const nn::TrainConfig& cfg, const gen::PathDataset& data)
        : trainer_(vae::init_vae(arch, cfg.seed), cfg), data_(data) {}

    std::vector<nn::Network> networks() const override { return trainer_.params().networks(); }

    void load(std::span<const nn::Network> nets) override {
        if (nets.size() != 2) throw StructuralError("VAE expects encoder and decoder networks");
        vae::VaeParams p = trainer_.params();
        p.encoder = nets[0];
        p.decoder = nets[1];
        trainer_.set_params(p);
    }

    std::vector<double> train(std::size_t epochs) override { return trainer_.train(data_, epochs); }

private:
    vae::VaeTrainer trainer_;
    const gen::PathDataset& data_;
};

class GanLocalTrainer final : public LocalTrainer {
public:
    GanLocalTrainer(const gan::GanArch& arch, const nn::TrainConfig& cfg, const gen::PathDataset& data)
        : trainer_(gan::init_gan(arch, cfg.seed), cfg), data_(data) {}

    std::vector<nn::Network> networks() const override { return trainer_.params().networks(); }

    void load(std::span<const nn::Network> nets) override {
        if (nets.size() != 2) throw StructuralError("GAN expects generator and discriminator networks");
        gan::GanParams p = trainer_.params();
        p.generator = nets[0];
        p.discriminator = nets[1];
        trainer_.set_params(p);
    }

    std::vector<double> train(std::size_t epochs) override {
        std::vector<double> out;
        for (const auto& s : trainer_.train(data_, epochs)) out.push_back(s.discriminator_loss + s.generator_loss);
        return out;
    }

private:
    gan::GanTrainer trainer_;
    const gen::PathDataset& data_;
};

}  // namespace

std::unique_ptr<LocalTrainer> make_trainer(const FedConfig& cfg, const std::string& client_id,
                                           const gen::PathDataset& data) {
    const auto local = cfg.local_config(client_id);
    if (cfg.kind == ModelKind::vae) return std::make_unique<VaeLocalTrainer>(cfg.vae_arch, local, data);
    return std::make_unique<GanLocalTrainer>(cfg.gan_arch, local, data);
}

std::vector<Client> make_clients(const FedConfig& cfg, std::span<const ClientData> data) {
    std::vector<Client> clients;
    for (const auto& d : data) {
        if (!d.data || d.data->empty()) throw ArgumentError("client " + d.id + " has no training data");
        clients.push_back({d.id, d.data->size(), make_trainer(cfg, d.id, *d.data)});
    }
    return clients;
}

double ClientRoundStats::mean_loss() const {
    if (losses.empty()) return 0.0;
    return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
}

namespace {

std::vector<nn::LayerSpecs> specs_of(std::span<const nn::Network> nets) {
    std::vector<nn::LayerSpecs> out;
    for (const auto& n : nets) out.push_back(n.specs);
    return out;
}

}  // namespace

RoundResult fed_round(std::span<const nn::Network> global, std::span<Client> clients, const FedConfig& cfg,
                      std::size_t round, const ExchangeDirectory* exchange) {
    if (clients.empty()) throw ArgumentError("fed_round: no clients");
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<std::size_t> order(clients.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return clients[a].id < clients[b].id; });
    for (std::size_t i = 1; i < order.size(); ++i)
        if (clients[order[i]].id == clients[order[i - 1]].id)
            throw ArgumentError("fed_round: duplicate client id '" + clients[order[i]].id + "'");

    std::uint64_t total = 0;
    for (const auto& c : clients) total += c.sample_count;
    const auto global_specs = specs_of(global);

    if (exchange) exchange->write({round, kGlobalId, total, {global.begin(), global.end()}});

    std::vector<ClientRoundStats> stats(clients.size());
    std::vector<std::vector<nn::Network>> updates(clients.size());
    std::vector<std::exception_ptr> errors(clients.size());

    auto run_client = [&](std::size_t k) {
        auto& c = clients[k];
        try {
            if (exchange) {
                const auto p = exchange->read({round, kGlobalId, global_specs});
                c.trainer->load(p.networks);
            } else {
                c.trainer->load(global);
            }
            stats[k] = {c.id, c.sample_count, c.trainer->train(cfg.local_epochs)};
            updates[k] = c.trainer->networks();
            if (exchange) {
                exchange->write({round, c.id, c.sample_count, updates[k]});
                updates[k] = exchange->read({round, c.id, global_specs}).networks;
            }
        } catch (...) {
            errors[k] = std::current_exception();
        }
    };

    if (cfg.workers > 1 && clients.size() > 1) {
        for (std::size_t start = 0; start < clients.size(); start += cfg.workers) {
            std::vector<std::jthread> pool;
            for (std::size_t k = start; k < std::min(clients.size(), start + cfg.workers); ++k)
                pool.emplace_back(run_client, k);
        }
    } else {
        for (std::size_t k = 0; k < clients.size(); ++k) run_client(k);
    }

    for (std::size_t k : order) {
        if (!errors[k]) continue;
        try {
            std::rethrow_exception(errors[k]);
        } catch (const std::exception& e) {
            throw TrainingError("round " + std::to_string(round) + " aborted: client " + clients[k].id + ": " +
                                e.what());
        }
    }

    std::vector<std::vector<nn::Network>> ordered_updates;
    std::vector<std::uint64_t> counts;
    RoundResult result;
    for (std::size_t k : order) {
        ordered_updates.push_back(std::move(updates[k]));
        counts.push_back(clients[k].sample_count);
        result.record.clients.push_back(std::move(stats[k]));
    }
    result.global = aggregate_networks(ordered_updates, counts);
    result.record.round = round;
    result.record.checksum = gen::checksum(result.global);
    result.record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

FederationResult run_federation(const FedConfig& cfg, std::span<Client> clients) {
    return run_federation(cfg, clients, initial_networks(cfg));
}

FederationResult run_federation(const FedConfig& cfg, std::span<Client> clients, std::vector<nn::Network> initial) {
    std::optional<ExchangeDirectory> exchange;
    if (cfg.exchange_dir) exchange.emplace(*cfg.exchange_dir);
    FederationResult result;
    result.global = std::move(initial);
    for (std::size_t t = 0; t < cfg.rounds; ++t) {
        auto r = fed_round(result.global, clients, cfg, t, exchange ? &*exchange : nullptr);
        result.global = std::move(r.global);
        result.history.push_back(std::move(r.record));
    }
    return result;
}

std::string checksum_hex(std::uint64_t checksum) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(checksum));
    return buf;
}

void write_history_csv(const RoundHistory& history, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ParseError("cannot open " + path.string() + " for writing");
    out << "round,client,mean_local_loss,checksum\n";
    for (const auto& r : history)
        for (const auto& c : r.clients)
            out << r.round << ',' << c.id << ',' << io::format_double(c.mean_loss()) << ','
                << checksum_hex(r.checksum) << "\n";
}

}  // namespace fedchan::fed
