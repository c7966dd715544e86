#include "fedchan/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <exception>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "fedchan/dataset_io.hpp"
#include "fedchan/errors.hpp"
#include "fedchan/gan.hpp"
#include "fedchan/link_model.hpp"
#include "fedchan/path_data.hpp"
#include "fedchan/rng.hpp"
#include "fedchan/vae.hpp"
#include "fedchan/weight_io.hpp"

namespace fedchan::exp {

namespace fs = std::filesystem;

namespace {

constexpr TrainMode kAllModes[] = {TrainMode::vae, TrainMode::gan, TrainMode::fl_vae, TrainMode::fl_gan};

// Runs f(0..n-1) on up to `workers` threads; rethrows the lowest-index failure.
template <class F>
void parallel_for(std::size_t n, unsigned workers, F&& f) {
    std::vector<std::exception_ptr> errors(n);
    auto guarded = [&](std::size_t i) {
        try {
            f(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) guarded(i);
    } else {
        for (std::size_t start = 0; start < n; start += workers) {
            std::vector<std::jthread> pool;
            for (std::size_t i = start; i < std::min<std::size_t>(n, start + workers); ++i)
                pool.emplace_back(guarded, i);
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot open " + path.string() + " for writing");
    out << text;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// Parses one INI value; `where` prefixes every error.
class ValueParser {
public:
    explicit ValueParser(std::string where) : where_(std::move(where)) {}

    double real(const std::string& v) const {
        double x = 0.0;
        const auto t = trim(v);
        const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
        if (ec != std::errc() || p != t.data() + t.size() || t.empty()) fail("expected a number, got '" + v + "'");
        return x;
    }

    std::uint64_t u64(const std::string& v) const {
        std::uint64_t x = 0;
        const auto t = trim(v);
        const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
        if (ec != std::errc() || p != t.data() + t.size() || t.empty())
            fail("expected a non-negative integer, got '" + v + "'");
        return x;
    }

    std::size_t size(const std::string& v) const { return static_cast<std::size_t>(u64(v)); }

    bool boolean(const std::string& v) const {
        const auto t = trim(v);
        if (t == "true" || t == "1" || t == "yes") return true;
        if (t == "false" || t == "0" || t == "no") return false;
        fail("expected true or false, got '" + v + "'");
        return false;
    }

    std::vector<std::size_t> sizes(const std::string& v) const {
        std::vector<std::size_t> out;
        for (const auto& item : split_list(v)) out.push_back(size(item));
        if (out.empty()) fail("expected a comma-separated list of layer widths");
        return out;
    }

    nn::OptimizerKind optimizer(const std::string& v) const {
        const auto t = trim(v);
        if (t == "adam") return nn::OptimizerKind::adam;
        if (t == "sgd") return nn::OptimizerKind::sgd;
        fail("expected adam or sgd, got '" + v + "'");
        return nn::OptimizerKind::adam;
    }

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(where_ + ": " + msg); }

private:
    std::string where_;
};

std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
}

const char* optimizer_name(nn::OptimizerKind k) { return k == nn::OptimizerKind::adam ? "adam" : "sgd"; }

CitySetup& find_or_add_city(ExperimentConfig& config, const std::string& id) {
    for (auto& c : config.cities)
        if (c.profile.city_id == id) return c;
    CitySetup c;
    c.profile.city_id = id;
    c.profile.seed = hash_tag(id);
    config.cities.push_back(c);
    return config.cities.back();
}

void apply_train_key(nn::TrainConfig& cfg, const std::string& key, const std::string& value, const ValueParser& p) {
    if (key == "epochs") cfg.epochs = p.size(value);
    else if (key == "learning_rate") cfg.learning_rate = p.real(value);
    else if (key == "batch_size") cfg.batch_size = p.size(value);
    else if (key == "optimizer") cfg.optimizer = p.optimizer(value);
    else p.fail("unknown key");
}

void apply_city_key(CitySetup& c, const std::string& key, const std::string& value, const ValueParser& p) {
    auto& pr = c.profile;
    if (key == "links") c.links = p.size(value);
    else if (key == "reference") c.reference = trim(value);
    else if (key == "pl0") pr.pl0 = p.real(value);
    else if (key == "slope1") pr.slope1 = p.real(value);
    else if (key == "slope2") pr.slope2 = p.real(value);
    else if (key == "d_break") pr.d_break = p.real(value);
    else if (key == "shadow_sigma") pr.shadow_sigma = p.real(value);
    else if (key == "los_decay") pr.los_decay = p.real(value);
    else if (key == "nolink_range") pr.nolink_range = p.real(value);
    else if (key == "nlos_offset") pr.nlos_offset = p.real(value);
    else if (key == "area_radius") pr.area_radius = p.real(value);
    else if (key == "hard_states") pr.hard_states = p.boolean(value);
    else if (key == "frequency_ghz") pr.frequency_ghz = p.real(value);
    else if (key == "seed") pr.seed = p.u64(value);
    else p.fail("unknown key");
}

fs::path make_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ParseError("cannot create directory " + dir.string() + ": " + ec.message());
    return dir;
}

std::uint64_t data_seed(const ExperimentConfig& config, const CitySetup& c) {
    return derive_seed(config.require_seed(), {hash_tag("data"), c.profile.seed});
}

synth::FeatureScaler load_scaler(const fs::path& path) { return synth::FeatureScaler::from_text(read_text(path)); }

fed::FedConfig fed_config_for(const ExperimentConfig& config, TrainMode mode) {
    auto cfg = config.fed;
    cfg.kind = (mode == TrainMode::vae || mode == TrainMode::fl_vae) ? fed::ModelKind::vae : fed::ModelKind::gan;
    cfg.seed = config.require_seed();
    return cfg;
}

std::string seconds(double s) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(1);
    out << s << "s";
    return out.str();
}

double elapsed(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

void ExperimentConfig::validate() const {
    if (!seed) throw ArgumentError("no seed given; set [experiment] seed or pass --seed");
    if (cities.empty()) throw ArgumentError("no cities configured");
    std::set<std::string> ids;
    for (const auto& c : cities) {
        if (c.profile.city_id.empty()) throw ArgumentError("city with an empty id");
        if (c.profile.city_id == kFederatedTag)
            throw ArgumentError("city id '" + std::string(kFederatedTag) + "' is reserved");
        if (!ids.insert(c.profile.city_id).second) throw ArgumentError("duplicate city '" + c.profile.city_id + "'");
        if (c.links == 0) throw ArgumentError("city " + c.profile.city_id + ": links must be positive");
        c.profile.validate();
    }
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ArgumentError("test_fraction must lie in (0, 1)");
    link.validate();
    if (fed.batch_size == 0) throw ArgumentError("path batch_size must be positive");
    if (!(fed.learning_rate > 0.0)) throw ArgumentError("path learning_rate must be positive");
    if (workers == 0) throw ArgumentError("workers must be positive");
}

const CitySetup& ExperimentConfig::city(const std::string& id) const {
    for (const auto& c : cities)
        if (c.profile.city_id == id) return c;
    throw ArgumentError("unknown city '" + id + "'");
}

std::uint64_t ExperimentConfig::require_seed() const {
    if (!seed) throw ArgumentError("no seed given; set [experiment] seed or pass --seed");
    return *seed;
}

ExperimentConfig default_config() {
    ExperimentConfig c;
    const char* references[] = {"Beijing", "London", "Boston"};
    const auto profiles = synth::default_profiles();
    for (std::size_t i = 0; i < profiles.size(); ++i) c.cities.push_back({profiles[i], 5000, references[i]});
    c.link = link::default_link_config();
    const auto path = vae::default_vae_config();
    c.fed.rounds = 100;
    c.fed.local_epochs = path.epochs;
    c.fed.batch_size = path.batch_size;
    c.fed.learning_rate = path.learning_rate;
    c.fed.optimizer = path.optimizer;
    return c;
}

void apply_paper_scale(ExperimentConfig& config) {
    const std::map<std::string, std::size_t> published = {{"Beijing", 36000}, {"London", 25800}, {"Boston", 23000}};
    for (auto& c : config.cities) {
        const auto it = published.find(c.reference);
        if (it != published.end()) c.links = it->second;
    }
}

void apply_ini(ExperimentConfig& config, const std::string& text, const std::string& source) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ParseError(source + ":" + std::to_string(e.line()) + ": " + e.message());
    }

    auto where = [&](const std::string& section, const std::string& key) {
        return source + ": [" + section + "] " + key;
    };

    std::optional<std::vector<std::string>> listed;
    if (auto exp = tree.get_child_optional(pt::ptree::path_type("experiment", '\0'))) {
        if (auto v = exp->get_optional<std::string>(pt::ptree::path_type("cities", '\0'))) {
            listed = split_list(*v);
            if (listed->empty()) throw ParseError(where("experiment", "cities") + ": empty list");
        }
    }
    if (listed) {
        std::vector<CitySetup> kept;
        for (const auto& id : *listed) kept.push_back(find_or_add_city(config, id));
        config.cities = std::move(kept);
    }

    for (const auto& [section, body] : tree) {
        if (!body.data().empty()) throw ParseError(source + ": key '" + section + "' outside any section");
        for (const auto& [key, node] : body) {
            const ValueParser p(where(section, key));
            const auto& value = node.data();
            if (section == "experiment") {
                if (key == "seed") config.seed = p.u64(value);
                else if (key == "out") config.out_dir = trim(value);
                else if (key == "test_fraction") config.test_fraction = p.real(value);
                else if (key == "standalone_epochs") config.standalone_epochs = p.size(value);
                else if (key == "workers") config.workers = static_cast<unsigned>(p.size(value));
                else if (key == "exchange") config.use_exchange = p.boolean(value);
                else if (key == "cities") continue;
                else p.fail("unknown key");
            } else if (section == "link") {
                apply_train_key(config.link, key, value, p);
            } else if (section == "path") {
                auto& f = config.fed;
                if (key == "rounds") f.rounds = p.size(value);
                else if (key == "local_epochs") f.local_epochs = p.size(value);
                else if (key == "learning_rate") f.learning_rate = p.real(value);
                else if (key == "batch_size") f.batch_size = p.size(value);
                else if (key == "optimizer") f.optimizer = p.optimizer(value);
                else p.fail("unknown key");
            } else if (section == "vae") {
                auto& a = config.fed.vae_arch;
                if (key == "latent_dim") a.latent_dim = p.size(value);
                else if (key == "encoder_hidden") a.encoder_hidden = p.sizes(value);
                else if (key == "decoder_hidden") a.decoder_hidden = p.sizes(value);
                else p.fail("unknown key");
            } else if (section == "gan") {
                auto& a = config.fed.gan_arch;
                if (key == "noise_dim") a.noise_dim = p.size(value);
                else if (key == "generator_hidden") a.generator_hidden = p.sizes(value);
                else if (key == "discriminator_hidden") a.discriminator_hidden = p.sizes(value);
                else p.fail("unknown key");
            } else if (section.rfind("city.", 0) == 0) {
                const auto id = section.substr(5);
                if (id.empty()) throw ParseError(source + ": [city.] needs a city id");
                if (listed && std::find(listed->begin(), listed->end(), id) == listed->end())
                    throw ParseError(source + ": [" + section + "] is not listed in [experiment] cities");
                apply_city_key(find_or_add_city(config, id), key, value, p);
            } else {
                throw ParseError(source + ": unknown section [" + section + "]");
            }
        }
    }
}

void apply_ini_file(ExperimentConfig& config, const fs::path& path) {
    apply_ini(config, read_text(path), path.string());
}

std::string to_ini(const ExperimentConfig& config) {
    using io::format_double;
    std::ostringstream out;
    out << "[experiment]\n";
    if (config.seed) out << "seed = " << *config.seed << "\n";
    out << "out = " << config.out_dir.string() << "\n"
        << "test_fraction = " << format_double(config.test_fraction) << "\n"
        << "standalone_epochs = " << config.standalone_epochs << "\n"
        << "workers = " << config.workers << "\n"
        << "exchange = " << (config.use_exchange ? "true" : "false") << "\n"
        << "cities = ";
    for (std::size_t i = 0; i < config.cities.size(); ++i) out << (i ? "," : "") << config.cities[i].profile.city_id;
    out << "\n\n[link]\n"
        << "epochs = " << config.link.epochs << "\n"
        << "learning_rate = " << format_double(config.link.learning_rate) << "\n"
        << "batch_size = " << config.link.batch_size << "\n"
        << "optimizer = " << optimizer_name(config.link.optimizer) << "\n\n[path]\n"
        << "rounds = " << config.fed.rounds << "\n"
        << "local_epochs = " << config.fed.local_epochs << "\n"
        << "learning_rate = " << format_double(config.fed.learning_rate) << "\n"
        << "batch_size = " << config.fed.batch_size << "\n"
        << "optimizer = " << optimizer_name(config.fed.optimizer) << "\n\n[vae]\n"
        << "latent_dim = " << config.fed.vae_arch.latent_dim << "\n"
        << "encoder_hidden = " << join_sizes(config.fed.vae_arch.encoder_hidden) << "\n"
        << "decoder_hidden = " << join_sizes(config.fed.vae_arch.decoder_hidden) << "\n\n[gan]\n"
        << "noise_dim = " << config.fed.gan_arch.noise_dim << "\n"
        << "generator_hidden = " << join_sizes(config.fed.gan_arch.generator_hidden) << "\n"
        << "discriminator_hidden = " << join_sizes(config.fed.gan_arch.discriminator_hidden) << "\n";
    for (const auto& c : config.cities) {
        const auto& p = c.profile;
        out << "\n[city." << p.city_id << "]\n"
            << "links = " << c.links << "\n";
        if (!c.reference.empty()) out << "reference = " << c.reference << "\n";
        out << "pl0 = " << format_double(p.pl0) << "\n"
            << "slope1 = " << format_double(p.slope1) << "\n"
            << "slope2 = " << format_double(p.slope2) << "\n"
            << "d_break = " << format_double(p.d_break) << "\n"
            << "shadow_sigma = " << format_double(p.shadow_sigma) << "\n"
            << "los_decay = " << format_double(p.los_decay) << "\n"
            << "nolink_range = " << format_double(p.nolink_range) << "\n"
            << "nlos_offset = " << format_double(p.nlos_offset) << "\n"
            << "area_radius = " << format_double(p.area_radius) << "\n"
            << "hard_states = " << (p.hard_states ? "true" : "false") << "\n"
            << "frequency_ghz = " << format_double(p.frequency_ghz) << "\n"
            << "seed = " << p.seed << "\n";
    }
    return out.str();
}

const char* to_string(TrainMode m) {
    switch (m) {
        case TrainMode::vae: return "vae";
        case TrainMode::gan: return "gan";
        case TrainMode::fl_vae: return "fl-vae";
        case TrainMode::fl_gan: return "fl-gan";
    }
    return "?";
}

TrainMode train_mode_from_string(const std::string& s) {
    for (auto m : kAllModes)
        if (s == to_string(m)) return m;
    throw ArgumentError("unknown mode '" + s + "' (expected vae, gan, fl-vae or fl-gan)");
}

bool is_federated(TrainMode m) { return m == TrainMode::fl_vae || m == TrainMode::fl_gan; }

metrics::Method method_of(TrainMode m) {
    switch (m) {
        case TrainMode::vae: return metrics::Method::vae;
        case TrainMode::gan: return metrics::Method::gan;
        case TrainMode::fl_vae: return metrics::Method::fl_vae;
        case TrainMode::fl_gan: return metrics::Method::fl_gan;
    }
    return metrics::Method::vae;
}

fs::path Layout::link_weights(const std::string& city) const { return models_dir() / ("link_" + city + ".fcw"); }

fs::path Layout::scaler(const std::string& tag) const { return models_dir() / ("scaler_" + tag + ".txt"); }

std::vector<fs::path> Layout::model_weights(TrainMode mode, const std::string& tag) const {
    const bool vae = mode == TrainMode::vae || mode == TrainMode::fl_vae;
    const char* first = vae ? "vae_enc_" : "gan_gen_";
    const char* second = vae ? "vae_dec_" : "gan_disc_";
    return {models_dir() / (first + tag + ".fcw"), models_dir() / (second + tag + ".fcw")};
}

fs::path Layout::history(TrainMode mode, const std::string& tag) const {
    return history_dir() / (std::string(to_string(mode)) + "_" + tag + ".csv");
}

synth::CityDataset load_city(const ExperimentConfig& config, const std::string& city) {
    config.city(city);
    const auto path = Layout(config.out_dir).dataset(city);
    if (!fs::exists(path)) throw ArgumentError("dataset for city " + city + " not found at " + path.string() + "; run gen-data first");
    auto ds = io::read_dataset(path);
    if (ds.n_test == 0) throw ArgumentError("dataset " + path.string() + " has no test split");
    return ds;
}

std::vector<fs::path> cmd_gen_data(const ExperimentConfig& config, std::ostream& log) {
    config.validate();
    const Layout layout(config.out_dir);
    make_dir(layout.data_dir());
    std::vector<fs::path> paths(config.cities.size());
    std::vector<synth::CityDataset> sets(config.cities.size());
    parallel_for(config.cities.size(), config.workers, [&](std::size_t i) {
        const auto& c = config.cities[i];
        auto profile = c.profile;
        profile.seed = data_seed(config, c);
        const auto full = synth::generate_city(profile, c.links);
        auto rng = make_rng(config.require_seed(), {hash_tag("split"), hash_tag(profile.city_id)});
        sets[i] = synth::split_train_test(full, config.test_fraction, rng);
        paths[i] = layout.dataset(profile.city_id);
        io::write_dataset(sets[i], paths[i]);
    });
    for (std::size_t i = 0; i < sets.size(); ++i) {
        std::array<std::size_t, synth::kLinkStateCount> counts{};
        for (const auto& r : sets[i].records) ++counts[static_cast<std::size_t>(r.state)];
        log << "gen-data " << sets[i].profile.city_id << ": " << sets[i].records.size() << " links (train "
            << sets[i].n_train << ", test " << sets[i].n_test << "; nolink " << counts[0] << ", los " << counts[1]
            << ", nlos " << counts[2] << ") -> " << paths[i].string() << "\n";
    }
    return paths;
}

std::vector<LinkSummary> cmd_train_link(const ExperimentConfig& config, std::ostream& log) {
    config.validate();
    const Layout layout(config.out_dir);
    make_dir(layout.models_dir());
    std::vector<LinkSummary> out(config.cities.size());
    parallel_for(config.cities.size(), config.workers, [&](std::size_t i) {
        const auto& id = config.cities[i].profile.city_id;
        const auto ds = load_city(config, id);
        const auto scaler = synth::FeatureScaler::fit(ds.train());
        auto cfg = config.link;
        cfg.seed = derive_seed(config.require_seed(), {hash_tag("link"), hash_tag(id)});
        const auto result = link::train_link_model(ds.train(), scaler, cfg);
        io::save_network(layout.link_weights(id), result.model.network);
        write_text(layout.scaler(id), scaler.to_text());
        out[i] = {id, link::accuracy(result.model, ds.test()),
                  result.epoch_loss.empty() ? result.initial_loss : result.epoch_loss.back()};
    });
    for (const auto& s : out)
        log << "train-link " << s.city << ": test accuracy " << io::format_double(s.test_accuracy)
            << ", final loss " << io::format_double(s.final_loss) << " -> " << layout.link_weights(s.city).string()
            << "\n";
    return out;
}

namespace {

void save_networks(const std::vector<nn::Network>& nets, const std::vector<fs::path>& paths) {
    for (std::size_t j = 0; j < nets.size(); ++j) io::save_network(paths[j], nets[j]);
}

void train_standalone(const ExperimentConfig& config, TrainMode mode, const std::string& city, std::ostream& log) {
    const Layout layout(config.out_dir);
    const auto ds = load_city(config, city);
    const auto scaler = synth::FeatureScaler::fit(ds.train());
    const auto data = gen::make_path_dataset(ds.train(), scaler);
    if (data.empty()) throw ArgumentError("city " + city + " has no training links with paths");
    const auto cfg = fed_config_for(config, mode);
    auto trainer = fed::make_trainer(cfg, city, data);
    trainer->load(fed::initial_networks(cfg));

    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t report_every = std::max<std::size_t>(1, config.standalone_epochs / 10);
    std::ostringstream history;
    history << "epoch,loss\n";
    for (std::size_t e = 0; e < config.standalone_epochs; ++e) {
        const double loss = trainer->train(1).front();
        history << e << ',' << io::format_double(loss) << "\n";
        if ((e + 1) % report_every == 0 || e + 1 == config.standalone_epochs)
            log << "train " << to_string(mode) << " " << city << ": epoch " << e + 1 << "/"
                << config.standalone_epochs << " loss " << io::format_double(loss) << " (" << seconds(elapsed(t0))
                << ")" << std::endl;
    }
    make_dir(layout.models_dir());
    make_dir(layout.history_dir());
    save_networks(trainer->networks(), layout.model_weights(mode, city));
    write_text(layout.scaler(city), scaler.to_text());
    write_text(layout.history(mode, city), history.str());
}

void train_federated(const ExperimentConfig& config, TrainMode mode, std::ostream& log) {
    const Layout layout(config.out_dir);
    std::vector<synth::CityDataset> sets;
    std::vector<synth::FeatureScaler> scalers;
    for (const auto& c : config.cities) {
        sets.push_back(load_city(config, c.profile.city_id));
        scalers.push_back(synth::FeatureScaler::fit(sets.back().train()));
    }
    const auto scaler = synth::FeatureScaler::merge(scalers);
    std::vector<gen::PathDataset> data;
    std::vector<fed::ClientData> client_data;
    data.reserve(sets.size());
    for (const auto& ds : sets) data.push_back(gen::make_path_dataset(ds.train(), scaler));
    for (std::size_t k = 0; k < sets.size(); ++k) client_data.push_back({sets[k].profile.city_id, &data[k]});

    auto cfg = fed_config_for(config, mode);
    cfg.workers = config.workers;
    std::optional<fed::ExchangeDirectory> exchange;
    if (config.use_exchange) exchange.emplace(layout.exchange_dir(mode));
    auto clients = fed::make_clients(cfg, client_data);

    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t report_every = std::max<std::size_t>(1, cfg.rounds / 10);
    auto global = fed::initial_networks(cfg);
    fed::RoundHistory history;
    for (std::size_t t = 0; t < cfg.rounds; ++t) {
        auto r = fed::fed_round(global, clients, cfg, t, exchange ? &*exchange : nullptr);
        global = std::move(r.global);
        if ((t + 1) % report_every == 0 || t + 1 == cfg.rounds) {
            log << "train " << to_string(mode) << ": round " << t + 1 << "/" << cfg.rounds;
            for (const auto& c : r.record.clients) log << " " << c.id << "=" << io::format_double(c.mean_loss());
            log << " checksum " << fed::checksum_hex(r.record.checksum) << " (" << seconds(elapsed(t0)) << ")" << std::endl;
        }
        history.push_back(std::move(r.record));
    }
    make_dir(layout.models_dir());
    make_dir(layout.history_dir());
    save_networks(global, layout.model_weights(mode, kFederatedTag));
    write_text(layout.scaler(kFederatedTag), scaler.to_text());
    fed::write_history_csv(history, layout.history(mode, kFederatedTag));
}

}  // namespace

void cmd_train(const ExperimentConfig& config, TrainMode mode, const std::optional<std::string>& city,
               std::ostream& log) {
    config.validate();
    if (is_federated(mode)) {
        if (city)
            throw ArgumentError(std::string("mode ") + to_string(mode) +
                                " trains on every configured city; drop --city");
        train_federated(config, mode, log);
    } else {
        if (!city) throw ArgumentError(std::string("mode ") + to_string(mode) + " needs --city");
        train_standalone(config, mode, *city, log);
    }
}

namespace {

struct EvalCell {
    std::size_t city = 0;
    TrainMode mode = TrainMode::vae;
};

metrics::PathSampler load_sampler(const ExperimentConfig& config, TrainMode mode, const std::vector<fs::path>& files,
                                  const synth::FeatureScaler& scaler) {
    std::vector<nn::Network> nets;
    for (const auto& f : files) nets.push_back(io::load_network(f));
    if (mode == TrainMode::vae || mode == TrainMode::fl_vae) {
        vae::VaeParams p{config.fed.vae_arch, nets[0], nets[1]};
        vae::check_contract(p);
        return [p, scaler](const synth::LinkCondition& c, Rng& rng) { return vae::sample_paths_vae(p, scaler, c, rng); };
    }
    gan::GanParams p{config.fed.gan_arch, nets[0], nets[1]};
    gan::check_contract(p);
    return [p, scaler](const synth::LinkCondition& c, Rng& rng) { return gan::sample_paths_gan(p, scaler, c, rng); };
}

}  // namespace

metrics::MetricsReport cmd_eval(const ExperimentConfig& config, std::ostream& log) {
    config.validate();
    const Layout layout(config.out_dir);

    std::vector<synth::CityDataset> sets;
    for (const auto& c : config.cities) sets.push_back(load_city(config, c.profile.city_id));

    std::vector<EvalCell> cells;
    for (std::size_t i = 0; i < sets.size(); ++i) {
        for (auto mode : kAllModes) {
            const auto tag = is_federated(mode) ? std::string(kFederatedTag) : sets[i].profile.city_id;
            bool present = fs::exists(layout.scaler(tag));
            for (const auto& f : layout.model_weights(mode, tag)) present = present && fs::exists(f);
            if (present) cells.push_back({i, mode});
        }
    }
    if (cells.empty()) throw ArgumentError("no trained models under " + layout.models_dir().string() + "; run train first");

    std::vector<metrics::EvaluationResult> results(cells.size());
    parallel_for(cells.size(), config.workers, [&](std::size_t j) {
        const auto& cell = cells[j];
        const auto& ds = sets[cell.city];
        const auto& id = ds.profile.city_id;
        const auto tag = is_federated(cell.mode) ? std::string(kFederatedTag) : id;
        const auto sampler =
            load_sampler(config, cell.mode, layout.model_weights(cell.mode, tag), load_scaler(layout.scaler(tag)));
        std::optional<link::LinkModel> link_model;
        if (fs::exists(layout.link_weights(id)) && fs::exists(layout.scaler(id)))
            link_model = link::LinkModel{io::load_network(layout.link_weights(id)), load_scaler(layout.scaler(id))};
        auto rng = make_rng(config.require_seed(), {hash_tag("eval"), hash_tag(id), hash_tag(to_string(cell.mode))});
        results[j] = metrics::evaluate_model(sampler, link_model ? &*link_model : nullptr, ds.test(), id,
                                             method_of(cell.mode), rng);
    });

    make_dir(layout.results_dir());
    metrics::MetricsReport report;
    for (std::size_t i = 0; i < sets.size(); ++i) {
        const auto& id = sets[i].profile.city_id;
        std::vector<metrics::LabeledDistribution> dists;
        std::vector<std::string> labels;
        for (std::size_t j = 0; j < cells.size(); ++j) {
            if (cells[j].city != i) continue;
            const auto& r = results[j];
            if (dists.empty()) {
                dists.push_back({"test", r.test_losses});
                labels.push_back("test");
            }
            dists.push_back({to_string(r.row.method), r.generated_losses});
            labels.push_back(to_string(r.row.method));
            report.push_back(r.row);
            log << "eval " << id << " " << to_string(r.row.method) << ": kl " << io::format_double(r.row.kl_divergence)
                << ", w1 " << io::format_double(r.row.wasserstein) << " dB over " << r.row.samples << " links";
            if (r.link_accuracy) log << ", link accuracy " << io::format_double(*r.link_accuracy);
            log << "\n";
        }
        if (dists.empty()) continue;
        const auto cdf_path = layout.cdf(id);
        metrics::write_cdf_csv(dists, cdf_path);
        auto script_path = cdf_path;
        script_path.replace_extension(".gp");
        write_text(script_path, metrics::cdf_plot_script(cdf_path.filename().string(), labels, "Path loss CDF, " + id));
    }
    metrics::write_report_csv(report, layout.report());
    log << "eval: " << report.size() << " rows -> " << layout.report().string() << "\n";
    return report;
}

namespace {

std::optional<double> final_loss(const fs::path& path, bool federated, const std::string& city) {
    if (!fs::exists(path)) return std::nullopt;
    std::istringstream in(read_text(path));
    std::string line;
    std::getline(in, line);
    std::optional<double> last;
    while (std::getline(in, line)) {
        const auto f = split_list(line);
        try {
            if (federated && f.size() == 4 && f[1] == city) last = std::stod(f[2]);
            if (!federated && f.size() == 2) last = std::stod(f[1]);
        } catch (const std::exception&) {
            throw ParseError(path.string() + ": bad loss value");
        }
    }
    return last;
}

std::optional<metrics::ReferenceValue> reference_for(const std::string& reference, metrics::Method method) {
    for (const auto& r : metrics::published_reference())
        if (reference == r.city && r.method == method) return r;
    return std::nullopt;
}

std::string optional_number(const std::optional<double>& v) { return v ? io::format_double(*v) : ""; }

std::string pad(std::string s, std::size_t width) {
    if (s.size() < width) s.append(width - s.size(), ' ');
    return s;
}

std::string fixed(double v, int precision) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(precision);
    out << v;
    return out.str();
}

}  // namespace

std::vector<SummaryRow> cmd_report(const ExperimentConfig& config, std::ostream& log) {
    config.validate();
    const Layout layout(config.out_dir);
    if (!fs::exists(layout.report()))
        throw ArgumentError("no results under " + layout.results_dir().string() + "; run eval first");
    const auto report = metrics::parse_report_csv(read_text(layout.report()));
    if (report.empty()) throw ArgumentError(layout.report().string() + " has no rows; run eval first");

    std::vector<SummaryRow> rows;
    for (const auto& c : config.cities) {
        for (auto mode : kAllModes) {
            const auto method = method_of(mode);
            const auto it = std::find_if(report.begin(), report.end(), [&](const auto& r) {
                return r.city == c.profile.city_id && r.method == method;
            });
            if (it == report.end()) continue;
            SummaryRow row;
            row.metrics = *it;
            const auto tag = is_federated(mode) ? std::string(kFederatedTag) : c.profile.city_id;
            row.final_train_loss = final_loss(layout.history(mode, tag), is_federated(mode), c.profile.city_id);
            row.reference = reference_for(c.reference, method);
            rows.push_back(row);
        }
    }
    for (const auto& r : report)
        if (std::none_of(config.cities.begin(), config.cities.end(),
                         [&](const auto& c) { return c.profile.city_id == r.city; }))
            throw ArgumentError("report row for unconfigured city '" + r.city + "'");

    std::ostringstream csv;
    csv << "city,method,kl,wasserstein,final_train_loss,reference_city,reference_kl,reference_wasserstein\n";
    for (const auto& r : rows) {
        csv << r.metrics.city << ',' << to_string(r.metrics.method) << ',' << io::format_double(r.metrics.kl_divergence)
            << ',' << io::format_double(r.metrics.wasserstein) << ',' << optional_number(r.final_train_loss) << ',';
        if (r.reference)
            csv << r.reference->city << ',' << io::format_double(r.reference->kl) << ','
                << io::format_double(r.reference->wasserstein);
        else
            csv << ",,";
        csv << "\n";
    }

    std::ostringstream text;
    text << pad("city", 10) << pad("method", 8) << pad("KL", 9) << pad("W1 (dB)", 10) << pad("train loss", 12)
         << "published (KL / W1)\n";
    for (const auto& r : rows) {
        text << pad(r.metrics.city, 10) << pad(to_string(r.metrics.method), 8) << pad(fixed(r.metrics.kl_divergence, 3), 9)
             << pad(fixed(r.metrics.wasserstein, 3), 10)
             << pad(r.final_train_loss ? fixed(*r.final_train_loss, 4) : "-", 12);
        if (r.reference)
            text << r.reference->city << " " << fixed(r.reference->kl, 2) << " / " << fixed(r.reference->wasserstein, 2);
        else
            text << "-";
        text << "\n";
    }
    text << "\nTrend (federated vs standalone, lowest W1 per family):\n";
    for (const auto& c : config.cities) {
        std::optional<double> best_fl, best_standalone;
        for (const auto& r : rows) {
            if (r.metrics.city != c.profile.city_id) continue;
            const bool fl = r.metrics.method == metrics::Method::fl_vae || r.metrics.method == metrics::Method::fl_gan;
            auto& best = fl ? best_fl : best_standalone;
            best = best ? std::min(*best, r.metrics.wasserstein) : r.metrics.wasserstein;
        }
        text << "  " << c.profile.city_id << ": ";
        if (best_fl && best_standalone)
            text << (*best_fl <= *best_standalone ? "federated <= standalone" : "federated > standalone") << " ("
                 << fixed(*best_fl, 3) << " vs " << fixed(*best_standalone, 3) << ")\n";
        else
            text << "incomplete (needs both federated and standalone rows)\n";
    }
    text << "\nPublished values were measured on ray-traced city data that is not available here;\n"
            "they are listed for context and are not expected to match the synthetic results.\n";

    write_text(layout.summary_csv(), csv.str());
    write_text(layout.summary_text(), text.str());
    log << text.str();
    return rows;
}

}  // namespace fedchan::exp
