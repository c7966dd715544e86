#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fedchan/errors.hpp"
#include "fedchan/experiment.hpp"

namespace {

std::string one_line(std::string s) {
    for (auto& ch : s)
        if (ch == '\n' || ch == '\r') ch = ' ';
    return s;
}

int fail(const std::string& kind, const std::string& message) {
    std::cerr << "error: " << kind << ": " << one_line(message) << std::endl;
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated generative channel modelling: synthetic UAV link data, link and path models."};
    app.require_subcommand(1);
    app.fallthrough();  // global options may follow the subcommand

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    bool paper_scale = false;
    std::optional<unsigned> workers;
    app.add_option("--config", config_path, "INI experiment file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Experiment seed (overrides the config file)");
    app.add_option("--out", out_dir, "Output directory (overrides the config file)");
    app.add_flag("--paper-scale", paper_scale, "Use the published link counts per city");
    app.add_option("--workers", workers, "Threads for per-city and per-client work")->check(CLI::PositiveNumber);

    auto* gen_data = app.add_subcommand("gen-data", "Generate per-city datasets with a train/test split");
    auto* train_link = app.add_subcommand("train-link", "Train one link-state classifier per city");
    auto* train = app.add_subcommand("train", "Train a standalone or federated path model");
    std::string mode;
    std::optional<std::string> city;
    train->add_option("--mode", mode, "vae, gan, fl-vae or fl-gan")->required();
    train->add_option("--city", city, "City for standalone modes");
    auto* eval = app.add_subcommand("eval", "Compare generated and held-out path-loss distributions");
    auto* report = app.add_subcommand("report", "Summarize metrics and training histories");
    auto* show_config = app.add_subcommand("show-config", "Print the effective configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        return fail("usage", e.what());
    }

    try {
        auto config = fedchan::exp::default_config();
        if (!config_path.empty()) fedchan::exp::apply_ini_file(config, config_path);
        if (paper_scale) fedchan::exp::apply_paper_scale(config);
        if (seed) config.seed = *seed;
        if (!out_dir.empty()) config.out_dir = out_dir;
        if (workers) config.workers = *workers;

        if (*gen_data) fedchan::exp::cmd_gen_data(config, std::cout);
        else if (*train_link) fedchan::exp::cmd_train_link(config, std::cout);
        else if (*train) fedchan::exp::cmd_train(config, fedchan::exp::train_mode_from_string(mode), city, std::cout);
        else if (*eval) fedchan::exp::cmd_eval(config, std::cout);
        else if (*report) fedchan::exp::cmd_report(config, std::cout);
        else if (*show_config) std::cout << fedchan::exp::to_ini(config);
    } catch (const fedchan::Error& e) {
        return fail(e.kind(), e.what());
    } catch (const std::exception& e) {
        return fail("internal", e.what());
    }
    return 0;
}
