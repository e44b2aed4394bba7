// amlopt: run, compare and inspect ensemble optimization experiments.

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "amlopt/errors.hpp"
#include "amlopt/experiment.hpp"

namespace fs = std::filesystem;

namespace {

int cmd_run(const std::string& config, std::optional<std::uint64_t> seed, std::optional<std::size_t> workers,
            const std::string& out) {
    amlopt::RunConfig cfg = amlopt::load_run_config(config);
    if (seed) cfg.seed = *seed;
    if (workers) cfg.workers = *workers;
    const fs::path dir = out.empty() ? fs::path(cfg.output) : fs::path(out);
    const amlopt::RunOutcome r = amlopt::run_experiment(cfg, dir);
    std::ifstream summary(dir / "summary.txt");
    std::cout << summary.rdbuf();
    std::cout << fmt::format("artifacts: {}\n", dir.string());
    if (!r.certified) {
        std::cerr << "error: trace certification failed, see " << (dir / "certification.json").string() << "\n";
        return 3;
    }
    return 0;
}

int cmd_compare(const std::string& a, const std::string& b, const std::string& json_out) {
    const amlopt::Comparison c = amlopt::compare_runs(a, b);
    std::cout << amlopt::format_summary_table({c.baseline, c.candidate}, c);
    std::cout << fmt::format("FOM-evaluation ratio: {:.4f}\nwall-time speedup: {:.4f}\n", c.evaluation_ratio, c.speedup);
    if (!json_out.empty()) {
        std::ofstream f(json_out);
        if (!f) throw amlopt::ArtifactError("cannot write " + json_out);
        f << amlopt::comparison_json(c);
    }
    return 0;
}

int cmd_validate_deck(std::string deck, const std::string& config, double inj, double conc, double prod) {
    if (deck.empty() && config.empty()) throw amlopt::ParameterError("validate-deck needs DECK or --config");
    if (deck.empty()) {
        const amlopt::RunConfig cfg = amlopt::load_run_config(config);
        if (cfg.objective.deck.empty()) throw amlopt::ParameterError("config does not reference a deck");
        deck = cfg.resolve(cfg.objective.deck).string();
    }
    const amlopt::DeckReport r = amlopt::check_deck(deck, inj, conc, prod);
    std::cout << fmt::format(
        "deck            {}\ncells           {}\nwells           {}\ncontrols        {}\npore volume     {:.6e} m3\n"
        "NPV (constant)  {:.6e}\nwater residual  {:.3e}\npolymer resid.  {:.3e}\nsaturation      [{:.6f}, {:.6f}]\n"
        "conservative    {}\n",
        r.name, r.cells, r.wells, r.controls, r.pore_volume, r.value, r.water_residual, r.polymer_residual,
        r.min_saturation, r.max_saturation, r.conservative ? "yes" : "no");
    if (!r.conservative) {
        std::cerr << "error: deck simulation violates the conservation or saturation bounds\n";
        return 4;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("amlopt"));
    spdlog::set_pattern("[%H:%M:%S] %^%l%$ %v");

    CLI::App app{"Adaptive machine-learning ensemble optimization for well controls"};
    app.require_subcommand(1);
    bool verbose = false;
    bool quiet = false;
    app.add_flag("-v,--verbose", verbose, "debug logging");
    app.add_flag("-q,--quiet", quiet, "warnings and errors only");

    auto* run = app.add_subcommand("run", "run one experiment and write its artifacts");
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::string out;
    run->add_option("--config", config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "global seed, overrides the config");
    run->add_option("--workers", workers, "concurrent FOM evaluations, overrides the config")
        ->check(CLI::PositiveNumber);
    run->add_option("--out", out, "artifact directory, overrides the config");

    auto* compare = app.add_subcommand("compare", "compare a baseline run with a candidate run");
    std::string run_a, run_b, json_out;
    compare->add_option("baseline", run_a, "baseline artifact directory")->required();
    compare->add_option("candidate", run_b, "candidate artifact directory")->required();
    compare->add_option("--json", json_out, "also write the comparison as JSON");

    auto* validate = app.add_subcommand("validate-deck", "load a deck and simulate constant controls");
    std::string deck, deck_config;
    double inj = 700.0, conc = 0.5, prod = 150.0;
    validate->add_option("deck", deck, "deck file")->check(CLI::ExistingFile);
    validate->add_option("--config", deck_config, "take the deck from a run configuration")->check(CLI::ExistingFile);
    validate->add_option("--injector-rate", inj, "injector rate (sm3/day)")->capture_default_str();
    validate->add_option("--concentration", conc, "polymer concentration (kg/sm3)")->capture_default_str();
    validate->add_option("--producer-rate", prod, "producer rate (sm3/day)")->capture_default_str();

    auto* plots = app.add_subcommand("emit-plots", "write long-format CSVs for plotting");
    std::vector<std::string> runs;
    std::string plot_out = "plots";
    plots->add_option("runs", runs, "artifact directories")->required();
    plots->add_option("--out", plot_out, "output directory")->capture_default_str();

    CLI11_PARSE(app, argc, argv);
    if (verbose) spdlog::set_level(spdlog::level::debug);
    if (quiet) spdlog::set_level(spdlog::level::warn);

    try {
        if (*run) return cmd_run(config, seed, workers, out);
        if (*compare) return cmd_compare(run_a, run_b, json_out);
        if (*validate) return cmd_validate_deck(deck, deck_config, inj, conc, prod);
        if (*plots) {
            amlopt::emit_plot_data({runs.begin(), runs.end()}, plot_out);
            std::cout << fmt::format("wrote {}\n", plot_out);
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
