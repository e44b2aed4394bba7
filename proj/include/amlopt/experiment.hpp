#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "amlopt/aml.hpp"
#include "amlopt/controls.hpp"
#include "amlopt/enopt.hpp"
#include "amlopt/objective.hpp"
#include "amlopt/reservoir.hpp"

namespace amlopt {

/// Missing, unreadable or inconsistent run artifacts.
class ArtifactError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Algorithm { fom_enopt, aml_enopt_s, aml_enopt_v };
std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

/// Either a reservoir deck or one of the analytic objectives.
struct ObjectiveSpec {
    std::string deck;      // path, relative to the config file
    std::string analytic;  // "quadratic", "multimodal", "linear"
    std::size_t wells = 2;
    std::size_t steps = 3;
};

/// Initial control. Decks accept per-kind constants (injector rate,
/// concentration, producer rate) or one physical value per control type;
/// analytic objectives accept a constant or per-type unit-cube values.
struct InitialGuess {
    std::optional<double> injector_rate;
    std::optional<double> concentration;
    std::optional<double> producer_rate;
    std::optional<double> constant;
    std::vector<double> per_type;
};

struct RunConfig {
    ObjectiveSpec objective;
    Algorithm algorithm = Algorithm::fom_enopt;
    EnOptConfig enopt;
    AmlConfig aml;  // aml.enopt is replaced by `enopt` at run time
    InitialGuess initial;
    std::string output = "run";
    std::string baseline;  // artifact directory of a reference run, optional; relative to the working directory
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    std::filesystem::path base_dir;  // directory relative paths resolve against; not serialized

    std::filesystem::path resolve(const std::string& p) const;
    void validate() const;
};

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
/// Canonical JSON with every field written out.
std::string serialize_run_config(const RunConfig& cfg);

/// Objective on the unit cube together with the maps back to physical controls.
struct Problem {
    std::string name;
    std::shared_ptr<Objective> objective;
    ControlBounds bounds;           // unit cube
    ControlBounds physical_bounds;
    ControlVector initial;          // unit coordinates
    std::vector<std::string> control_names;
    std::shared_ptr<const ReservoirModel> model;  // null for analytic objectives

    ControlVector to_physical(const ControlVector& x) const;
};

Problem build_problem(const RunConfig& cfg);

struct RunOutcome {
    std::filesystem::path directory;
    double value = 0.0;
    std::size_t fom_evaluations = 0;
    std::string termination;
    bool certified = true;  // AML runs only
};

/// Runs the configured algorithm and writes config.json, trace.jsonl,
/// timing.jsonl, controls.csv, summary.json/.txt, certification.json (AML),
/// production.csv (decks) and STATUS into `out`. STATUS reads "complete" only
/// after every artifact was written.
RunOutcome run_experiment(const RunConfig& cfg, const std::filesystem::path& out);

/// Trace reconstruction from an artifact directory.
IterationTrace read_aml_trace(const std::filesystem::path& dir);
EnOptTrace read_enopt_trace(const std::filesystem::path& dir);

/// Summary row (values, iteration and evaluation counts, time) recomputed from trace.jsonl and timing.jsonl.
struct RunSummary {
    std::string method;
    std::string objective;
    std::size_t n_controls = 0;
    bool complete = false;
    double fom_value = 0.0;
    std::optional<double> surrogate_value;
    std::size_t outer_iterations = 0;
    std::optional<std::size_t> inner_iterations;
    std::size_t fom_evaluations = 0;
    std::optional<std::size_t> surrogate_evaluations;
    double total_seconds = 0.0;
    std::string termination;
};

RunSummary summarize_run(const std::filesystem::path& dir);

struct Comparison {
    RunSummary baseline;
    RunSummary candidate;
    double npv_ratio = 1.0;         // candidate / baseline
    double evaluation_ratio = 1.0;  // baseline FOM evals / candidate FOM evals
    double speedup = 1.0;           // baseline time / candidate time
};

/// Refuses runs on different objectives.
Comparison compare_summaries(const RunSummary& baseline, const RunSummary& candidate);
Comparison compare_runs(const std::filesystem::path& baseline, const std::filesystem::path& candidate);

std::string format_summary_table(const std::vector<RunSummary>& rows, const std::optional<Comparison>& cmp = {});
std::string comparison_json(const Comparison& c);

/// Long-format CSVs for the convergence, control and production figures:
/// npv_iterations.csv, controls.csv, production.csv.
void emit_plot_data(const std::vector<std::filesystem::path>& runs, const std::filesystem::path& out);

/// Deck check: validation, one simulation at constant controls, conservation report.
struct DeckReport {
    std::string name;
    std::size_t cells = 0;
    std::size_t wells = 0;
    std::size_t controls = 0;
    double pore_volume = 0.0;  // m3
    double value = 0.0;
    double water_residual = 0.0;
    double polymer_residual = 0.0;
    double min_saturation = 0.0;
    double max_saturation = 0.0;
    bool conservative = false;
};

DeckReport check_deck(const std::filesystem::path& deck, double injector_rate, double concentration,
                      double producer_rate);

}  // namespace amlopt
