#pragma once

// Experiment harness: configuration, the studies behind each CLI subcommand,
// and CSV/JSON emission. Every study returns its tables in memory; writing
// them is a separate step so tests can inspect results without touching disk.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedq/feddvr.hpp"
#include "fedq/fedsync.hpp"
#include "fedq/mdp.hpp"
#include "fedq/metrics.hpp"

namespace fedq {

inline constexpr const char* kVersion = "0.3.0";
inline constexpr int kConfigSchemaVersion = 1;

enum class ExperimentKind { kSolve, kCompare, kSpeedup, kHorizon, kLowerbound, kSingle };

ExperimentKind parse_kind(const std::string& name);
std::string kind_name(ExperimentKind kind);

struct MdpSpec {
    std::string builtin = "experiment";   // "experiment" | "hard"; ignored when path is set
    double gamma = 0.9;
    std::optional<double> p;              // experiment instance only; defaults to the hard-instance p
    std::size_t num_copies = 1;           // hard instance only
    std::size_t num_actions_state1 = 2;   // hard instance only
    std::string path;                     // MDP JSON file
};

struct DvrBlock {
    double eps = 0.1;
    double delta = 0.05;
    double eta = 0.5;
    double alpha = 1.0;
    double scale_l = 1.0;
    double scale_b = 1.0;
    std::uint64_t min_l = 1;
    std::uint64_t min_b = 1;
};

struct SyncBlock {
    std::uint64_t total_steps = 1000;     // 0 = match the Fed-DVR-Q per-agent sample budget (compare only)
    std::uint64_t batch_size = 1;
    std::string step_kind = "constant";   // "constant" | "rescaled_linear"
    std::optional<double> eta;            // empty: 4 / ((1 - gamma) T)
    double c_eta = 1.0;
    std::string comm = "period";          // "every" | "final" | "period"
    std::uint64_t period = 10;
    unsigned bits_per_real = 64;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::kSingle;
    MdpSpec mdp;
    std::optional<DvrBlock> dvr;
    std::optional<SyncBlock> sync;
    std::vector<std::uint32_t> agents{5};
    std::vector<double> gammas;
    std::uint64_t master_seed = 1;
    std::size_t num_seeds = 1;
    std::vector<std::uint64_t> seeds;     // explicit list; overrides master_seed/num_seeds
    std::optional<double> target_error;   // defaults to dvr.eps
    double tol = 1e-10;                   // value-iteration tolerance for Q*
    double checkpoint_factor = 2.0;
    bool early_stop = false;              // dvr: stop once the target is reached
    bool execute = false;                 // horizon: also run each point and check the ledger
    unsigned threads = 1;

    std::vector<std::uint64_t> seed_list() const;
};

/// Defaults for each study; `single` defaults to a Fed-DVR-Q run.
ExperimentConfig default_config(ExperimentKind kind);

/// Overlays `doc` on the defaults of its "experiment" kind (or `fallback`).
/// Unknown or mistyped fields raise ValidationError naming the field.
ExperimentConfig parse_config(const nlohmann::json& doc, std::optional<ExperimentKind> fallback = std::nullopt);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

TabularMdp build_mdp(const MdpSpec& spec);
/// Builtin spec with gamma replaced (the hard p follows gamma when p is unset).
TabularMdp build_mdp(const MdpSpec& spec, double gamma);

DvrSettings dvr_settings(const DvrBlock& block, double gamma, std::uint32_t num_agents, std::size_t num_pairs);
SyncRunConfig sync_config(const SyncBlock& block, double gamma, std::uint32_t num_agents, std::uint64_t seed);

struct CsvTable {
    std::string name;                      // file stem, e.g. "speedup"
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

std::string format_real(double x);
std::string to_csv(const CsvTable& table);

struct StudyOutput {
    std::vector<CsvTable> tables;
    nlohmann::json summary;                // written as <kind>_summary.json
};

struct SolveOutput {
    SolveReport report;
    std::optional<std::vector<double>> closed_form;   // builtin instances only
    nlohmann::json document;
};

SolveOutput study_solve(const ExperimentConfig& cfg);

/// Fed-DVR-Q versus the intermittent-averaging baseline. compare.csv:
/// algo, seed, samples_per_agent, error, bits_per_agent, rounds.
StudyOutput study_compare(const ExperimentConfig& cfg);

struct SpeedupPoint {
    std::uint32_t num_agents = 0;
    std::vector<std::optional<std::uint64_t>> sc;   // per seed
    std::optional<double> mean_sc;                  // over seeds that reached the target
    std::size_t reached = 0;
    std::uint64_t rounds = 0;
    std::uint64_t bits = 0;
};

/// speedup.csv: M, seed, sc, rounds, bits. Rounds and bits are the planned
/// ledger of the configured run; sc is |S||A| times the per-agent samples at
/// the first epoch whose error is at most the target (empty if never).
StudyOutput study_speedup(const ExperimentConfig& cfg, std::vector<SpeedupPoint>* points = nullptr,
                          std::optional<TrendFit>* fit = nullptr);

struct HorizonPoint {
    double gamma = 0.0;
    double inv_horizon = 0.0;   // 1 / (1 - gamma)
    std::uint64_t rounds = 0;
    std::uint64_t bits = 0;
};

/// horizon.csv: gamma, inv_horizon, rounds, bits.
StudyOutput study_horizon(const ExperimentConfig& cfg, std::vector<HorizonPoint>* points = nullptr,
                          TrendFit* fit = nullptr);

struct LowerboundSummary {
    std::vector<SpeedupProbeRow> dense;    // averaging every step
    std::vector<SpeedupProbeRow> sparse;   // averaging only at T
    double dense_ratio = 0.0;              // err(M = max) / err(M = min)
    double sparse_ratio = 0.0;
};

/// lowerbound.csv: schedule, M, seed, final_error.
StudyOutput study_lowerbound(const ExperimentConfig& cfg, LowerboundSummary* summary = nullptr);

/// One algorithm over seeds. single.csv: algo, seed, step, samples_per_agent,
/// error, averaged_error, rounds, bits_per_agent, max_compressor_input, bound.
StudyOutput study_single(const ExperimentConfig& cfg, std::vector<DvrRun>* dvr_runs = nullptr);

/// Writes each table as <out>/<name>.csv with a <name>.csv.meta.json sidecar
/// holding the config, version and seeds, plus <kind>_summary.json.
void write_study(const StudyOutput& output, const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace fedq
