#pragma once

// Fed-DVR-Q: federated variance-reduced Q-learning with quantized uploads.
// A run is a sequence of epochs. Each epoch re-centers at the previous
// estimate, builds a large-sample estimate of the Bellman operator there, and
// then runs I variance-reduced iterations whose updates are quantized before
// averaging.

#include <cstdint>
#include <optional>
#include <vector>

#include "fedq/compression.hpp"
#include "fedq/mdp.hpp"
#include "fedq/metrics.hpp"
#include "fedq/rng.hpp"

namespace fedq {

/// Inputs from which every run parameter is derived.
struct DvrSettings {
    double gamma = 0.9;
    double eps = 0.1;       // target accuracy, in (0, 1]
    double delta = 0.05;    // failure probability, in (0, 1)
    double eta = 0.5;       // step size, in (0, 1)
    std::uint32_t num_agents = 1;
    std::size_t num_pairs = 1;   // |S||A|
    double alpha = 1.0;          // fraction of coordinates sent per message
    double scale_l = 1.0;        // multiplier on the re-centering sample sizes
    double scale_b = 1.0;        // multiplier on the batch size
    std::uint64_t min_l = 1;     // floor on every L_k after scaling
    std::uint64_t min_b = 1;     // floor on B after scaling

    void validate() const;
};

struct DvrParams {
    DvrSettings settings;
    std::uint32_t num_epochs = 0;         // K
    std::uint32_t k0 = 0;                 // K0
    std::uint64_t iters_per_epoch = 0;    // I
    std::uint64_t batch_size = 0;         // B
    unsigned bits = 0;                    // J
    double log_factor = 0.0;              // log(8 K I |S||A| / delta)
    std::vector<std::uint64_t> recentering_sizes;   // L_1..L_K
    std::vector<double> bounds;                     // D_1..D_K

    std::uint64_t recentering_size(std::uint32_t k) const { return recentering_sizes.at(k - 1); }
    double bound(std::uint32_t k) const { return bounds.at(k - 1); }
};

/// Ceiling that ignores floating-point noise of relative size 1e-12, so that
/// e.g. 2 / (0.5 * (1 - 0.9)) is 40 rather than 41.
std::uint64_t ceil_robust(double x);

DvrParams derive_params(const DvrSettings& settings);

/// Per-epoch inputs to RefineEstimate.
struct EpochSettings {
    std::uint32_t epoch = 1;          // k, part of the stream keys
    std::uint64_t batch_size = 1;     // B
    std::uint64_t iterations = 1;     // I
    std::uint64_t recentering = 1;    // L
    double bound = 1.0;               // D
    unsigned bits = 8;                // J
    double eta = 0.5;
    double alpha = 1.0;
};

EpochSettings epoch_settings(const DvrParams& params, std::uint32_t k);

struct EpochReport {
    std::uint32_t epoch = 0;
    double error = 0.0;                // ||Q^(k) - Q*||_inf, NaN if no reference was given
    CommLedger ledger;                 // this epoch only, per agent
    double max_compressor_input = 0.0; // largest sup-norm handed to the quantizer
    double bound = 0.0;                // D_k
};

struct RecenterResult {
    QTable estimate;                   // ~T(q_bar)
    CommLedger ledger;
    double max_compressor_input = 0.0;
};

/// Every agent averages ceil(L / M) sample Bellman operators at q_bar and
/// uploads the quantized difference to q_bar; the server adds the mean of the
/// decoded messages back onto q_bar.
RecenterResult estimate_recentered_operator(const TabularMdp& mdp, const QTable& q_bar, std::uint64_t recentering,
                                            std::uint32_t num_agents, const QuantizerConfig& cfg, double alpha,
                                            const RngPlan& plan, std::uint32_t epoch);

struct RefineResult {
    QTable q;
    EpochReport report;
};

/// One epoch. The same minibatch drives both operator evaluations in every
/// variance-reduced update.
RefineResult refine_estimate(const TabularMdp& mdp, const QTable& q_bar, const EpochSettings& epoch,
                             std::uint32_t num_agents, const RngPlan& plan, const QTable* q_star = nullptr);

struct DvrRunOptions {
    /// Stop after the first epoch whose error is at most this value.
    std::optional<double> stop_below;
};

struct DvrRun {
    QTable q;
    std::vector<EpochReport> epochs;
    CommLedger total;
};

DvrRun run_fed_dvr(const TabularMdp& mdp, const DvrParams& params, const QTable& q_star, const RngPlan& plan,
                   const DvrRunOptions& options = {});

/// Cumulative per-epoch rows, one per completed epoch.
RunRecord to_run_record(const DvrRun& run, std::size_t num_pairs);

/// Ledger of a full K-epoch run computed from the parameters alone.
CommLedger planned_ledger(const DvrParams& params);

/// Right-hand sides of the guarantee on rounds and bits, and the
/// problem-dependent factor the sample bound multiplies by a universal constant.
struct ComplexityBounds {
    double rounds = 0.0;
    double bits = 0.0;
    double sample_shape = 0.0;
};

ComplexityBounds complexity_bounds(const DvrParams& params);

}  // namespace fedq
