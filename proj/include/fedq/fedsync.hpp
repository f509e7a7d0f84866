#pragma once

// Generic intermittent-communication federated Q-learning. Every agent runs
// minibatch Q-learning on its own generative model and the agents replace
// their iterates with the exact average at the instants of a communication
// schedule.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "fedq/mdp.hpp"
#include "fedq/metrics.hpp"
#include "fedq/rng.hpp"

namespace fedq {

struct StepSizeSchedule {
    enum class Kind { kConstant, kRescaledLinear };

    Kind kind = Kind::kConstant;
    double eta = 0.1;     // constant kind
    double c_eta = 1.0;   // rescaled kind

    static StepSizeSchedule constant(double eta) { return {Kind::kConstant, eta, 1.0}; }
    static StepSizeSchedule rescaled_linear(double c_eta) { return {Kind::kRescaledLinear, 1.0, c_eta}; }

    void validate() const;
};

/// eta for constant schedules, 1 / (1 + c_eta (1 - gamma) t) for rescaled ones.
double step_size_at(const StepSizeSchedule& schedule, std::uint64_t t, double gamma);

/// Strictly increasing averaging instants ending at T.
class CommSchedule {
public:
    CommSchedule() = default;
    explicit CommSchedule(std::vector<std::uint64_t> instants);

    static CommSchedule every_step(std::uint64_t total_steps);
    static CommSchedule final_only(std::uint64_t total_steps);
    /// Instants tau, 2 tau, ..., plus T if tau does not divide T.
    static CommSchedule periodic(std::uint64_t period, std::uint64_t total_steps);

    std::span<const std::uint64_t> instants() const noexcept { return instants_; }
    std::uint64_t total_steps() const noexcept { return instants_.empty() ? 0 : instants_.back(); }
    std::size_t num_rounds() const noexcept { return instants_.size(); }
    /// |{t_r <= t}|.
    std::uint64_t rounds_through(std::uint64_t t) const noexcept;

private:
    std::vector<std::uint64_t> instants_;
};

struct SyncRunConfig {
    std::uint64_t total_steps = 1;   // T
    std::uint64_t batch_size = 1;    // B
    std::uint32_t num_agents = 1;    // M
    StepSizeSchedule step_size;
    CommSchedule comm;
    std::uint64_t master_seed = 0;
    /// Bits charged per transmitted real; exact averaging sends full reals.
    unsigned bits_per_real = 64;

    void validate() const;
};

/// Optional per-step hook, called after step t with every agent's table.
using SyncObserver = std::function<void(std::uint64_t t, std::span<const QTable> agents)>;

/// Checkpoints at 1, 2, 4, ... and T.
std::vector<std::uint64_t> geometric_checkpoints(std::uint64_t total_steps, double factor = 2.0);

RunRecord run_sync(const TabularMdp& mdp, const SyncRunConfig& cfg, const QTable& q_star,
                   std::span<const std::uint64_t> checkpoints, const SyncObserver& observer = {});

/// Final-error summary for one agent count of a speedup probe.
struct SpeedupProbeRow {
    std::uint32_t num_agents = 0;
    double mean_final_error = 0.0;
    double stderr_final_error = 0.0;
    /// Smallest checkpointed SC (|S||A| N) where the seed-mean error reaches the target.
    std::optional<std::uint64_t> samples_to_target;
    std::vector<double> final_errors;   // one per seed
};

/// Runs `base` for every agent count over seeds base.master_seed + i.
/// `threads` = 0 uses the hardware concurrency.
std::vector<SpeedupProbeRow> run_speedup_probe(const TabularMdp& mdp, const SyncRunConfig& base,
                                               std::span<const std::uint32_t> agent_counts, std::size_t num_seeds,
                                               double target_error, unsigned threads = 1);

}  // namespace fedq
