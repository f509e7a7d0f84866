#include "fedq/fedsync.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <string>

#include "fedq/error.hpp"
#include "fedq/parallel.hpp"
#include "fedq/sampling.hpp"

namespace fedq {

void StepSizeSchedule::validate() const {
    if (kind == Kind::kConstant && !(eta > 0.0 && eta <= 1.0)) {
        throw ValidationError("step size: constant eta must lie in (0, 1]");
    }
    if (kind == Kind::kRescaledLinear && !(c_eta > 0.0)) {
        throw ValidationError("step size: c_eta must be positive");
    }
}

double step_size_at(const StepSizeSchedule& schedule, std::uint64_t t, double gamma) {
    if (t == 0) throw ValidationError("step_size_at: t starts at 1");
    if (schedule.kind == StepSizeSchedule::Kind::kConstant) return schedule.eta;
    return 1.0 / (1.0 + schedule.c_eta * (1.0 - gamma) * static_cast<double>(t));
}

CommSchedule::CommSchedule(std::vector<std::uint64_t> instants) : instants_(std::move(instants)) {
    if (instants_.empty()) throw ValidationError("communication schedule: no instants");
    if (instants_.front() < 1) throw ValidationError("communication schedule: instants start at 1");
    for (std::size_t i = 1; i < instants_.size(); ++i) {
        if (instants_[i] <= instants_[i - 1]) {
            throw ValidationError("communication schedule: instants must be strictly increasing");
        }
    }
}

CommSchedule CommSchedule::every_step(std::uint64_t total_steps) { return periodic(1, total_steps); }

CommSchedule CommSchedule::final_only(std::uint64_t total_steps) {
    if (total_steps == 0) throw ValidationError("communication schedule: T must be positive");
    return CommSchedule({total_steps});
}

CommSchedule CommSchedule::periodic(std::uint64_t period, std::uint64_t total_steps) {
    if (period == 0 || total_steps == 0) throw ValidationError("communication schedule: period and T must be positive");
    std::vector<std::uint64_t> instants;
    instants.reserve(total_steps / period + 1);
    for (std::uint64_t t = period; t <= total_steps; t += period) instants.push_back(t);
    if (instants.empty() || instants.back() != total_steps) instants.push_back(total_steps);
    return CommSchedule(std::move(instants));
}

std::uint64_t CommSchedule::rounds_through(std::uint64_t t) const noexcept {
    return static_cast<std::uint64_t>(std::upper_bound(instants_.begin(), instants_.end(), t) - instants_.begin());
}

void SyncRunConfig::validate() const {
    if (total_steps < 1) throw ValidationError("sync run: total_steps must be at least 1");
    if (batch_size < 1) throw ValidationError("sync run: batch_size must be at least 1");
    if (num_agents < 1) throw ValidationError("sync run: num_agents must be at least 1");
    if (num_agents > kMaxAgents) throw ValidationError("sync run: too many agents");
    if (total_steps >= kMaxStep) throw ValidationError("sync run: total_steps too large for stream keys");
    if (bits_per_real == 0) throw ValidationError("sync run: bits_per_real must be positive");
    step_size.validate();
    if (comm.num_rounds() == 0 || comm.total_steps() != total_steps) {
        throw ValidationError("sync run: the last communication instant must equal total_steps");
    }
}

std::vector<std::uint64_t> geometric_checkpoints(std::uint64_t total_steps, double factor) {
    if (total_steps == 0) throw ValidationError("checkpoints: T must be positive");
    if (!(factor > 1.0)) throw ValidationError("checkpoints: factor must exceed 1");
    std::vector<std::uint64_t> out;
    double next = 1.0;
    while (next < static_cast<double>(total_steps)) {
        const auto step = static_cast<std::uint64_t>(next);
        if (out.empty() || step > out.back()) out.push_back(step);
        next *= factor;
    }
    out.push_back(total_steps);
    return out;
}

namespace {

QTable agent_mean(std::span<const QTable> agents) {
    QTable mean(agents.front().num_states(), agents.front().num_actions());
    auto dst = mean.values();
    for (const QTable& q : agents) {
        auto src = q.values();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
    const double inv = 1.0 / static_cast<double>(agents.size());
    for (double& x : dst) x *= inv;
    return mean;
}

[[maybe_unused]] bool in_value_range(const QTable& q, double upper) {
    constexpr double kSlack = 1e-9;
    for (double x : q.values()) {
        if (x < -kSlack || x > upper + kSlack) return false;
    }
    return true;
}

}  // namespace

RunRecord run_sync(const TabularMdp& mdp, const SyncRunConfig& cfg, const QTable& q_star,
                   std::span<const std::uint64_t> checkpoints, const SyncObserver& observer) {
    cfg.validate();
    if (q_star.num_states() != mdp.num_states() || q_star.num_actions() != mdp.num_actions()) {
        throw DimensionError("run_sync: q_star shape does not match the MDP");
    }
    std::vector<std::uint64_t> marks(checkpoints.begin(), checkpoints.end());
    std::sort(marks.begin(), marks.end());
    marks.erase(std::unique(marks.begin(), marks.end()), marks.end());
    for (std::uint64_t c : marks) {
        if (c < 1 || c > cfg.total_steps) {
            throw ValidationError("run_sync: checkpoint " + std::to_string(c) + " outside [1, T]");
        }
    }

    const RngPlan plan(cfg.master_seed);
    const std::size_t pairs = mdp.num_pairs();
    const auto rewards = mdp.rewards();
    const double gamma = mdp.gamma();
    const double inv_batch = 1.0 / static_cast<double>(cfg.batch_size);
    const std::uint64_t bits_per_round = std::uint64_t{cfg.bits_per_real} * pairs;

    std::vector<QTable> agents(cfg.num_agents, QTable(mdp.num_states(), mdp.num_actions()));
    std::vector<double> acc(pairs);
    std::vector<double> v(mdp.num_states());
    auto instants = cfg.comm.instants();
    std::size_t next_instant = 0;
    std::size_t next_mark = 0;
    std::uint64_t rounds = 0;

    RunRecord record;
    record.num_pairs = pairs;
    record.rows.reserve(marks.size());

    for (std::uint64_t t = 1; t <= cfg.total_steps; ++t) {
        const double eta = step_size_at(cfg.step_size, t, gamma);
        for (std::uint32_t m = 0; m < cfg.num_agents; ++m) {
            QTable& q = agents[m];
            q.state_values_into(v);
            std::fill(acc.begin(), acc.end(), 0.0);
            RandomStream stream = plan.stream(m, t, StreamPurpose::kSyncMinibatch);
            accumulate_next_values(mdp, v, cfg.batch_size, stream, acc);
            auto values = q.values();
            for (std::size_t pair = 0; pair < pairs; ++pair) {
                const double target = rewards[pair] + gamma * (acc[pair] * inv_batch);
                values[pair] = (1.0 - eta) * values[pair] + eta * target;
            }
        }
        if (next_instant < instants.size() && instants[next_instant] == t) {
            ++next_instant;
            ++rounds;
            if (cfg.num_agents > 1) {
                const QTable mean = agent_mean(agents);
                for (QTable& q : agents) q = mean;
            }
        }
        assert(in_value_range(agents.front(), mdp.value_bound()));
        if (observer) observer(t, agents);
        if (next_mark < marks.size() && marks[next_mark] == t) {
            ++next_mark;
            RunRow row;
            row.step = t;
            row.samples_per_agent = cfg.batch_size * t;
            row.agent_error = sup_distance(agents.front(), q_star);
            row.averaged_error = cfg.num_agents > 1 ? sup_distance(agent_mean(agents), q_star) : row.agent_error;
            row.rounds = rounds;
            row.bits_per_agent = rounds * bits_per_round;
            record.rows.push_back(row);
        }
    }
    return record;
}

std::vector<SpeedupProbeRow> run_speedup_probe(const TabularMdp& mdp, const SyncRunConfig& base,
                                               std::span<const std::uint32_t> agent_counts, std::size_t num_seeds,
                                               double target_error, unsigned threads) {
    if (agent_counts.empty()) throw ValidationError("speedup probe: agent_counts is empty");
    if (num_seeds == 0) throw ValidationError("speedup probe: num_seeds must be positive");
    const QTable q_star = solve_q_star(mdp, 1e-10).q_star;
    const auto marks = geometric_checkpoints(base.total_steps);

    std::vector<RunRecord> records(agent_counts.size() * num_seeds);
    parallel_for(records.size(), threads, [&](std::size_t job) {
        SyncRunConfig cfg = base;
        cfg.num_agents = agent_counts[job / num_seeds];
        cfg.master_seed = base.master_seed + job % num_seeds;
        records[job] = run_sync(mdp, cfg, q_star, marks);
    });

    std::vector<SpeedupProbeRow> out;
    for (std::size_t i = 0; i < agent_counts.size(); ++i) {
        std::span<const RunRecord> group(records.data() + i * num_seeds, num_seeds);
        SpeedupProbeRow row;
        row.num_agents = agent_counts[i];
        for (const RunRecord& r : group) row.final_errors.push_back(r.rows.back().agent_error);
        const ErrorRate er = error_rate(row.final_errors);
        row.mean_final_error = er.mean;
        row.stderr_final_error = er.standard_error;
        row.samples_to_target = samples_to_target(mean_record(group), target_error);
        out.push_back(std::move(row));
    }
    return out;
}

}  // namespace fedq
