#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace fedq {

/// Exact communication and sample counts, per agent.
struct CommLedger {
    std::uint64_t rounds = 0;
    std::uint64_t bits_per_agent = 0;
    std::uint64_t samples_per_agent_per_sa = 0;

    CommLedger& operator+=(const CommLedger& other) noexcept {
        rounds += other.rounds;
        bits_per_agent += other.bits_per_agent;
        samples_per_agent_per_sa += other.samples_per_agent_per_sa;
        return *this;
    }
    friend bool operator==(const CommLedger&, const CommLedger&) = default;
};

/// One checkpoint of a run. Sample, round and bit columns are cumulative and per agent.
struct RunRow {
    std::uint64_t step = 0;
    std::uint64_t samples_per_agent = 0;   // per (s, a) pair
    double agent_error = 0.0;              // ||Q^0 - Q*||_inf for agent 0 (the shared iterate for Fed-DVR-Q)
    double averaged_error = 0.0;           // ||mean_m Q^m - Q*||_inf
    std::uint64_t rounds = 0;
    std::uint64_t bits_per_agent = 0;
};

struct RunRecord {
    std::size_t num_pairs = 0;   // |S||A|
    std::vector<RunRow> rows;
};

struct ErrorRate {
    double mean = 0.0;
    double standard_error = 0.0;
};

/// Mean and normal-approximation standard error (sample std / sqrt(n)).
ErrorRate error_rate(std::span<const double> errors_over_seeds);

/// Smallest checkpointed N at which agent_error <= target, returned as SC =
/// N |S||A|; empty if the record never reaches the target.
std::optional<std::uint64_t> samples_to_target(const RunRecord& record, double target);

/// Seed-mean error curve of records sharing the same checkpoints.
RunRecord mean_record(std::span<const RunRecord> records);

struct TrendFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

/// Ordinary least squares of ys on xs.
TrendFit linear_fit(std::span<const double> xs, std::span<const double> ys);

/// OLS on (log x, log y). Inputs must be positive.
TrendFit loglog_fit(std::span<const double> xs, std::span<const double> ys);

}  // namespace fedq
