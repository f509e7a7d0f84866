#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedq/mdp.hpp"
#include "fedq/rng.hpp"

namespace fedq {

/// One realization of the generative model: a next state for every (s, a).
struct SampleMatrix {
    std::size_t num_states = 0;
    std::size_t num_actions = 0;
    std::vector<std::uint32_t> next_state;  // row-major [s][a]

    std::uint32_t operator()(std::size_t s, std::size_t a) const noexcept { return next_state[s * num_actions + a]; }
};

/// Draws every coordinate by inverse CDF, consuming exactly one uniform per
/// (s, a) pair in row-major order.
SampleMatrix draw_sample(const TabularMdp& mdp, RandomStream& stream);

/// out(s, a) = r(s, a) + gamma * max_a' q(z(s, a), a').
QTable sample_bellman(const TabularMdp& mdp, const QTable& q, const SampleMatrix& z);

/// Mean of `batch_size` independent sample Bellman operators at q.
QTable minibatch_bellman(const TabularMdp& mdp, const QTable& q, std::size_t batch_size, RandomStream& stream);

// Fused kernels. Each call draws `num_draws` sample matrices from `stream` in
// exactly the order draw_sample would, without materializing them.

/// acc[pair] += sum over draws of values[z(pair)].
void accumulate_next_values(const TabularMdp& mdp, std::span<const double> values, std::size_t num_draws,
                            RandomStream& stream, std::span<double> acc);

/// acc[pair] += sum over draws of (values[z(pair)] - baseline[z(pair)]), both
/// evaluated on the same draw.
void accumulate_next_differences(const TabularMdp& mdp, std::span<const double> values,
                                 std::span<const double> baseline, std::size_t num_draws, RandomStream& stream,
                                 std::span<double> acc);

}  // namespace fedq
