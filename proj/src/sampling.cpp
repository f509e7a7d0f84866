#include "fedq/sampling.hpp"

#include <string>

#include "fedq/error.hpp"

namespace fedq {

namespace {

void check_shape(const TabularMdp& mdp, const QTable& q, const char* who) {
    if (q.num_states() != mdp.num_states() || q.num_actions() != mdp.num_actions()) {
        throw DimensionError(std::string(who) + ": QTable shape does not match the MDP");
    }
}

}  // namespace

SampleMatrix draw_sample(const TabularMdp& mdp, RandomStream& stream) {
    SampleMatrix z{mdp.num_states(), mdp.num_actions(), std::vector<std::uint32_t>(mdp.num_pairs())};
    for (std::size_t pair = 0; pair < mdp.num_pairs(); ++pair) {
        z.next_state[pair] = mdp.sample_next(pair, stream.uniform());
    }
    return z;
}

QTable sample_bellman(const TabularMdp& mdp, const QTable& q, const SampleMatrix& z) {
    check_shape(mdp, q, "sample_bellman");
    if (z.num_states != mdp.num_states() || z.num_actions != mdp.num_actions() ||
        z.next_state.size() != mdp.num_pairs()) {
        throw DimensionError("sample_bellman: sample matrix shape does not match the MDP");
    }
    const std::vector<double> v = q.state_values();
    QTable out(mdp.num_states(), mdp.num_actions());
    auto dst = out.values();
    for (std::size_t pair = 0; pair < mdp.num_pairs(); ++pair) {
        const std::uint32_t next = z.next_state[pair];
        if (next >= mdp.num_states()) {
            throw ValidationError("sample_bellman: invalid next state " + std::to_string(next) + " at pair " +
                                  std::to_string(pair));
        }
        dst[pair] = mdp.rewards()[pair] + mdp.gamma() * v[next];
    }
    return out;
}

QTable minibatch_bellman(const TabularMdp& mdp, const QTable& q, std::size_t batch_size, RandomStream& stream) {
    check_shape(mdp, q, "minibatch_bellman");
    if (batch_size == 0) throw ValidationError("minibatch_bellman: batch_size must be at least 1");
    const std::vector<double> v = q.state_values();
    std::vector<double> acc(mdp.num_pairs(), 0.0);
    accumulate_next_values(mdp, v, batch_size, stream, acc);

    QTable out(mdp.num_states(), mdp.num_actions());
    auto dst = out.values();
    const double scale = mdp.gamma() / static_cast<double>(batch_size);
    for (std::size_t pair = 0; pair < mdp.num_pairs(); ++pair) {
        dst[pair] = mdp.rewards()[pair] + (batch_size == 1 ? mdp.gamma() * acc[pair] : scale * acc[pair]);
    }
    return out;
}

void accumulate_next_values(const TabularMdp& mdp, std::span<const double> values, std::size_t num_draws,
                            RandomStream& stream, std::span<double> acc) {
    const std::size_t pairs = mdp.num_pairs();
    for (std::size_t draw = 0; draw < num_draws; ++draw) {
        for (std::size_t pair = 0; pair < pairs; ++pair) {
            acc[pair] += values[mdp.sample_next(pair, stream.uniform())];
        }
    }
}

void accumulate_next_differences(const TabularMdp& mdp, std::span<const double> values,
                                 std::span<const double> baseline, std::size_t num_draws, RandomStream& stream,
                                 std::span<double> acc) {
    const std::size_t pairs = mdp.num_pairs();
    for (std::size_t draw = 0; draw < num_draws; ++draw) {
        for (std::size_t pair = 0; pair < pairs; ++pair) {
            const std::uint32_t next = mdp.sample_next(pair, stream.uniform());
            acc[pair] += values[next] - baseline[next];
        }
    }
}

}  // namespace fedq
