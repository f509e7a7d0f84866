#include "fedq/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fedq/error.hpp"

namespace fedq {

namespace {

constexpr double kRowSumTolerance = 1e-12;

std::string pair_label(std::size_t s, std::size_t a) {
    return "(s=" + std::to_string(s) + ", a=" + std::to_string(a) + ")";
}

}  // namespace

double QTable::state_value(std::size_t s) const noexcept {
    const double* row = values_.data() + s * num_actions_;
    return *std::max_element(row, row + num_actions_);
}

std::vector<double> QTable::state_values() const {
    std::vector<double> v(num_states_);
    state_values_into(v);
    return v;
}

void QTable::state_values_into(std::span<double> out) const noexcept {
    for (std::size_t s = 0; s < num_states_; ++s) out[s] = state_value(s);
}

std::size_t QTable::greedy_action(std::size_t s) const noexcept {
    const double* row = values_.data() + s * num_actions_;
    return static_cast<std::size_t>(std::max_element(row, row + num_actions_) - row);
}

double sup_norm(std::span<const double> v) noexcept {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double sup_distance(const QTable& a, const QTable& b) {
    if (!a.same_shape(b)) throw DimensionError("sup_distance: QTable shapes differ");
    double m = 0.0;
    auto va = a.values();
    auto vb = b.values();
    for (std::size_t i = 0; i < va.size(); ++i) m = std::max(m, std::abs(va[i] - vb[i]));
    return m;
}

TabularMdp::TabularMdp(std::size_t num_states, std::size_t num_actions, double gamma,
                       std::vector<double> rewards, std::vector<double> transitions)
    : num_states_(num_states),
      num_actions_(num_actions),
      gamma_(gamma),
      rewards_(std::move(rewards)),
      transitions_(std::move(transitions)) {
    if (num_states_ == 0 || num_actions_ == 0) throw ValidationError("MDP must have at least one state and one action");
    if (num_states_ > std::numeric_limits<std::uint32_t>::max() / 2) throw ValidationError("MDP: too many states");
    if (!(gamma_ > 0.0 && gamma_ < 1.0)) throw ValidationError("MDP: gamma must lie in (0, 1), got " + std::to_string(gamma_));
    if (rewards_.size() != num_pairs()) {
        throw DimensionError("MDP: expected " + std::to_string(num_pairs()) + " rewards, got " +
                             std::to_string(rewards_.size()));
    }
    if (transitions_.size() != num_pairs() * num_states_) {
        throw DimensionError("MDP: expected " + std::to_string(num_pairs() * num_states_) +
                             " transition entries, got " + std::to_string(transitions_.size()));
    }
    for (std::size_t s = 0; s < num_states_; ++s) {
        for (std::size_t a = 0; a < num_actions_; ++a) {
            const double r = reward(s, a);
            if (!(r >= 0.0 && r <= 1.0)) {
                throw ValidationError("MDP: reward at " + pair_label(s, a) + " outside [0, 1]");
            }
            double total = 0.0;
            for (double prob : transition_row(s, a)) {
                if (!(prob >= 0.0)) throw ValidationError("MDP: negative transition probability in row " + pair_label(s, a));
                total += prob;
            }
            if (std::abs(total - 1.0) > kRowSumTolerance) {
                throw ValidationError("MDP: transition row " + pair_label(s, a) + " sums to " + std::to_string(total));
            }
        }
    }
    build_sampling_tables();
}

void TabularMdp::build_sampling_tables() {
    support_offsets_.assign(num_pairs() + 1, 0);
    for (std::size_t pair = 0; pair < num_pairs(); ++pair) {
        support_offsets_[pair] = static_cast<std::uint32_t>(support_states_.size());
        const double* row = transitions_.data() + pair * num_states_;
        double cumulative = 0.0;
        for (std::size_t next = 0; next < num_states_; ++next) {
            if (row[next] <= 0.0) continue;
            cumulative += row[next];
            support_states_.push_back(static_cast<std::uint32_t>(next));
            support_cdf_.push_back(cumulative);
        }
    }
    support_offsets_[num_pairs()] = static_cast<std::uint32_t>(support_states_.size());
}

bool TabularMdp::is_deterministic() const noexcept {
    for (std::size_t pair = 0; pair < num_pairs(); ++pair) {
        if (support_offsets_[pair + 1] - support_offsets_[pair] != 1) return false;
    }
    return true;
}

QTable bellman_apply(const TabularMdp& mdp, const QTable& q) {
    if (q.num_states() != mdp.num_states() || q.num_actions() != mdp.num_actions()) {
        throw DimensionError("bellman_apply: QTable shape does not match the MDP");
    }
    const std::vector<double> v = q.state_values();
    QTable out(mdp.num_states(), mdp.num_actions());
    for (std::size_t s = 0; s < mdp.num_states(); ++s) {
        for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
            auto row = mdp.transition_row(s, a);
            double expected = 0.0;
            for (std::size_t next = 0; next < row.size(); ++next) expected += row[next] * v[next];
            out(s, a) = mdp.reward(s, a) + mdp.gamma() * expected;
        }
    }
    return out;
}

SolveReport solve_q_star(const TabularMdp& mdp, double tol) {
    if (!(tol > 0.0)) throw ValidationError("solve_q_star: tol must be positive");
    const double gamma = mdp.gamma();
    const double stop = tol * (1.0 - gamma) / (2.0 * gamma);

    SolveReport report;
    QTable q(mdp.num_states(), mdp.num_actions());
    for (;;) {
        QTable next = bellman_apply(mdp, q);
        const double change = sup_distance(next, q);
        q = std::move(next);
        ++report.iterations;
        report.residual = change;
        if (change <= stop) break;
    }
    report.v_star = q.state_values();
    report.q_star = std::move(q);
    return report;
}

double hard_instance_p(double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ValidationError("hard instance: gamma must lie in (0, 1)");
    if (gamma < 0.25) throw ValidationError("hard instance: gamma below 1/4 gives a negative p");
    return (4.0 * gamma - 1.0) / (3.0 * gamma);
}

bool hard_instance_regime(double gamma) noexcept { return gamma >= 5.0 / 6.0 && gamma < 1.0; }

TabularMdp build_hard_mdp(double gamma, std::size_t num_copies, std::size_t num_actions_state1) {
    const double p = hard_instance_p(gamma);
    if (num_copies == 0) throw ValidationError("hard instance: num_copies must be positive");
    if (num_actions_state1 < 2) throw ValidationError("hard instance: state 1 needs at least two actions");
    constexpr std::size_t kMaxCopies = (std::size_t{1} << 28);
    if (num_copies > kMaxCopies) throw ValidationError("hard instance: num_copies * 4 overflows the state index");

    const std::size_t num_states = 4 * num_copies;
    const std::size_t num_actions = num_actions_state1;
    std::vector<double> rewards(num_states * num_actions, 0.0);
    std::vector<double> transitions(num_states * num_actions * num_states, 0.0);
    auto set = [&](std::size_t s, std::size_t a, std::size_t next, double prob) {
        transitions[(s * num_actions + a) * num_states + next] = prob;
    };

    for (std::size_t copy = 0; copy < num_copies; ++copy) {
        const std::size_t base = 4 * copy;
        for (std::size_t a = 0; a < num_actions; ++a) {
            set(base + 0, a, base + 0, 1.0);
            set(base + 1, a, base + 1, p);
            set(base + 1, a, base + 0, 1.0 - p);
            set(base + 2, a, base + 2, p);
            set(base + 2, a, base + 0, 1.0 - p);
            set(base + 3, a, base + 3, 1.0);
            rewards[(base + 1) * num_actions + a] = 1.0;
            rewards[(base + 2) * num_actions + a] = 1.0;
            rewards[(base + 3) * num_actions + a] = 1.0;
        }
    }
    return TabularMdp(num_states, num_actions, gamma, std::move(rewards), std::move(transitions));
}

TabularMdp build_experiment_mdp(double gamma, double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("experiment MDP: p must lie in [0, 1]");
    constexpr std::size_t kStates = 3;
    constexpr std::size_t kActions = 2;
    std::vector<double> rewards(kStates * kActions, 0.0);
    std::vector<double> transitions(kStates * kActions * kStates, 0.0);
    for (std::size_t a = 0; a < kActions; ++a) {
        transitions[(0 * kActions + a) * kStates + 0] = 1.0;
        for (std::size_t s : {std::size_t{1}, std::size_t{2}}) {
            transitions[(s * kActions + a) * kStates + s] = p;
            transitions[(s * kActions + a) * kStates + 0] = 1.0 - p;
            rewards[s * kActions + a] = 1.0;
        }
    }
    return TabularMdp(kStates, kActions, gamma, std::move(rewards), std::move(transitions));
}

std::vector<double> hard_instance_values(double gamma) {
    const double p = hard_instance_p(gamma);
    const double middle = 1.0 / (1.0 - gamma * p);
    return {0.0, middle, middle, 1.0 / (1.0 - gamma)};
}

}  // namespace fedq
