#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fedq {

/// |S| x |A| table of action values, row-major by state.
class QTable {
public:
    QTable() = default;
    QTable(std::size_t num_states, std::size_t num_actions, double fill = 0.0)
        : num_states_(num_states), num_actions_(num_actions), values_(num_states * num_actions, fill) {}

    std::size_t num_states() const noexcept { return num_states_; }
    std::size_t num_actions() const noexcept { return num_actions_; }
    std::size_t size() const noexcept { return values_.size(); }

    double& operator()(std::size_t s, std::size_t a) noexcept { return values_[s * num_actions_ + a]; }
    double operator()(std::size_t s, std::size_t a) const noexcept { return values_[s * num_actions_ + a]; }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    /// V(s) = max_a Q(s, a).
    double state_value(std::size_t s) const noexcept;
    std::vector<double> state_values() const;
    /// Writes V into `out`, which must hold num_states() entries.
    void state_values_into(std::span<double> out) const noexcept;
    /// Greedy action, lowest index on ties.
    std::size_t greedy_action(std::size_t s) const noexcept;

    bool same_shape(const QTable& other) const noexcept {
        return num_states_ == other.num_states_ && num_actions_ == other.num_actions_;
    }

    friend bool operator==(const QTable&, const QTable&) = default;

private:
    std::size_t num_states_ = 0;
    std::size_t num_actions_ = 0;
    std::vector<double> values_;
};

/// ||a - b||_inf. Throws DimensionError on shape mismatch.
double sup_distance(const QTable& a, const QTable& b);
double sup_norm(std::span<const double> v) noexcept;

/// Finite discounted MDP with known deterministic rewards. Immutable after
/// construction; the constructor validates every invariant.
class TabularMdp {
public:
    /// `rewards` is [s][a] flattened, `transitions` is [s][a][s'] flattened.
    TabularMdp(std::size_t num_states, std::size_t num_actions, double gamma,
               std::vector<double> rewards, std::vector<double> transitions);

    std::size_t num_states() const noexcept { return num_states_; }
    std::size_t num_actions() const noexcept { return num_actions_; }
    std::size_t num_pairs() const noexcept { return num_states_ * num_actions_; }
    double gamma() const noexcept { return gamma_; }
    /// Upper end of the value range, 1 / (1 - gamma).
    double value_bound() const noexcept { return 1.0 / (1.0 - gamma_); }

    double reward(std::size_t s, std::size_t a) const noexcept { return rewards_[s * num_actions_ + a]; }
    double transition(std::size_t s, std::size_t a, std::size_t next) const noexcept {
        return transitions_[(s * num_actions_ + a) * num_states_ + next];
    }
    std::span<const double> rewards() const noexcept { return rewards_; }
    std::span<const double> transition_row(std::size_t s, std::size_t a) const noexcept {
        return std::span<const double>(transitions_).subspan((s * num_actions_ + a) * num_states_, num_states_);
    }

    /// Inverse-CDF lookup for pair index `pair` = s * |A| + a and u in (0, 1).
    /// Only states with positive probability are ever returned.
    std::uint32_t sample_next(std::size_t pair, double u) const noexcept {
        const std::uint32_t begin = support_offsets_[pair];
        const std::uint32_t last = support_offsets_[pair + 1] - 1;
        for (std::uint32_t i = begin; i < last; ++i) {
            if (u < support_cdf_[i]) return support_states_[i];
        }
        return support_states_[last];
    }

    bool is_deterministic() const noexcept;

private:
    void build_sampling_tables();

    std::size_t num_states_;
    std::size_t num_actions_;
    double gamma_;
    std::vector<double> rewards_;
    std::vector<double> transitions_;
    std::vector<std::uint32_t> support_offsets_;
    std::vector<std::uint32_t> support_states_;
    std::vector<double> support_cdf_;
};

struct SolveReport {
    QTable q_star;
    std::vector<double> v_star;
    long iterations = 0;
    /// Sup-norm change of the last value-iteration sweep.
    double residual = 0.0;
};

/// Exact Bellman optimality operator applied to q.
QTable bellman_apply(const TabularMdp& mdp, const QTable& q);

/// Value iteration from Q = 0, stopped once the sweep change is at most
/// tol * (1 - gamma) / (2 * gamma); the result is then within tol of Q*.
SolveReport solve_q_star(const TabularMdp& mdp, double tol);

/// p = (4 gamma - 1) / (3 gamma), the self-loop probability of the hard instance.
double hard_instance_p(double gamma);

/// True when gamma lies in the regime the lower-bound construction targets (gamma >= 5/6).
bool hard_instance_regime(double gamma) noexcept;

/// `num_copies` disjoint copies of the 4-state hard instance. State 1 of each
/// copy has `num_actions_state1` identical actions; the single-action states
/// replicate their action across every slot so the table stays rectangular.
TabularMdp build_hard_mdp(double gamma, std::size_t num_copies = 1, std::size_t num_actions_state1 = 2);

/// The 3-state, 2-action instance used in the numerical studies: state 0 is
/// absorbing with zero reward, states 1 and 2 stay put with probability p
/// and fall into state 0 otherwise, earning reward 1.
TabularMdp build_experiment_mdp(double gamma, double p);

/// Closed-form optimal values of one copy of the hard instance, states 0..3.
std::vector<double> hard_instance_values(double gamma);

}  // namespace fedq
