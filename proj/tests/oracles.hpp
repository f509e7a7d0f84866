#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library's solvers or samplers.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "fedq/mdp.hpp"

namespace oracle {

/// Solves A x = b by Gaussian elimination with partial pivoting.
inline std::vector<double> solve_linear(std::vector<std::vector<double>> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        }
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double acc = b[i];
        for (std::size_t c = i + 1; c < n; ++c) acc -= a[i][c] * x[c];
        x[i] = acc / a[i][i];
    }
    return x;
}

/// Optimal state values by exact policy iteration.
inline std::vector<double> optimal_values(const fedq::TabularMdp& mdp) {
    const std::size_t ns = mdp.num_states();
    const std::size_t na = mdp.num_actions();
    const double g = mdp.gamma();
    std::vector<std::size_t> policy(ns, 0);
    std::vector<double> v(ns, 0.0);
    for (int iter = 0; iter < 1000; ++iter) {
        std::vector<std::vector<double>> a(ns, std::vector<double>(ns, 0.0));
        std::vector<double> b(ns);
        for (std::size_t s = 0; s < ns; ++s) {
            a[s][s] = 1.0;
            for (std::size_t t = 0; t < ns; ++t) a[s][t] -= g * mdp.transition(s, policy[s], t);
            b[s] = mdp.reward(s, policy[s]);
        }
        v = solve_linear(a, b);
        bool stable = true;
        for (std::size_t s = 0; s < ns; ++s) {
            std::size_t best = policy[s];
            double best_q = -1.0;
            for (std::size_t act = 0; act < na; ++act) {
                double q = mdp.reward(s, act);
                for (std::size_t t = 0; t < ns; ++t) q += g * mdp.transition(s, act, t) * v[t];
                if (q > best_q + 1e-12) {
                    best_q = q;
                    best = act;
                }
            }
            if (best != policy[s]) {
                double current = mdp.reward(s, policy[s]);
                for (std::size_t t = 0; t < ns; ++t) current += g * mdp.transition(s, policy[s], t) * v[t];
                if (best_q > current + 1e-12) {
                    policy[s] = best;
                    stable = false;
                }
            }
        }
        if (stable) break;
    }
    return v;
}

/// Random MDP with sparse-ish rows, rewards in [0, 1].
inline fedq::TabularMdp random_mdp(std::mt19937_64& gen, std::size_t ns, std::size_t na, double gamma) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> rewards(ns * na);
    std::vector<double> transitions(ns * na * ns, 0.0);
    for (std::size_t pair = 0; pair < ns * na; ++pair) {
        rewards[pair] = unit(gen);
        double total = 0.0;
        for (std::size_t t = 0; t < ns; ++t) {
            const double w = unit(gen) < 0.5 ? 0.0 : unit(gen);
            transitions[pair * ns + t] = w;
            total += w;
        }
        if (total == 0.0) {
            transitions[pair * ns + pair % ns] = 1.0;
            total = 1.0;
        }
        for (std::size_t t = 0; t < ns; ++t) transitions[pair * ns + t] /= total;
        // Renormalize the last nonzero entry so the row sums to one exactly enough.
        double sum = 0.0;
        std::size_t last = 0;
        for (std::size_t t = 0; t < ns; ++t) {
            if (transitions[pair * ns + t] > 0.0) last = t;
        }
        for (std::size_t t = 0; t < ns; ++t) {
            if (t != last) sum += transitions[pair * ns + t];
        }
        transitions[pair * ns + last] = 1.0 - sum;
    }
    return fedq::TabularMdp(ns, na, gamma, std::move(rewards), std::move(transitions));
}

/// Expected Bellman operator written out directly.
inline std::vector<double> bellman(const fedq::TabularMdp& mdp, const std::vector<double>& q) {
    const std::size_t ns = mdp.num_states();
    const std::size_t na = mdp.num_actions();
    std::vector<double> v(ns);
    for (std::size_t s = 0; s < ns; ++s) {
        double best = q[s * na];
        for (std::size_t a = 1; a < na; ++a) best = std::max(best, q[s * na + a]);
        v[s] = best;
    }
    std::vector<double> out(ns * na);
    for (std::size_t s = 0; s < ns; ++s) {
        for (std::size_t a = 0; a < na; ++a) {
            double acc = 0.0;
            for (std::size_t t = 0; t < ns; ++t) acc += mdp.transition(s, a, t) * v[t];
            out[s * na + a] = mdp.reward(s, a) + mdp.gamma() * acc;
        }
    }
    return out;
}

}  // namespace oracle
