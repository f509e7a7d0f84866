#include <doctest.h>

#include <random>

#include "fedq/error.hpp"
#include "fedq/sampling.hpp"
#include "oracles.hpp"

using namespace fedq;

TEST_CASE("draws only land on positive-probability states") {
    const TabularMdp mdp = build_hard_mdp(0.9);
    RandomStream s = RngPlan(1).stream(0, 0, StreamPurpose::kTest);
    for (int i = 0; i < 2000; ++i) {
        const SampleMatrix z = draw_sample(mdp, s);
        for (std::size_t st = 0; st < mdp.num_states(); ++st) {
            for (std::size_t a = 0; a < mdp.num_actions(); ++a) REQUIRE(mdp.transition(st, a, z(st, a)) > 0.0);
        }
    }
}

TEST_CASE("empirical transition frequencies match the rows") {
    std::mt19937_64 gen(8);
    const TabularMdp mdp = oracle::random_mdp(gen, 5, 2, 0.9);
    RandomStream s = RngPlan(4).stream(0, 0, StreamPurpose::kTest);
    constexpr int n = 40000;
    std::vector<double> counts(mdp.num_pairs() * 5, 0.0);
    for (int i = 0; i < n; ++i) {
        const SampleMatrix z = draw_sample(mdp, s);
        for (std::size_t pair = 0; pair < mdp.num_pairs(); ++pair) counts[pair * 5 + z.next_state[pair]] += 1.0;
    }
    for (std::size_t pair = 0; pair < mdp.num_pairs(); ++pair) {
        for (std::size_t t = 0; t < 5; ++t) {
            const double p = mdp.transition(pair / 2, pair % 2, t);
            const double se = std::sqrt(p * (1 - p) / n) + 1e-12;
            CHECK(std::abs(counts[pair * 5 + t] / n - p) <= 5.0 * se);
        }
    }
}

TEST_CASE("sample operator equals the expected operator on a deterministic MDP") {
    const TabularMdp mdp(3, 2, 0.8, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6},
                         {0, 1, 0, 0, 0, 1, 1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 0, 0});
    QTable q(3, 2);
    for (std::size_t i = 0; i < 6; ++i) q.values()[i] = static_cast<double>(i) - 2.0;
    RandomStream s = RngPlan(2).stream(0, 0, StreamPurpose::kTest);
    CHECK(sup_distance(minibatch_bellman(mdp, q, 5, s), bellman_apply(mdp, q)) < 1e-14);
}

TEST_CASE("sample operator is unbiased") {
    std::mt19937_64 gen(21);
    const TabularMdp mdp = oracle::random_mdp(gen, 4, 2, 0.9);
    QTable q(4, 2);
    for (std::size_t i = 0; i < 8; ++i) q.values()[i] = static_cast<double>(i % 3) * 2.5;
    const auto expected = oracle::bellman(mdp, std::vector<double>(q.values().begin(), q.values().end()));
    RandomStream s = RngPlan(6).stream(0, 0, StreamPurpose::kTest);
    constexpr int n = 20000;
    std::vector<double> sum(8, 0.0);
    std::vector<double> sum_sq(8, 0.0);
    for (int i = 0; i < n; ++i) {
        const QTable t = sample_bellman(mdp, q, draw_sample(mdp, s));
        for (std::size_t k = 0; k < 8; ++k) {
            sum[k] += t.values()[k];
            sum_sq[k] += t.values()[k] * t.values()[k];
        }
    }
    for (std::size_t k = 0; k < 8; ++k) {
        const double mean = sum[k] / n;
        const double se = std::sqrt(std::max(0.0, sum_sq[k] / n - mean * mean) / n) + 1e-12;
        CHECK(std::abs(mean - expected[k]) <= 4.0 * se);
    }
}

TEST_CASE("fused kernels consume the stream exactly like draw_sample") {
    std::mt19937_64 gen(5);
    const TabularMdp mdp = oracle::random_mdp(gen, 6, 3, 0.9);
    std::vector<double> v(6);
    std::vector<double> base(6);
    for (std::size_t s = 0; s < 6; ++s) {
        v[s] = 0.7 * static_cast<double>(s);
        base[s] = 1.0 - 0.2 * static_cast<double>(s);
    }
    RandomStream a = RngPlan(9).stream(1, 2, StreamPurpose::kTest);
    RandomStream b = a;
    RandomStream c = a;

    std::vector<double> expected_values(18, 0.0);
    std::vector<double> expected_diffs(18, 0.0);
    for (int d = 0; d < 7; ++d) {
        const SampleMatrix z = draw_sample(mdp, a);
        for (std::size_t pair = 0; pair < 18; ++pair) {
            expected_values[pair] += v[z.next_state[pair]];
            expected_diffs[pair] += v[z.next_state[pair]] - base[z.next_state[pair]];
        }
    }
    std::vector<double> values(18, 0.0);
    std::vector<double> diffs(18, 0.0);
    accumulate_next_values(mdp, v, 7, b, values);
    accumulate_next_differences(mdp, v, base, 7, c, diffs);
    CHECK(values == expected_values);
    CHECK(diffs == expected_diffs);
    CHECK(a.position() == b.position());
    CHECK(a.position() == c.position());
    CHECK(a.position() == 7 * 18);
}

TEST_CASE("sample operator rejects bad inputs") {
    const TabularMdp mdp = build_hard_mdp(0.9);
    SampleMatrix z;
    z.num_states = 4;
    z.num_actions = 2;
    z.next_state.assign(8, 9);
    CHECK_THROWS(sample_bellman(mdp, QTable(4, 2), z));
    RandomStream s = RngPlan(1).stream(0, 0, StreamPurpose::kTest);
    CHECK_THROWS_AS(minibatch_bellman(mdp, QTable(3, 2), 1, s), DimensionError);
}
