#include <doctest.h>

#include <random>

#include "fedq/error.hpp"
#include "fedq/mdp.hpp"
#include "fedq/mdp_io.hpp"
#include "oracles.hpp"

using namespace fedq;

TEST_CASE("hard instance values match the closed form") {
    for (double gamma : {5.0 / 6.0, 0.9, 0.95}) {
        CAPTURE(gamma);
        const TabularMdp mdp = build_hard_mdp(gamma);
        const SolveReport r = solve_q_star(mdp, 1e-12);
        const double mid = 3.0 / (4.0 * (1.0 - gamma));
        CHECK(r.v_star[0] == doctest::Approx(0.0).epsilon(1e-8));
        CHECK(std::abs(r.v_star[1] - mid) < 1e-8);
        CHECK(std::abs(r.v_star[2] - mid) < 1e-8);
        CHECK(std::abs(r.v_star[3] - 1.0 / (1.0 - gamma)) < 1e-8);
    }
    const auto v = solve_q_star(build_hard_mdp(0.9), 1e-12).v_star;
    CHECK(v[1] == doctest::Approx(7.5).epsilon(1e-9));
    CHECK(v[3] == doctest::Approx(10.0).epsilon(1e-9));
}

TEST_CASE("hard instance parameter p") {
    CHECK(hard_instance_p(0.9) == doctest::Approx((4 * 0.9 - 1) / (3 * 0.9)));
    CHECK(hard_instance_p(0.25) == doctest::Approx(0.0));
    CHECK_THROWS_AS(hard_instance_p(0.2), ValidationError);
    CHECK(hard_instance_regime(5.0 / 6.0));
    CHECK_FALSE(hard_instance_regime(0.8));
}

TEST_CASE("hard instance structure") {
    const TabularMdp mdp = build_hard_mdp(0.9, 3, 4);
    CHECK(mdp.num_states() == 12);
    CHECK(mdp.num_actions() == 4);
    const auto v = solve_q_star(mdp, 1e-12).v_star;
    for (std::size_t copy = 0; copy < 3; ++copy) {
        CHECK(v[4 * copy + 1] == doctest::Approx(7.5));
        CHECK(v[4 * copy + 3] == doctest::Approx(10.0));
    }
    // Copies never communicate.
    for (std::size_t s = 0; s < 4; ++s) {
        for (std::size_t t = 4; t < 12; ++t) CHECK(mdp.transition(s, 0, t) == 0.0);
    }
    CHECK_THROWS_AS(build_hard_mdp(0.9, 0), ValidationError);
    CHECK_THROWS_AS(build_hard_mdp(0.9, 1, 1), ValidationError);
}

TEST_CASE("experiment MDP middle states have value 1 / (1 - gamma p)") {
    const TabularMdp mdp = build_experiment_mdp(0.9, 0.8);
    CHECK(mdp.num_pairs() == 6);
    const auto v = solve_q_star(mdp, 1e-12).v_star;
    CHECK(v[0] == doctest::Approx(0.0));
    CHECK(v[1] == doctest::Approx(1.0 / (1.0 - 0.72)));
    CHECK(v[2] == doctest::Approx(1.0 / (1.0 - 0.72)));
    CHECK_THROWS_AS(build_experiment_mdp(0.9, 1.5), ValidationError);
}

TEST_CASE("solver agrees with exact policy iteration on random MDPs") {
    std::mt19937_64 gen(11);
    for (int trial = 0; trial < 10; ++trial) {
        const TabularMdp mdp = oracle::random_mdp(gen, 6, 3, 0.9);
        const auto expected = oracle::optimal_values(mdp);
        const auto got = solve_q_star(mdp, 1e-11).v_star;
        for (std::size_t s = 0; s < expected.size(); ++s) CHECK(std::abs(got[s] - expected[s]) < 1e-8);
    }
}

TEST_CASE("solver tolerance controls accuracy") {
    const TabularMdp mdp = build_hard_mdp(0.95);
    const auto fine = solve_q_star(mdp, 1e-10);
    const auto coarse = solve_q_star(mdp, 1e-6);
    CHECK(sup_distance(fine.q_star, coarse.q_star) <= 1e-6);
    CHECK(fine.iterations > coarse.iterations);
}

TEST_CASE("bellman operator is a gamma contraction in sup norm") {
    std::mt19937_64 gen(2024);
    std::uniform_real_distribution<double> value(-5.0, 15.0);
    int pairs_checked = 0;
    for (int m = 0; m < 5; ++m) {
        const double gamma = 0.5 + 0.1 * m;
        const TabularMdp mdp = oracle::random_mdp(gen, 5, 3, gamma);
        for (int trial = 0; trial < 30; ++trial, ++pairs_checked) {
            QTable a(5, 3);
            QTable b(5, 3);
            for (double& x : a.values()) x = value(gen);
            for (double& x : b.values()) x = value(gen);
            const double before = sup_distance(a, b);
            const double after = sup_distance(bellman_apply(mdp, a), bellman_apply(mdp, b));
            REQUIRE(after <= gamma * before + 1e-12);
        }
    }
    CHECK(pairs_checked >= 100);
}

TEST_CASE("bellman_apply matches the direct expectation") {
    std::mt19937_64 gen(3);
    const TabularMdp mdp = oracle::random_mdp(gen, 4, 2, 0.7);
    QTable q(4, 2);
    for (std::size_t i = 0; i < q.size(); ++i) q.values()[i] = 0.3 * static_cast<double>(i);
    const auto expected = oracle::bellman(mdp, std::vector<double>(q.values().begin(), q.values().end()));
    const QTable got = bellman_apply(mdp, q);
    for (std::size_t i = 0; i < expected.size(); ++i) CHECK(got.values()[i] == doctest::Approx(expected[i]));
    CHECK_THROWS_AS(bellman_apply(mdp, QTable(3, 2)), DimensionError);
}

TEST_CASE("constructor rejects invalid MDPs") {
    CHECK_THROWS_AS(TabularMdp(1, 1, 0.9, {0.5}, {0.9}), ValidationError);
    CHECK_THROWS_AS(TabularMdp(1, 1, 0.9, {1.5}, {1.0}), ValidationError);
    CHECK_THROWS_AS(TabularMdp(1, 1, 1.0, {0.5}, {1.0}), ValidationError);
    CHECK_THROWS_AS(TabularMdp(2, 1, 0.9, {0.5, 0.5}, {1.2, -0.2, 0.0, 1.0}), ValidationError);
    CHECK_THROWS_AS(TabularMdp(1, 1, 0.9, {0.5, 0.5}, {1.0}), DimensionError);
    CHECK_NOTHROW(TabularMdp(1, 1, 0.9, {0.5}, {1.0}));
}

TEST_CASE("QTable helpers") {
    QTable q(2, 3);
    q(0, 1) = 2.0;
    q(0, 2) = 2.0;
    q(1, 0) = -1.0;
    q(1, 1) = -3.0;
    q(1, 2) = -2.0;
    CHECK(q.greedy_action(0) == 1);
    CHECK(q.state_value(1) == -1.0);
    CHECK(q.state_values() == std::vector<double>{2.0, -1.0});
    CHECK(sup_norm(q.values()) == 3.0);
    CHECK_THROWS_AS(sup_distance(q, QTable(3, 2)), DimensionError);
}

TEST_CASE("deterministic detection") {
    CHECK(TabularMdp(2, 1, 0.5, {0.0, 1.0}, {0.0, 1.0, 1.0, 0.0}).is_deterministic());
    CHECK_FALSE(build_hard_mdp(0.9).is_deterministic());
}

TEST_CASE("MDP JSON round trip and row-level errors") {
    const TabularMdp mdp = build_hard_mdp(0.9);
    const TabularMdp back = mdp_from_json(mdp_to_json(mdp));
    CHECK(back.num_states() == 4);
    for (std::size_t s = 0; s < 4; ++s) {
        for (std::size_t t = 0; t < 4; ++t) CHECK(back.transition(s, 1, t) == mdp.transition(s, 1, t));
    }

    auto doc = mdp_to_json(mdp);
    doc["transitions"][1][0][0] = 0.5;
    try {
        mdp_from_json(doc);
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("row [1][0]") != std::string::npos);
    }
    auto missing = mdp_to_json(mdp);
    missing.erase("gamma");
    CHECK_THROWS_WITH_AS(mdp_from_json(missing), doctest::Contains("gamma"), ValidationError);
}
