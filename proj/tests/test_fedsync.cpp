#include <doctest.h>

#include <cmath>

#include "fedq/error.hpp"
#include "fedq/fedsync.hpp"

using namespace fedq;

namespace {

SyncRunConfig base_config(std::uint64_t t, std::uint32_t agents, CommSchedule comm) {
    SyncRunConfig cfg;
    cfg.total_steps = t;
    cfg.num_agents = agents;
    cfg.step_size = StepSizeSchedule::constant(0.1);
    cfg.comm = std::move(comm);
    cfg.master_seed = 3;
    return cfg;
}

}  // namespace

TEST_CASE("step size schedules") {
    CHECK(step_size_at(StepSizeSchedule::constant(0.3), 10, 0.9) == 0.3);
    CHECK(step_size_at(StepSizeSchedule::rescaled_linear(2.0), 5, 0.9) == doctest::Approx(1.0 / (1.0 + 2.0 * 0.1 * 5)));
    CHECK_THROWS_AS(step_size_at(StepSizeSchedule::constant(0.3), 0, 0.9), ValidationError);
    CHECK_THROWS_AS(StepSizeSchedule::constant(1.5).validate(), ValidationError);
    CHECK_THROWS_AS(StepSizeSchedule::rescaled_linear(0.0).validate(), ValidationError);
}

TEST_CASE("communication schedules") {
    const auto every = CommSchedule::every_step(5);
    CHECK(every.num_rounds() == 5);
    const auto periodic = CommSchedule::periodic(4, 10);
    CHECK(std::vector<std::uint64_t>(periodic.instants().begin(), periodic.instants().end()) ==
          std::vector<std::uint64_t>{4, 8, 10});
    CHECK(periodic.rounds_through(7) == 1);
    CHECK(periodic.rounds_through(8) == 2);
    CHECK(periodic.rounds_through(10) == 3);
    CHECK(CommSchedule::final_only(9).num_rounds() == 1);
    CHECK_THROWS_AS(CommSchedule({3, 3}), ValidationError);
    CHECK_THROWS_AS(CommSchedule({0, 3}), ValidationError);
    CHECK_THROWS_AS(CommSchedule(std::vector<std::uint64_t>{}), ValidationError);
}

TEST_CASE("geometric checkpoints") {
    CHECK(geometric_checkpoints(10) == std::vector<std::uint64_t>{1, 2, 4, 8, 10});
    CHECK(geometric_checkpoints(8) == std::vector<std::uint64_t>{1, 2, 4, 8});
    CHECK(geometric_checkpoints(1) == std::vector<std::uint64_t>{1});
    CHECK(geometric_checkpoints(20, 3.0) == std::vector<std::uint64_t>{1, 3, 9, 20});
}

TEST_CASE("config validation") {
    const TabularMdp mdp = build_hard_mdp(0.9);
    const QTable q_star = solve_q_star(mdp, 1e-10).q_star;
    const std::vector<std::uint64_t> marks{5};
    SyncRunConfig cfg = base_config(10, 2, CommSchedule::periodic(3, 9));
    CHECK_THROWS_AS(run_sync(mdp, cfg, q_star, marks), ValidationError);
    cfg.comm = CommSchedule::every_step(10);
    const std::vector<std::uint64_t> bad{11};
    CHECK_THROWS_AS(run_sync(mdp, cfg, q_star, bad), ValidationError);
    CHECK_THROWS_AS(run_sync(mdp, cfg, QTable(3, 2), marks), DimensionError);
}

TEST_CASE("absorbing reward state follows its closed form") {
    const double gamma = 0.9;
    const TabularMdp mdp = build_hard_mdp(gamma);
    const QTable q_star = solve_q_star(mdp, 1e-10).q_star;
    for (bool linear : {false, true}) {
        SyncRunConfig cfg = base_config(300, 3, CommSchedule::periodic(7, 300));
        cfg.batch_size = 2;
        cfg.step_size = linear ? StepSizeSchedule::rescaled_linear(1.0) : StepSizeSchedule::constant(0.2);
        double product = 1.0;
        double worst = 0.0;
        run_sync(mdp, cfg, q_star, geometric_checkpoints(300), [&](std::uint64_t t, std::span<const QTable> agents) {
            product *= 1.0 - step_size_at(cfg.step_size, t, gamma) * (1.0 - gamma);
            const double expected = (1.0 - product) / (1.0 - gamma);
            for (const QTable& q : agents) {
                for (std::size_t a = 0; a < 2; ++a) worst = std::max(worst, std::abs(q(3, a) - expected));
            }
        });
        CHECK(worst <= 1e-12);
    }
}

TEST_CASE("agents agree right after each averaging round and only then") {
    const TabularMdp mdp = build_experiment_mdp(0.9, 0.5);
    const QTable q_star = solve_q_star(mdp, 1e-10).q_star;
    const auto cfg = base_config(40, 4, CommSchedule::periodic(10, 40));
    int agreed = 0;
    run_sync(mdp, cfg, q_star, std::vector<std::uint64_t>{40}, [&](std::uint64_t t, std::span<const QTable> agents) {
        bool equal = true;
        for (const QTable& q : agents) equal = equal && q == agents.front();
        if (t % 10 == 0) {
            CHECK(equal);
            ++agreed;
        } else if (t > 1) {
            CHECK_FALSE(equal);
        }
    });
    CHECK(agreed == 4);
}

TEST_CASE("one agent does not depend on the schedule") {
    const TabularMdp mdp = build_experiment_mdp(0.9, 0.8);
    const QTable q_star = solve_q_star(mdp, 1e-10).q_star;
    const std::vector<std::uint64_t> marks{50, 100};
    const auto a = run_sync(mdp, base_config(100, 1, CommSchedule::every_step(100)), q_star, marks);
    const auto b = run_sync(mdp, base_config(100, 1, CommSchedule::final_only(100)), q_star, marks);
    CHECK(a.rows[0].agent_error == b.rows[0].agent_error);
    CHECK(a.rows[1].agent_error == b.rows[1].agent_error);
    CHECK(a.rows[1].rounds == 100);
    CHECK(b.rows[1].rounds == 1);
}

TEST_CASE("ledger columns") {
    const TabularMdp mdp = build_experiment_mdp(0.9, 0.8);
    const QTable q_star = solve_q_star(mdp, 1e-10).q_star;
    auto cfg = base_config(64, 2, CommSchedule::periodic(8, 64));
    cfg.batch_size = 3;
    cfg.bits_per_real = 32;
    const auto rec = run_sync(mdp, cfg, q_star, geometric_checkpoints(64));
    REQUIRE(rec.rows.size() == 7);
    for (const RunRow& row : rec.rows) {
        CHECK(row.samples_per_agent == 3 * row.step);
        CHECK(row.rounds == row.step / 8);
        CHECK(row.bits_per_agent == row.rounds * 32 * 6);
    }
    CHECK(rec.num_pairs == 6);
}

TEST_CASE("runs are reproducible and thread-independent") {
    const TabularMdp mdp = build_experiment_mdp(0.9, 0.8);
    const QTable q_star = solve_q_star(mdp, 1e-10).q_star;
    const auto cfg = base_config(200, 3, CommSchedule::periodic(5, 200));
    const auto a = run_sync(mdp, cfg, q_star, geometric_checkpoints(200));
    const auto b = run_sync(mdp, cfg, q_star, geometric_checkpoints(200));
    for (std::size_t i = 0; i < a.rows.size(); ++i) CHECK(a.rows[i].agent_error == b.rows[i].agent_error);

    const std::vector<std::uint32_t> counts{1, 3};
    const auto one = run_speedup_probe(mdp, cfg, counts, 4, 0.5, 1);
    const auto many = run_speedup_probe(mdp, cfg, counts, 4, 0.5, 4);
    for (std::size_t i = 0; i < one.size(); ++i) {
        CHECK(one[i].final_errors == many[i].final_errors);
        CHECK(one[i].samples_to_target == many[i].samples_to_target);
    }
}

TEST_CASE("averaging every step reduces the error, averaging once barely does") {
    const TabularMdp mdp = build_experiment_mdp(0.9, 0.8);
    SyncRunConfig dense = base_config(2000, 1, CommSchedule::every_step(2000));
    dense.step_size = StepSizeSchedule::constant(0.02);
    SyncRunConfig sparse = dense;
    sparse.comm = CommSchedule::final_only(2000);
    const std::vector<std::uint32_t> counts{1, 10};
    const auto d = run_speedup_probe(mdp, dense, counts, 10, 0.0, 1);
    const auto s = run_speedup_probe(mdp, sparse, counts, 10, 0.0, 1);
    CHECK(d[1].mean_final_error < 0.6 * d[0].mean_final_error);
    CHECK(s[1].mean_final_error > d[1].mean_final_error);
}
