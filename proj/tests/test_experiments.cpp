#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedq/error.hpp"
#include "fedq/experiments.hpp"

using namespace fedq;
using nlohmann::json;

namespace {

json small_speedup() {
    return json{{"schema_version", 1},
                {"experiment", "speedup"},
                {"mdp", {{"builtin", "experiment"}, {"gamma", 0.7}, {"p", 0.8}}},
                {"dvr", {{"eps", 0.5}, {"scale_l", 0.00005}, {"scale_b", 0.005}, {"min_l", 20}, {"min_b", 2}}},
                {"agents", {1, 2, 4}},
                {"num_seeds", 3},
                {"early_stop", true}};
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("kind names round trip") {
    for (auto kind : {ExperimentKind::kSolve, ExperimentKind::kCompare, ExperimentKind::kSpeedup,
                      ExperimentKind::kHorizon, ExperimentKind::kLowerbound, ExperimentKind::kSingle}) {
        CHECK(parse_kind(kind_name(kind)) == kind);
    }
    CHECK_THROWS_AS(parse_kind("plot"), ValidationError);
}

TEST_CASE("config errors name the offending field") {
    json doc = small_speedup();
    doc["dvr"]["epsilon"] = 0.1;
    CHECK_THROWS_WITH_AS(parse_config(doc), doctest::Contains("dvr.epsilon"), ValidationError);

    doc = small_speedup();
    doc["num_seeds"] = "three";
    CHECK_THROWS_WITH_AS(parse_config(doc), doctest::Contains("num_seeds"), ValidationError);

    doc = small_speedup();
    doc.erase("schema_version");
    CHECK_THROWS_WITH_AS(parse_config(doc), doctest::Contains("schema_version"), ValidationError);

    doc = small_speedup();
    doc["seeds"] = {4, 4};
    CHECK_THROWS_WITH_AS(parse_config(doc), doctest::Contains("seeds"), ValidationError);

    doc = small_speedup();
    doc["mdp"]["builtin"] = "grid";
    CHECK_THROWS_WITH_AS(parse_config(doc), doctest::Contains("mdp.builtin"), ValidationError);

    json single{{"schema_version", 1}, {"experiment", "single"}, {"dvr", json::object()}, {"sync", json::object()}};
    CHECK_THROWS_AS(parse_config(single), ValidationError);
}

TEST_CASE("config overlays defaults and round trips") {
    const ExperimentConfig cfg = parse_config(small_speedup());
    CHECK(cfg.kind == ExperimentKind::kSpeedup);
    CHECK(cfg.dvr->eps == 0.5);
    CHECK(cfg.dvr->delta == 0.05);
    CHECK(cfg.agents == std::vector<std::uint32_t>{1, 2, 4});
    CHECK(cfg.seed_list() == std::vector<std::uint64_t>{1, 2, 3});
    const ExperimentConfig again = parse_config(config_to_json(cfg));
    CHECK(config_to_json(again) == config_to_json(cfg));

    json sync_single{{"schema_version", 1}, {"experiment", "single"}, {"sync", {{"total_steps", 50}}}};
    const ExperimentConfig s = parse_config(sync_single);
    CHECK_FALSE(s.dvr.has_value());
    CHECK(s.sync->total_steps == 50);
}

TEST_CASE("number formatting is shortest round-trip") {
    CHECK(format_real(0.1) == "0.1");
    CHECK(format_real(7.5) == "7.5");
    CHECK(format_real(1e-20) == "1e-20");
    CHECK(std::stod(format_real(1.0 / 3.0)) == 1.0 / 3.0);
    CHECK(to_csv(CsvTable{"t", {"a", "b"}, {{"1", "2"}}}) == "a,b\n1,2\n");
}

TEST_CASE("solve reports the closed form") {
    ExperimentConfig cfg = default_config(ExperimentKind::kSolve);
    const SolveOutput out = study_solve(cfg);
    REQUIRE(out.closed_form.has_value());
    CHECK(out.document["closed_form"]["max_abs_diff"].get<double>() < 1e-8);
    CHECK(out.report.v_star[1] == doctest::Approx(7.5));
}

TEST_CASE("horizon study is analytic and increasing") {
    std::vector<HorizonPoint> points;
    TrendFit fit;
    const StudyOutput out = study_horizon(default_config(ExperimentKind::kHorizon), &points, &fit);
    REQUIRE(points.size() == 5);
    CHECK(points[4].rounds == 287);
    for (std::size_t i = 1; i < points.size(); ++i) CHECK(points[i].rounds > points[i - 1].rounds);
    CHECK(fit.r_squared >= 0.9);
    CHECK(out.tables[0].header == std::vector<std::string>{"gamma", "inv_horizon", "rounds", "bits"});
}

TEST_CASE("speedup output does not depend on thread count") {
    ExperimentConfig cfg = parse_config(small_speedup());
    std::vector<SpeedupPoint> points;
    const StudyOutput one = study_speedup(cfg, &points);
    cfg.threads = 4;
    const StudyOutput four = study_speedup(cfg);
    CHECK(to_csv(one.tables[0]) == to_csv(four.tables[0]));
    CHECK(one.summary == four.summary);
    for (const auto& p : points) CHECK(p.rounds == points.front().rounds);
    CHECK(one.tables[0].header == std::vector<std::string>{"M", "seed", "sc", "rounds", "bits"});
}

TEST_CASE("written studies carry a sidecar") {
    const auto dir = std::filesystem::temp_directory_path() / "fedq_test_write";
    std::filesystem::remove_all(dir);
    const ExperimentConfig cfg = default_config(ExperimentKind::kHorizon);
    write_study(study_horizon(cfg), cfg, dir);
    CHECK(read_file(dir / "horizon.csv").rfind("gamma,inv_horizon,rounds,bits\n", 0) == 0);
    const json meta = json::parse(read_file(dir / "horizon.csv.meta.json"));
    CHECK(meta["version"] == kVersion);
    CHECK(meta["config"]["experiment"] == "horizon");
    CHECK(meta["seeds"] == json::array({1}));
    CHECK(std::filesystem::exists(dir / "horizon_summary.json"));
    std::filesystem::remove_all(dir);
}
