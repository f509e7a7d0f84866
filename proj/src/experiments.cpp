#include "fedq/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "fedq/error.hpp"
#include "fedq/mdp_io.hpp"
#include "fedq/parallel.hpp"

namespace fedq {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

ExperimentKind parse_kind(const std::string& name) {
    if (name == "solve") return ExperimentKind::kSolve;
    if (name == "compare") return ExperimentKind::kCompare;
    if (name == "speedup") return ExperimentKind::kSpeedup;
    if (name == "horizon") return ExperimentKind::kHorizon;
    if (name == "lowerbound") return ExperimentKind::kLowerbound;
    if (name == "single") return ExperimentKind::kSingle;
    throw ValidationError("config field 'experiment': unknown kind '" + name + "'");
}

std::string kind_name(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::kSolve: return "solve";
        case ExperimentKind::kCompare: return "compare";
        case ExperimentKind::kSpeedup: return "speedup";
        case ExperimentKind::kHorizon: return "horizon";
        case ExperimentKind::kLowerbound: return "lowerbound";
        case ExperimentKind::kSingle: return "single";
    }
    return "single";
}

std::vector<std::uint64_t> ExperimentConfig::seed_list() const {
    if (!seeds.empty()) return seeds;
    std::vector<std::uint64_t> out(num_seeds);
    for (std::size_t i = 0; i < num_seeds; ++i) out[i] = master_seed + i;
    return out;
}

namespace {

DvrBlock desk_scale_dvr(double eps) {
    DvrBlock b;
    b.eps = eps;
    b.delta = 0.05;
    b.eta = 0.5;
    b.scale_l = 1.0 / 200.0;
    b.scale_b = 1.0 / 200.0;
    b.min_l = 50;
    b.min_b = 4;
    return b;
}

}  // namespace

ExperimentConfig default_config(ExperimentKind kind) {
    ExperimentConfig cfg;
    cfg.kind = kind;
    switch (kind) {
        case ExperimentKind::kSolve:
            cfg.mdp.builtin = "hard";
            cfg.mdp.gamma = 0.9;
            break;
        case ExperimentKind::kCompare: {
            cfg.mdp.gamma = 0.9;
            cfg.mdp.p = 0.8;
            cfg.agents = {5};
            DvrBlock dvr = desk_scale_dvr(0.1);
            dvr.scale_l = 1.0 / 2000.0;
            cfg.dvr = dvr;
            SyncBlock sync;
            sync.total_steps = 0;
            sync.eta = 0.005;
            sync.comm = "period";
            sync.period = 10;
            sync.bits_per_real = 32;
            cfg.sync = sync;
            cfg.num_seeds = 2;
            break;
        }
        case ExperimentKind::kSpeedup:
            cfg.mdp.gamma = 0.8;
            cfg.dvr = desk_scale_dvr(0.125);
            cfg.agents = {1, 2, 4, 8};
            cfg.num_seeds = 20;
            cfg.early_stop = true;
            break;
        case ExperimentKind::kHorizon: {
            cfg.mdp.p = 0.8;
            DvrBlock dvr;
            dvr.eps = 0.1;
            dvr.eta = 0.5;
            cfg.dvr = dvr;
            cfg.agents = {5};
            cfg.gammas = {0.70, 0.75, 0.80, 0.85, 0.90};
            break;
        }
        case ExperimentKind::kLowerbound: {
            cfg.mdp.gamma = 0.9;
            cfg.mdp.p = 0.8;
            SyncBlock sync;
            sync.total_steps = 2000;
            sync.batch_size = 1;
            sync.comm = "every";
            cfg.sync = sync;
            cfg.agents = {1, 10};
            cfg.num_seeds = 20;
            break;
        }
        case ExperimentKind::kSingle:
            cfg.mdp.gamma = 0.8;
            cfg.dvr = desk_scale_dvr(0.125);
            cfg.agents = {4};
            break;
    }
    return cfg;
}

namespace {

// Reads fields of one JSON object into typed destinations and rejects
// anything it was not asked about.
class FieldReader {
public:
    FieldReader(const json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {
        if (!obj_.is_object()) throw ValidationError("config field '" + display() + "' must be an object");
    }

    bool has(const char* key) {
        seen_.insert(key);
        return obj_.contains(key);
    }

    const json& raw(const char* key) {
        seen_.insert(key);
        return obj_.at(key);
    }

    void real(const char* key, double& dst) {
        if (!has(key)) return;
        const json& v = obj_.at(key);
        if (!v.is_number()) fail(key, "must be a number");
        dst = v.get<double>();
    }

    void optional_real(const char* key, std::optional<double>& dst) {
        if (!has(key)) return;
        const json& v = obj_.at(key);
        if (v.is_null()) {
            dst.reset();
            return;
        }
        if (!v.is_number()) fail(key, "must be a number or null");
        dst = v.get<double>();
    }

    template <class Int>
    void integer(const char* key, Int& dst) {
        if (!has(key)) return;
        const json& v = obj_.at(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
            fail(key, "must be a nonnegative integer");
        }
        const auto raw_value = v.get<std::uint64_t>();
        if (raw_value > std::numeric_limits<Int>::max()) fail(key, "is too large");
        dst = static_cast<Int>(raw_value);
    }

    void text(const char* key, std::string& dst) {
        if (!has(key)) return;
        const json& v = obj_.at(key);
        if (!v.is_string()) fail(key, "must be a string");
        dst = v.get<std::string>();
    }

    void boolean(const char* key, bool& dst) {
        if (!has(key)) return;
        const json& v = obj_.at(key);
        if (!v.is_boolean()) fail(key, "must be true or false");
        dst = v.get<bool>();
    }

    template <class T>
    void list(const char* key, std::vector<T>& dst) {
        if (!has(key)) return;
        const json& v = obj_.at(key);
        if (!v.is_array() || v.empty()) fail(key, "must be a nonempty array");
        std::vector<T> out;
        for (const json& item : v) {
            if constexpr (std::is_floating_point_v<T>) {
                if (!item.is_number()) fail(key, "must contain numbers");
            } else {
                if (!item.is_number_integer() || item.get<long long>() < 0) fail(key, "must contain nonnegative integers");
            }
            out.push_back(item.get<T>());
        }
        dst = std::move(out);
    }

    void finish() const {
        for (const auto& [key, value] : obj_.items()) {
            if (!seen_.count(key)) {
                throw ValidationError("config field '" + display(key.c_str()) + "' is not recognized");
            }
        }
    }

    [[noreturn]] void fail(const char* key, const std::string& what) const {
        throw ValidationError("config field '" + display(key) + "' " + what);
    }

private:
    std::string display(const char* key = nullptr) const {
        if (key == nullptr) return prefix_;
        return prefix_.empty() ? std::string(key) : prefix_ + "." + key;
    }

    const json& obj_;
    std::string prefix_;
    std::set<std::string> seen_;
};

void read_mdp(const json& doc, MdpSpec& spec) {
    FieldReader r(doc, "mdp");
    r.text("builtin", spec.builtin);
    r.real("gamma", spec.gamma);
    r.optional_real("p", spec.p);
    r.integer("num_copies", spec.num_copies);
    r.integer("num_actions_state1", spec.num_actions_state1);
    r.text("path", spec.path);
    r.finish();
    if (spec.path.empty() && spec.builtin != "experiment" && spec.builtin != "hard") {
        r.fail("builtin", "must be 'experiment' or 'hard'");
    }
}

void read_dvr(const json& doc, DvrBlock& b) {
    FieldReader r(doc, "dvr");
    r.real("eps", b.eps);
    r.real("delta", b.delta);
    r.real("eta", b.eta);
    r.real("alpha", b.alpha);
    r.real("scale_l", b.scale_l);
    r.real("scale_b", b.scale_b);
    r.integer("min_l", b.min_l);
    r.integer("min_b", b.min_b);
    r.finish();
}

void read_sync(const json& doc, SyncBlock& b) {
    FieldReader r(doc, "sync");
    r.integer("total_steps", b.total_steps);
    r.integer("batch_size", b.batch_size);
    r.text("step_kind", b.step_kind);
    r.optional_real("eta", b.eta);
    r.real("c_eta", b.c_eta);
    r.text("comm", b.comm);
    r.integer("period", b.period);
    r.integer("bits_per_real", b.bits_per_real);
    r.finish();
    if (b.step_kind != "constant" && b.step_kind != "rescaled_linear") {
        r.fail("step_kind", "must be 'constant' or 'rescaled_linear'");
    }
    if (b.comm != "every" && b.comm != "final" && b.comm != "period") {
        r.fail("comm", "must be 'every', 'final' or 'period'");
    }
}

}  // namespace

ExperimentConfig parse_config(const json& doc, std::optional<ExperimentKind> fallback) {
    if (!doc.is_object()) throw ValidationError("config: top level must be an object");
    FieldReader top(doc, "");
    int version = 0;
    if (!top.has("schema_version")) throw ValidationError("config field 'schema_version' is missing");
    top.integer("schema_version", version);
    if (version != kConfigSchemaVersion) {
        top.fail("schema_version", "must be " + std::to_string(kConfigSchemaVersion));
    }

    std::optional<ExperimentKind> kind = fallback;
    if (top.has("experiment")) {
        std::string name;
        top.text("experiment", name);
        kind = parse_kind(name);
    }
    if (!kind) throw ValidationError("config field 'experiment' is missing");
    ExperimentConfig cfg = default_config(*kind);

    if (top.has("mdp")) read_mdp(top.raw("mdp"), cfg.mdp);
    const bool has_dvr = top.has("dvr");
    const bool has_sync = top.has("sync");
    if (*kind == ExperimentKind::kSingle) {
        if (has_dvr && has_sync) throw ValidationError("config: 'single' takes exactly one of 'dvr' and 'sync'");
        if (has_sync) cfg.dvr.reset();
    }
    if (has_dvr) {
        DvrBlock b = cfg.dvr.value_or(DvrBlock{});
        read_dvr(top.raw("dvr"), b);
        cfg.dvr = b;
    }
    if (has_sync) {
        SyncBlock b = cfg.sync.value_or(SyncBlock{});
        read_sync(top.raw("sync"), b);
        cfg.sync = b;
    }
    top.list("agents", cfg.agents);
    top.list("gammas", cfg.gammas);
    top.integer("master_seed", cfg.master_seed);
    top.integer("num_seeds", cfg.num_seeds);
    top.list("seeds", cfg.seeds);
    top.optional_real("target_error", cfg.target_error);
    top.real("tol", cfg.tol);
    top.real("checkpoint_factor", cfg.checkpoint_factor);
    top.boolean("early_stop", cfg.early_stop);
    top.boolean("execute", cfg.execute);
    top.integer("threads", cfg.threads);
    top.finish();

    if (cfg.num_seeds == 0 && cfg.seeds.empty()) top.fail("num_seeds", "must be positive");
    {
        std::vector<std::uint64_t> sorted = cfg.seeds;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) top.fail("seeds", "must be distinct");
    }
    for (std::uint32_t m : cfg.agents) {
        if (m == 0) top.fail("agents", "must be positive");
    }
    if (!(cfg.tol > 0.0)) top.fail("tol", "must be positive");
    if (!(cfg.checkpoint_factor > 1.0)) top.fail("checkpoint_factor", "must exceed 1");
    if ((*kind == ExperimentKind::kSpeedup || *kind == ExperimentKind::kHorizon ||
         *kind == ExperimentKind::kCompare) && !cfg.dvr) {
        throw ValidationError("config field 'dvr' is required for " + kind_name(*kind));
    }
    if ((*kind == ExperimentKind::kLowerbound || *kind == ExperimentKind::kCompare) && !cfg.sync) {
        throw ValidationError("config field 'sync' is required for " + kind_name(*kind));
    }
    if (*kind == ExperimentKind::kHorizon && cfg.gammas.empty()) top.fail("gammas", "must be a nonempty array");
    if (*kind == ExperimentKind::kLowerbound && cfg.agents.size() < 2) {
        top.fail("agents", "needs at least two agent counts");
    }
    return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
    json doc;
    doc["schema_version"] = kConfigSchemaVersion;
    doc["experiment"] = kind_name(cfg.kind);
    json mdp{{"builtin", cfg.mdp.builtin},
             {"gamma", cfg.mdp.gamma},
             {"p", cfg.mdp.p ? json(*cfg.mdp.p) : json(nullptr)},
             {"num_copies", cfg.mdp.num_copies},
             {"num_actions_state1", cfg.mdp.num_actions_state1},
             {"path", cfg.mdp.path}};
    doc["mdp"] = mdp;
    if (cfg.dvr) {
        const DvrBlock& b = *cfg.dvr;
        doc["dvr"] = json{{"eps", b.eps},         {"delta", b.delta},     {"eta", b.eta},
                          {"alpha", b.alpha},     {"scale_l", b.scale_l}, {"scale_b", b.scale_b},
                          {"min_l", b.min_l},     {"min_b", b.min_b}};
    }
    if (cfg.sync) {
        const SyncBlock& b = *cfg.sync;
        doc["sync"] = json{{"total_steps", b.total_steps},
                           {"batch_size", b.batch_size},
                           {"step_kind", b.step_kind},
                           {"eta", b.eta ? json(*b.eta) : json(nullptr)},
                           {"c_eta", b.c_eta},
                           {"comm", b.comm},
                           {"period", b.period},
                           {"bits_per_real", b.bits_per_real}};
    }
    doc["agents"] = cfg.agents;
    if (!cfg.gammas.empty()) doc["gammas"] = cfg.gammas;
    doc["master_seed"] = cfg.master_seed;
    doc["num_seeds"] = cfg.num_seeds;
    if (!cfg.seeds.empty()) doc["seeds"] = cfg.seeds;
    doc["target_error"] = cfg.target_error ? json(*cfg.target_error) : json(nullptr);
    doc["tol"] = cfg.tol;
    doc["checkpoint_factor"] = cfg.checkpoint_factor;
    doc["early_stop"] = cfg.early_stop;
    doc["execute"] = cfg.execute;
    return doc;
}

TabularMdp build_mdp(const MdpSpec& spec) {
    if (!spec.path.empty()) return load_mdp(spec.path);
    return build_mdp(spec, spec.gamma);
}

TabularMdp build_mdp(const MdpSpec& spec, double gamma) {
    if (!spec.path.empty()) {
        TabularMdp loaded = load_mdp(spec.path);
        if (loaded.gamma() != gamma) throw ValidationError("MDP file gamma differs from the requested gamma");
        return loaded;
    }
    if (spec.builtin == "hard") return build_hard_mdp(gamma, spec.num_copies, spec.num_actions_state1);
    if (spec.builtin == "experiment") return build_experiment_mdp(gamma, spec.p ? *spec.p : hard_instance_p(gamma));
    throw ValidationError("config field 'mdp.builtin' must be 'experiment' or 'hard'");
}

DvrSettings dvr_settings(const DvrBlock& b, double gamma, std::uint32_t num_agents, std::size_t num_pairs) {
    DvrSettings s;
    s.gamma = gamma;
    s.eps = b.eps;
    s.delta = b.delta;
    s.eta = b.eta;
    s.num_agents = num_agents;
    s.num_pairs = num_pairs;
    s.alpha = b.alpha;
    s.scale_l = b.scale_l;
    s.scale_b = b.scale_b;
    s.min_l = b.min_l;
    s.min_b = b.min_b;
    return s;
}

SyncRunConfig sync_config(const SyncBlock& b, double gamma, std::uint32_t num_agents, std::uint64_t seed) {
    if (b.total_steps == 0) throw ValidationError("config field 'sync.total_steps' must be positive");
    SyncRunConfig cfg;
    cfg.total_steps = b.total_steps;
    cfg.batch_size = b.batch_size;
    cfg.num_agents = num_agents;
    cfg.master_seed = seed;
    cfg.bits_per_real = b.bits_per_real;
    if (b.step_kind == "rescaled_linear") {
        cfg.step_size = StepSizeSchedule::rescaled_linear(b.c_eta);
    } else {
        const double eta = b.eta ? *b.eta : 4.0 / ((1.0 - gamma) * static_cast<double>(b.total_steps));
        cfg.step_size = StepSizeSchedule::constant(std::min(eta, 1.0));
    }
    if (b.comm == "every") {
        cfg.comm = CommSchedule::every_step(b.total_steps);
    } else if (b.comm == "final") {
        cfg.comm = CommSchedule::final_only(b.total_steps);
    } else {
        cfg.comm = CommSchedule::periodic(b.period, b.total_steps);
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// Output helpers

std::string format_real(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, end);
}

std::string to_csv(const CsvTable& table) {
    std::string out;
    auto emit = [&out](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += cells[i];
        }
        out += '\n';
    };
    emit(table.header);
    for (const auto& row : table.rows) emit(row);
    return out;
}

namespace {

std::string opt_to_string(const std::optional<std::uint64_t>& v) { return v ? std::to_string(*v) : std::string(); }

double target_of(const ExperimentConfig& cfg) {
    if (cfg.target_error) return *cfg.target_error;
    if (cfg.dvr) return cfg.dvr->eps;
    throw ValidationError("config field 'target_error' is required without a 'dvr' block");
}

std::uint32_t first_agent_count(const ExperimentConfig& cfg) {
    if (cfg.agents.empty()) throw ValidationError("config field 'agents' must be a nonempty array");
    return cfg.agents.front();
}

json closed_form_json(const std::vector<double>& expected, const std::vector<double>& actual) {
    double worst = 0.0;
    for (std::size_t s = 0; s < actual.size(); ++s) worst = std::max(worst, std::abs(expected[s % expected.size()] - actual[s]));
    return json{{"v_star", expected}, {"max_abs_diff", worst}};
}

}  // namespace

// ---------------------------------------------------------------------------
// Studies

SolveOutput study_solve(const ExperimentConfig& cfg) {
    const TabularMdp mdp = build_mdp(cfg.mdp);
    SolveOutput out;
    out.report = solve_q_star(mdp, cfg.tol);
    if (cfg.mdp.path.empty()) {
        if (cfg.mdp.builtin == "hard") {
            out.closed_form = hard_instance_values(mdp.gamma());
        } else {
            const double p = cfg.mdp.p ? *cfg.mdp.p : hard_instance_p(mdp.gamma());
            const double middle = 1.0 / (1.0 - mdp.gamma() * p);
            out.closed_form = std::vector<double>{0.0, middle, middle};
        }
    }
    json doc{{"gamma", mdp.gamma()},
             {"num_states", mdp.num_states()},
             {"num_actions", mdp.num_actions()},
             {"tol", cfg.tol},
             {"iterations", out.report.iterations},
             {"residual", out.report.residual},
             {"q_star", qtable_to_json(out.report.q_star)},
             {"v_star", out.report.v_star}};
    if (out.closed_form) {
        if (cfg.mdp.builtin == "hard" && !hard_instance_regime(mdp.gamma())) doc["warning"] = "gamma below 5/6";
        doc["closed_form"] = closed_form_json(*out.closed_form, out.report.v_star);
    }
    out.document = std::move(doc);
    return out;
}

StudyOutput study_compare(const ExperimentConfig& cfg) {
    const TabularMdp mdp = build_mdp(cfg.mdp);
    const QTable q_star = solve_q_star(mdp, cfg.tol).q_star;
    const std::uint32_t agents = first_agent_count(cfg);
    const DvrParams params = derive_params(dvr_settings(*cfg.dvr, mdp.gamma(), agents, mdp.num_pairs()));
    SyncBlock sync_block = *cfg.sync;
    if (sync_block.total_steps == 0) {
        sync_block.total_steps = std::max<std::uint64_t>(1, planned_ledger(params).samples_per_agent_per_sa /
                                                               sync_block.batch_size);
    }
    const auto seeds = cfg.seed_list();

    std::vector<RunRecord> dvr_records(seeds.size());
    std::vector<RunRecord> sync_records(seeds.size());
    parallel_for(2 * seeds.size(), cfg.threads, [&](std::size_t job) {
        const std::size_t i = job / 2;
        if (job % 2 == 0) {
            const DvrRun run = run_fed_dvr(mdp, params, q_star, RngPlan(seeds[i]));
            dvr_records[i] = to_run_record(run, mdp.num_pairs());
        } else {
            const SyncRunConfig sc = sync_config(sync_block, mdp.gamma(), agents, seeds[i]);
            sync_records[i] = run_sync(mdp, sc, q_star, geometric_checkpoints(sc.total_steps, cfg.checkpoint_factor));
        }
    });

    CsvTable table{"compare", {"algo", "seed", "samples_per_agent", "error", "bits_per_agent", "rounds"}, {}};
    auto add = [&](const std::string& algo, std::uint64_t seed, const RunRecord& rec) {
        for (const RunRow& row : rec.rows) {
            table.rows.push_back({algo, std::to_string(seed), std::to_string(row.samples_per_agent),
                                  format_real(row.agent_error), std::to_string(row.bits_per_agent),
                                  std::to_string(row.rounds)});
        }
    };
    for (std::size_t i = 0; i < seeds.size(); ++i) add("fed-dvr-q", seeds[i], dvr_records[i]);
    for (std::size_t i = 0; i < seeds.size(); ++i) add("sync-baseline", seeds[i], sync_records[i]);

    StudyOutput out;
    out.tables.push_back(std::move(table));
    std::vector<double> dvr_final;
    std::vector<double> sync_final;
    for (const auto& r : dvr_records) dvr_final.push_back(r.rows.back().agent_error);
    for (const auto& r : sync_records) sync_final.push_back(r.rows.back().agent_error);
    out.summary = json{{"num_agents", agents},
                       {"baseline_total_steps", sync_block.total_steps},
                       {"baseline_note", "intermittent averaging with constant step size; knobs are approximations"},
                       {"dvr_final_error", error_rate(dvr_final).mean},
                       {"baseline_final_error", error_rate(sync_final).mean},
                       {"dvr_bits_per_agent", dvr_records.front().rows.back().bits_per_agent},
                       {"baseline_bits_per_agent", sync_records.front().rows.back().bits_per_agent}};
    return out;
}

StudyOutput study_speedup(const ExperimentConfig& cfg, std::vector<SpeedupPoint>* points_out,
                          std::optional<TrendFit>* fit_out) {
    const double target = target_of(cfg);
    const auto seeds = cfg.seed_list();
    const TabularMdp mdp = build_mdp(cfg.mdp);
    const QTable q_star = solve_q_star(mdp, cfg.tol).q_star;

    std::vector<DvrParams> params;
    for (std::uint32_t m : cfg.agents) {
        params.push_back(derive_params(dvr_settings(*cfg.dvr, mdp.gamma(), m, mdp.num_pairs())));
    }
    DvrRunOptions options;
    if (cfg.early_stop) options.stop_below = target;

    std::vector<std::optional<std::uint64_t>> sc(cfg.agents.size() * seeds.size());
    parallel_for(sc.size(), cfg.threads, [&](std::size_t job) {
        const DvrRun run = run_fed_dvr(mdp, params[job / seeds.size()], q_star, RngPlan(seeds[job % seeds.size()]),
                                       options);
        sc[job] = samples_to_target(to_run_record(run, mdp.num_pairs()), target);
    });

    CsvTable table{"speedup", {"M", "seed", "sc", "rounds", "bits"}, {}};
    std::vector<SpeedupPoint> points;
    for (std::size_t a = 0; a < cfg.agents.size(); ++a) {
        const CommLedger planned = planned_ledger(params[a]);
        SpeedupPoint point;
        point.num_agents = cfg.agents[a];
        point.rounds = planned.rounds;
        point.bits = planned.bits_per_agent;
        double sum = 0.0;
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            const auto& value = sc[a * seeds.size() + i];
            point.sc.push_back(value);
            if (value) {
                sum += static_cast<double>(*value);
                ++point.reached;
            }
            table.rows.push_back({std::to_string(point.num_agents), std::to_string(seeds[i]), opt_to_string(value),
                                  std::to_string(point.rounds), std::to_string(point.bits)});
        }
        if (point.reached > 0) point.mean_sc = sum / static_cast<double>(point.reached);
        points.push_back(std::move(point));
    }

    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& p : points) {
        if (p.mean_sc) {
            xs.push_back(p.num_agents);
            ys.push_back(*p.mean_sc);
        }
    }
    std::optional<TrendFit> fit;
    if (xs.size() >= 2) fit = loglog_fit(xs, ys);

    StudyOutput out;
    out.tables.push_back(std::move(table));
    json summary_points = json::array();
    for (const auto& p : points) {
        summary_points.push_back(json{{"M", p.num_agents},
                                      {"mean_sc", p.mean_sc ? json(*p.mean_sc) : json(nullptr)},
                                      {"seeds_reached", p.reached},
                                      {"rounds", p.rounds},
                                      {"bits", p.bits}});
    }
    out.summary = json{{"target_error", target}, {"points", summary_points}};
    if (fit) out.summary["loglog_fit"] = json{{"slope", fit->slope}, {"intercept", fit->intercept}, {"r_squared", fit->r_squared}};
    if (points_out) *points_out = std::move(points);
    if (fit_out) *fit_out = fit;
    return out;
}

StudyOutput study_horizon(const ExperimentConfig& cfg, std::vector<HorizonPoint>* points_out, TrendFit* fit_out) {
    const std::uint32_t agents = first_agent_count(cfg);
    std::vector<HorizonPoint> points;
    for (double gamma : cfg.gammas) {
        const TabularMdp mdp = build_mdp(cfg.mdp, gamma);
        const DvrParams params = derive_params(dvr_settings(*cfg.dvr, gamma, agents, mdp.num_pairs()));
        const CommLedger planned = planned_ledger(params);
        if (cfg.execute) {
            const QTable q_star = solve_q_star(mdp, cfg.tol).q_star;
            const DvrRun run = run_fed_dvr(mdp, params, q_star, RngPlan(cfg.seed_list().front()));
            if (run.total.rounds != planned.rounds || run.total.bits_per_agent != planned.bits_per_agent) {
                throw Error("horizon: executed ledger differs from the planned ledger at gamma " + format_real(gamma));
            }
        }
        points.push_back({gamma, 1.0 / (1.0 - gamma), planned.rounds, planned.bits_per_agent});
    }

    CsvTable table{"horizon", {"gamma", "inv_horizon", "rounds", "bits"}, {}};
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& p : points) {
        table.rows.push_back({format_real(p.gamma), format_real(p.inv_horizon), std::to_string(p.rounds),
                              std::to_string(p.bits)});
        xs.push_back(p.inv_horizon);
        ys.push_back(static_cast<double>(p.rounds));
    }
    StudyOutput out;
    out.tables.push_back(std::move(table));
    out.summary = json::object();
    if (xs.size() >= 2) {
        const TrendFit fit = linear_fit(xs, ys);
        out.summary["rounds_vs_inv_horizon"] = json{{"slope", fit.slope}, {"intercept", fit.intercept}, {"r_squared", fit.r_squared}};
        if (fit_out) *fit_out = fit;
    }
    if (points_out) *points_out = std::move(points);
    return out;
}

StudyOutput study_lowerbound(const ExperimentConfig& cfg, LowerboundSummary* summary_out) {
    const TabularMdp mdp = build_mdp(cfg.mdp);
    const auto seeds = cfg.seed_list();
    if (!cfg.seeds.empty()) {
        // The probe runs consecutive seeds; an explicit list must be consecutive too.
        for (std::size_t i = 1; i < seeds.size(); ++i) {
            if (seeds[i] != seeds[0] + i) throw ValidationError("config field 'seeds' must be consecutive for lowerbound");
        }
    }
    SyncBlock dense = *cfg.sync;
    dense.comm = "every";
    SyncBlock sparse = *cfg.sync;
    sparse.comm = "final";

    LowerboundSummary summary;
    const double target = cfg.target_error.value_or(0.0);
    summary.dense = run_speedup_probe(mdp, sync_config(dense, mdp.gamma(), 1, seeds.front()), cfg.agents,
                                      seeds.size(), target, cfg.threads);
    summary.sparse = run_speedup_probe(mdp, sync_config(sparse, mdp.gamma(), 1, seeds.front()), cfg.agents,
                                       seeds.size(), target, cfg.threads);
    summary.dense_ratio = summary.dense.back().mean_final_error / summary.dense.front().mean_final_error;
    summary.sparse_ratio = summary.sparse.back().mean_final_error / summary.sparse.front().mean_final_error;

    CsvTable table{"lowerbound", {"schedule", "M", "seed", "final_error"}, {}};
    auto add = [&](const char* schedule, const std::vector<SpeedupProbeRow>& rows) {
        for (const auto& row : rows) {
            for (std::size_t i = 0; i < row.final_errors.size(); ++i) {
                table.rows.push_back({schedule, std::to_string(row.num_agents), std::to_string(seeds[i]),
                                      format_real(row.final_errors[i])});
            }
        }
    };
    add("every_step", summary.dense);
    add("final_only", summary.sparse);

    StudyOutput out;
    out.tables.push_back(std::move(table));
    auto rows_json = [](const std::vector<SpeedupProbeRow>& rows) {
        json arr = json::array();
        for (const auto& r : rows) {
            arr.push_back(json{{"M", r.num_agents}, {"mean_final_error", r.mean_final_error},
                               {"stderr_final_error", r.stderr_final_error}});
        }
        return arr;
    };
    const SyncRunConfig probe = sync_config(dense, mdp.gamma(), 1, seeds.front());
    out.summary = json{{"eta", probe.step_size.eta},
                       {"every_step", rows_json(summary.dense)},
                       {"final_only", rows_json(summary.sparse)},
                       {"every_step_ratio", summary.dense_ratio},
                       {"final_only_ratio", summary.sparse_ratio}};
    if (summary_out) *summary_out = std::move(summary);
    return out;
}

StudyOutput study_single(const ExperimentConfig& cfg, std::vector<DvrRun>* dvr_runs) {
    if (static_cast<bool>(cfg.dvr) == static_cast<bool>(cfg.sync)) {
        throw ValidationError("config: 'single' takes exactly one of 'dvr' and 'sync'");
    }
    const TabularMdp mdp = build_mdp(cfg.mdp);
    const QTable q_star = solve_q_star(mdp, cfg.tol).q_star;
    const std::uint32_t agents = first_agent_count(cfg);
    const auto seeds = cfg.seed_list();

    CsvTable table{"single",
                   {"algo", "seed", "step", "samples_per_agent", "error", "averaged_error", "rounds", "bits_per_agent",
                    "max_compressor_input", "bound"},
                   {}};
    StudyOutput out;
    if (cfg.dvr) {
        const DvrParams params = derive_params(dvr_settings(*cfg.dvr, mdp.gamma(), agents, mdp.num_pairs()));
        DvrRunOptions options;
        if (cfg.early_stop) options.stop_below = target_of(cfg);
        std::vector<DvrRun> runs(seeds.size());
        parallel_for(seeds.size(), cfg.threads, [&](std::size_t i) {
            runs[i] = run_fed_dvr(mdp, params, q_star, RngPlan(seeds[i]), options);
        });
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            const RunRecord rec = to_run_record(runs[i], mdp.num_pairs());
            for (std::size_t k = 0; k < rec.rows.size(); ++k) {
                const RunRow& row = rec.rows[k];
                const EpochReport& e = runs[i].epochs[k];
                table.rows.push_back({"fed-dvr-q", std::to_string(seeds[i]), std::to_string(row.step),
                                      std::to_string(row.samples_per_agent), format_real(row.agent_error),
                                      format_real(row.averaged_error), std::to_string(row.rounds),
                                      std::to_string(row.bits_per_agent), format_real(e.max_compressor_input),
                                      format_real(e.bound)});
            }
        }
        const CommLedger planned = planned_ledger(params);
        json ls = json::array();
        json ds = json::array();
        for (std::uint32_t k = 1; k <= params.num_epochs; ++k) {
            ls.push_back(params.recentering_size(k));
            ds.push_back(params.bound(k));
        }
        out.summary = json{{"K", params.num_epochs}, {"K0", params.k0}, {"I", params.iters_per_epoch},
                           {"B", params.batch_size}, {"J", params.bits}, {"L", ls}, {"D", ds},
                           {"planned_rounds", planned.rounds}, {"planned_bits_per_agent", planned.bits_per_agent},
                           {"planned_samples_per_agent_per_sa", planned.samples_per_agent_per_sa}};
        if (dvr_runs) *dvr_runs = std::move(runs);
    } else {
        std::vector<RunRecord> records(seeds.size());
        parallel_for(seeds.size(), cfg.threads, [&](std::size_t i) {
            const SyncRunConfig sc = sync_config(*cfg.sync, mdp.gamma(), agents, seeds[i]);
            records[i] = run_sync(mdp, sc, q_star, geometric_checkpoints(sc.total_steps, cfg.checkpoint_factor));
        });
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            for (const RunRow& row : records[i].rows) {
                table.rows.push_back({"sync", std::to_string(seeds[i]), std::to_string(row.step),
                                      std::to_string(row.samples_per_agent), format_real(row.agent_error),
                                      format_real(row.averaged_error), std::to_string(row.rounds),
                                      std::to_string(row.bits_per_agent), "", ""});
            }
        }
        out.summary = json{{"total_steps", cfg.sync->total_steps}};
    }
    out.tables.push_back(std::move(table));
    return out;
}

void write_study(const StudyOutput& output, const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    const json config = config_to_json(cfg);
    for (const CsvTable& table : output.tables) {
        const auto csv_path = out_dir / (table.name + ".csv");
        std::ofstream csv(csv_path, std::ios::binary);
        if (!csv) throw Error("cannot write " + csv_path.string());
        csv << to_csv(table);

        json meta{{"config", config},
                  {"version", kVersion},
                  {"seeds", cfg.seed_list()},
                  {"columns", table.header},
                  {"error_definition", "sup-norm error on the configured MDP (not a sup over MDPs)"}};
        std::ofstream side(out_dir / (table.name + ".csv.meta.json"), std::ios::binary);
        side << meta.dump(2) << '\n';
    }
    std::ofstream summary(out_dir / (kind_name(cfg.kind) + "_summary.json"), std::ios::binary);
    summary << output.summary.dump(2) << '\n';
}

}  // namespace fedq
