// fedq: command-line front end for the experiment harness.
//
// Exit status: 0 on success, 2 for configuration or input validation errors,
// 3 when a run fails (e.g. a quantizer input outside its bound).

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedq/error.hpp"
#include "fedq/experiments.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> num_seeds;
    std::optional<unsigned> threads;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--out", flags.out_dir, "output directory (default: $FEDQ_OUT_DIR or ./out)");
    cmd->add_option("--seed", flags.seed, "master seed");
    cmd->add_option("--num-seeds", flags.num_seeds, "number of consecutive seeds");
    cmd->add_option("--threads", flags.threads, "worker threads, 0 = one per core");
}

fedq::ExperimentConfig load_config(fedq::ExperimentKind kind, const CommonFlags& flags) {
    fedq::ExperimentConfig cfg = fedq::default_config(kind);
    if (!flags.config_path.empty()) {
        std::ifstream in(flags.config_path);
        if (!in) throw fedq::ValidationError("cannot open config " + flags.config_path);
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw fedq::ValidationError("config " + flags.config_path + ": " + e.what());
        }
        cfg = fedq::parse_config(doc, kind);
        if (cfg.kind != kind) {
            throw fedq::ValidationError("config field 'experiment' is '" + fedq::kind_name(cfg.kind) +
                                        "' but the subcommand is '" + fedq::kind_name(kind) + "'");
        }
    }
    if (flags.seed) {
        cfg.master_seed = *flags.seed;
        cfg.seeds.clear();
    }
    if (flags.num_seeds) {
        if (*flags.num_seeds == 0) throw fedq::ValidationError("--num-seeds must be positive");
        cfg.num_seeds = *flags.num_seeds;
        cfg.seeds.clear();
    }
    if (flags.threads) cfg.threads = *flags.threads;
    return cfg;
}

std::filesystem::path output_dir(const CommonFlags& flags) {
    if (!flags.out_dir.empty()) return flags.out_dir;
    if (const char* env = std::getenv("FEDQ_OUT_DIR"); env != nullptr && *env != '\0') return env;
    return "out";
}

int run(fedq::ExperimentKind kind, const CommonFlags& flags) {
    const fedq::ExperimentConfig cfg = load_config(kind, flags);
    const auto out = output_dir(flags);
    if (kind == fedq::ExperimentKind::kSolve) {
        const fedq::SolveOutput solved = fedq::study_solve(cfg);
        std::filesystem::create_directories(out);
        nlohmann::json doc = solved.document;
        doc["config"] = fedq::config_to_json(cfg);
        doc["version"] = fedq::kVersion;
        std::ofstream(out / "q_star.json", std::ios::binary) << doc.dump(2) << '\n';
        std::cout << "v_star:";
        for (double v : solved.report.v_star) std::cout << ' ' << fedq::format_real(v);
        std::cout << "\niterations: " << solved.report.iterations << "\nwrote " << (out / "q_star.json").string()
                  << '\n';
        return 0;
    }
    fedq::StudyOutput result;
    switch (kind) {
        case fedq::ExperimentKind::kCompare: result = fedq::study_compare(cfg); break;
        case fedq::ExperimentKind::kSpeedup: result = fedq::study_speedup(cfg); break;
        case fedq::ExperimentKind::kHorizon: result = fedq::study_horizon(cfg); break;
        case fedq::ExperimentKind::kLowerbound: result = fedq::study_lowerbound(cfg); break;
        default: result = fedq::study_single(cfg); break;
    }
    fedq::write_study(result, cfg, out);
    std::cout << result.summary.dump(2) << '\n';
    for (const auto& table : result.tables) std::cout << "wrote " << (out / (table.name + ".csv")).string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated Q-learning simulator"};
    app.set_version_flag("--version", std::string(fedq::kVersion));
    app.require_subcommand(1);

    struct Entry {
        fedq::ExperimentKind kind;
        const char* help;
    };
    const Entry entries[] = {
        {fedq::ExperimentKind::kSolve, "solve an MDP for Q* and compare with closed forms"},
        {fedq::ExperimentKind::kCompare, "Fed-DVR-Q against the intermittent-averaging baseline"},
        {fedq::ExperimentKind::kSpeedup, "samples to target accuracy as the number of agents grows"},
        {fedq::ExperimentKind::kHorizon, "communication cost across discount factors"},
        {fedq::ExperimentKind::kLowerbound, "collaborative gain with dense and sparse averaging"},
        {fedq::ExperimentKind::kSingle, "one algorithm over a list of seeds"},
    };
    CommonFlags flags;
    std::optional<fedq::ExperimentKind> chosen;
    for (const Entry& e : entries) {
        CLI::App* cmd = app.add_subcommand(fedq::kind_name(e.kind), e.help);
        add_common(cmd, flags);
        cmd->callback([&chosen, kind = e.kind] { chosen = kind; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        return run(*chosen, flags);
    } catch (const fedq::ValidationError& e) {
        std::cerr << "fedq: " << e.what() << '\n';
        return kExitValidation;
    } catch (const fedq::DimensionError& e) {
        std::cerr << "fedq: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "fedq: " << e.what() << '\n';
        return kExitRuntime;
    }
}
