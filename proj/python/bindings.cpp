// Python bindings for the simulator core. Arrays come back as numpy arrays;
// larger results (run records, study tables) come back as dicts and lists.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fedq/compression.hpp"
#include "fedq/error.hpp"
#include "fedq/experiments.hpp"
#include "fedq/feddvr.hpp"
#include "fedq/fedsync.hpp"
#include "fedq/mdp.hpp"
#include "fedq/mdp_io.hpp"

namespace py = pybind11;

namespace {

py::array_t<double> qtable_array(const fedq::QTable& q) {
    py::array_t<double> out({q.num_states(), q.num_actions()});
    std::copy(q.values().begin(), q.values().end(), out.mutable_data());
    return out;
}

fedq::QTable qtable_from(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw fedq::DimensionError("expected a 2-d array of shape (num_states, num_actions)");
    fedq::QTable q(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), q.values().begin());
    return q;
}

py::dict record_dict(const fedq::RunRecord& rec) {
    py::list rows;
    for (const auto& r : rec.rows) {
        py::dict row;
        row["step"] = r.step;
        row["samples_per_agent"] = r.samples_per_agent;
        row["agent_error"] = r.agent_error;
        row["averaged_error"] = r.averaged_error;
        row["rounds"] = r.rounds;
        row["bits_per_agent"] = r.bits_per_agent;
        rows.append(row);
    }
    py::dict out;
    out["num_pairs"] = rec.num_pairs;
    out["rows"] = rows;
    return out;
}

py::dict ledger_dict(const fedq::CommLedger& l) {
    py::dict d;
    d["rounds"] = l.rounds;
    d["bits_per_agent"] = l.bits_per_agent;
    d["samples_per_agent_per_sa"] = l.samples_per_agent_per_sa;
    return d;
}

fedq::DvrSettings make_settings(double gamma, double eps, double delta, double eta, std::uint32_t num_agents,
                                std::size_t num_pairs, double alpha, double scale_l, double scale_b,
                                std::uint64_t min_l, std::uint64_t min_b) {
    fedq::DvrSettings s;
    s.gamma = gamma;
    s.eps = eps;
    s.delta = delta;
    s.eta = eta;
    s.num_agents = num_agents;
    s.num_pairs = num_pairs;
    s.alpha = alpha;
    s.scale_l = scale_l;
    s.scale_b = scale_b;
    s.min_l = min_l;
    s.min_b = min_b;
    return s;
}

py::dict params_dict(const fedq::DvrParams& p) {
    py::dict d;
    d["num_epochs"] = p.num_epochs;
    d["k0"] = p.k0;
    d["iters_per_epoch"] = p.iters_per_epoch;
    d["batch_size"] = p.batch_size;
    d["bits"] = p.bits;
    d["log_factor"] = p.log_factor;
    d["recentering_sizes"] = p.recentering_sizes;
    d["bounds"] = p.bounds;
    d["planned"] = ledger_dict(fedq::planned_ledger(p));
    return d;
}

py::dict study_dict(const fedq::StudyOutput& out) {
    py::dict tables;
    for (const auto& t : out.tables) tables[py::str(t.name)] = fedq::to_csv(t);
    py::dict d;
    d["tables"] = tables;
    d["summary"] = out.summary.dump();
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Federated Q-learning simulator core";
    m.attr("__version__") = fedq::kVersion;

    auto base = py::register_exception<fedq::Error>(m, "FedqError");
    py::register_exception<fedq::ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<fedq::DimensionError>(m, "DimensionError", base.ptr());
    py::register_exception<fedq::CompressorBoundError>(m, "CompressorBoundError", base.ptr());

    py::class_<fedq::TabularMdp>(m, "TabularMdp")
        .def_property_readonly("num_states", &fedq::TabularMdp::num_states)
        .def_property_readonly("num_actions", &fedq::TabularMdp::num_actions)
        .def_property_readonly("gamma", &fedq::TabularMdp::gamma)
        .def("reward", &fedq::TabularMdp::reward, py::arg("s"), py::arg("a"))
        .def("transition", &fedq::TabularMdp::transition, py::arg("s"), py::arg("a"), py::arg("next"))
        .def("to_json", [](const fedq::TabularMdp& mdp) { return fedq::mdp_to_json(mdp).dump(); });

    m.def("build_hard_mdp", &fedq::build_hard_mdp, py::arg("gamma"), py::arg("num_copies") = 1,
          py::arg("num_actions_state1") = 2);
    m.def("build_experiment_mdp", &fedq::build_experiment_mdp, py::arg("gamma"), py::arg("p"));
    m.def("hard_instance_p", &fedq::hard_instance_p, py::arg("gamma"));
    m.def("load_mdp", [](const std::string& path) { return fedq::load_mdp(path); }, py::arg("path"));
    m.def("mdp_from_json", [](const std::string& text) { return fedq::mdp_from_json(nlohmann::json::parse(text)); },
          py::arg("text"));

    m.def("solve_q_star",
          [](const fedq::TabularMdp& mdp, double tol) {
              const auto r = fedq::solve_q_star(mdp, tol);
              py::dict d;
              d["q_star"] = qtable_array(r.q_star);
              d["v_star"] = r.v_star;
              d["iterations"] = r.iterations;
              d["residual"] = r.residual;
              return d;
          },
          py::arg("mdp"), py::arg("tol") = 1e-10);
    m.def("bellman_apply",
          [](const fedq::TabularMdp& mdp, const py::array_t<double, py::array::c_style | py::array::forcecast>& q) {
              return qtable_array(fedq::bellman_apply(mdp, qtable_from(q)));
          },
          py::arg("mdp"), py::arg("q"));

    m.def("quantize",
          [](const std::vector<double>& v, double bound, unsigned bits, std::uint64_t seed, double alpha) {
              const fedq::QuantizerConfig cfg{bound, bits};
              fedq::RandomStream stream = fedq::RngPlan(seed).stream(0, 0, fedq::StreamPurpose::kTest);
              const auto msg = alpha >= 1.0 ? fedq::quantize(v, cfg, stream)
                                            : fedq::subsample_quantize(v, cfg, alpha, stream);
              py::dict d;
              d["decoded"] = fedq::decode(msg, cfg, v.size());
              d["level_indices"] = msg.level_indices;
              d["coordinate_ids"] = msg.coordinate_ids;
              d["bit_cost"] = msg.bit_cost;
              const auto bytes = fedq::pack_message(msg, cfg);
              d["wire"] = py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
              return d;
          },
          py::arg("v"), py::arg("bound"), py::arg("bits"), py::arg("seed") = 0, py::arg("alpha") = 1.0);

    m.def("derive_params",
          [](double gamma, double eps, double delta, double eta, std::uint32_t num_agents, std::size_t num_pairs,
             double alpha, double scale_l, double scale_b, std::uint64_t min_l, std::uint64_t min_b) {
              return params_dict(fedq::derive_params(
                  make_settings(gamma, eps, delta, eta, num_agents, num_pairs, alpha, scale_l, scale_b, min_l, min_b)));
          },
          py::arg("gamma"), py::arg("eps"), py::arg("delta") = 0.05, py::arg("eta") = 0.5, py::arg("num_agents") = 1,
          py::arg("num_pairs") = 1, py::arg("alpha") = 1.0, py::arg("scale_l") = 1.0, py::arg("scale_b") = 1.0,
          py::arg("min_l") = 1, py::arg("min_b") = 1);

    m.def("run_fed_dvr",
          [](const fedq::TabularMdp& mdp, double eps, double delta, double eta, std::uint32_t num_agents,
             double alpha, double scale_l, double scale_b, std::uint64_t min_l, std::uint64_t min_b,
             std::uint64_t seed) {
              const auto params = fedq::derive_params(make_settings(mdp.gamma(), eps, delta, eta, num_agents,
                                                                    mdp.num_pairs(), alpha, scale_l, scale_b, min_l,
                                                                    min_b));
              const auto q_star = fedq::solve_q_star(mdp, 1e-12).q_star;
              fedq::DvrRun run;
              {
                  py::gil_scoped_release release;
                  run = fedq::run_fed_dvr(mdp, params, q_star, fedq::RngPlan(seed));
              }
              py::list epochs;
              for (const auto& e : run.epochs) {
                  py::dict d;
                  d["epoch"] = e.epoch;
                  d["error"] = e.error;
                  d["ledger"] = ledger_dict(e.ledger);
                  d["max_compressor_input"] = e.max_compressor_input;
                  d["bound"] = e.bound;
                  epochs.append(d);
              }
              py::dict out;
              out["q"] = qtable_array(run.q);
              out["epochs"] = epochs;
              out["total"] = ledger_dict(run.total);
              out["params"] = params_dict(params);
              return out;
          },
          py::arg("mdp"), py::arg("eps"), py::arg("delta") = 0.05, py::arg("eta") = 0.5, py::arg("num_agents") = 1,
          py::arg("alpha") = 1.0, py::arg("scale_l") = 1.0, py::arg("scale_b") = 1.0, py::arg("min_l") = 1,
          py::arg("min_b") = 1, py::arg("seed") = 1);

    m.def("run_sync",
          [](const fedq::TabularMdp& mdp, std::uint64_t total_steps, std::uint32_t num_agents, double eta,
             std::uint64_t batch_size, const std::string& comm, std::uint64_t period, std::uint64_t seed) {
              fedq::SyncBlock block;
              block.total_steps = total_steps;
              block.batch_size = batch_size;
              block.eta = eta;
              block.comm = comm;
              block.period = period;
              if (comm != "every" && comm != "final" && comm != "period") {
                  throw fedq::ValidationError("comm must be 'every', 'final' or 'period'");
              }
              const auto cfg = fedq::sync_config(block, mdp.gamma(), num_agents, seed);
              const auto q_star = fedq::solve_q_star(mdp, 1e-12).q_star;
              fedq::RunRecord rec;
              {
                  py::gil_scoped_release release;
                  rec = fedq::run_sync(mdp, cfg, q_star, fedq::geometric_checkpoints(total_steps));
              }
              return record_dict(rec);
          },
          py::arg("mdp"), py::arg("total_steps"), py::arg("num_agents") = 1, py::arg("eta") = 0.1,
          py::arg("batch_size") = 1, py::arg("comm") = "every", py::arg("period") = 10, py::arg("seed") = 1);

    m.def("run_experiment",
          [](const std::string& config_json) {
              const auto cfg = fedq::parse_config(nlohmann::json::parse(config_json));
              if (cfg.kind == fedq::ExperimentKind::kSolve) {
                  py::dict d;
                  d["tables"] = py::dict();
                  d["summary"] = fedq::study_solve(cfg).document.dump();
                  return d;
              }
              fedq::StudyOutput out;
              {
                  py::gil_scoped_release release;
                  switch (cfg.kind) {
                      case fedq::ExperimentKind::kCompare: out = fedq::study_compare(cfg); break;
                      case fedq::ExperimentKind::kSpeedup: out = fedq::study_speedup(cfg); break;
                      case fedq::ExperimentKind::kHorizon: out = fedq::study_horizon(cfg); break;
                      case fedq::ExperimentKind::kLowerbound: out = fedq::study_lowerbound(cfg); break;
                      default: out = fedq::study_single(cfg); break;
                  }
              }
              return study_dict(out);
          },
          py::arg("config_json"),
          "Runs a study from a JSON config. Returns {'tables': {name: csv_text}, 'summary': json_text}.");
}
