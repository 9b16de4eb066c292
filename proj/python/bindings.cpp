#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "polybandit/harness.hpp"
#include "polybandit/noiseless.hpp"
#include "polybandit/trace.hpp"
#include "polybandit/version.hpp"

namespace py = pybind11;
using namespace polybandit;

namespace {

py::dict trace_to_dict(const RegretTrace& tr) {
  py::dict meta;
  for (const auto& kv : tr.meta) meta[py::str(kv.first)] = kv.second;
  py::list rows;
  for (const TraceRow& r : tr.rows)
    rows.append(py::make_tuple(r.t, r.cumulative_regret, r.instantaneous_regret, r.phase,
                               r.diagnostics));
  py::dict out;
  out["meta"] = meta;
  out["rows"] = rows;
  out["flagged"] = tr.flagged;
  out["csv"] = [&] {
    std::ostringstream os;
    write_trace_csv(os, tr);
    return os.str();
  }();
  return out;
}

}  // namespace

PYBIND11_MODULE(_polybandit, m) {
  m.doc() = "Polynomial bandit experiment harness";
  m.attr("__version__") = kVersion;

  static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  static py::exception<AlgorithmError> algorithm_error(m, "AlgorithmError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const AlgorithmError& e) {
      py::set_error(algorithm_error, e.what());
    }
  });

  m.def(
      "validate_config",
      [](const std::string& text) { return config_to_json(parse_config(text)); },
      py::arg("config_json"), "Parse and validate a JSON config; returns the normalized echo.");

  m.def(
      "run",
      [](const std::string& text, std::uint64_t seed) {
        const ExperimentConfig cfg = parse_config(text);
        RegretTrace tr;
        {
          py::gil_scoped_release release;
          tr = run_experiment(cfg, seed);
        }
        return trace_to_dict(tr);
      },
      py::arg("config_json"), py::arg("seed") = 1,
      "Run one seeded experiment; returns meta, rows and the CSV text.");

  m.def(
      "sweep",
      [](const std::string& text, const std::string& axis, const std::vector<double>& values) {
        const ExperimentConfig cfg = parse_config(text);
        SweepResult r;
        {
          py::gil_scoped_release release;
          r = sweep(cfg, axis, values);
        }
        py::list medians;
        for (const SweepPoint& p : r.points) medians.append(py::make_tuple(p.value, p.median));
        py::dict out;
        out["metric"] = r.metric;
        out["points"] = medians;
        out["slope"] = r.fit.slope;
        out["stderr"] = r.fit.stderr_slope;
        return out;
      },
      py::arg("config_json"), py::arg("axis"), py::arg("values"));

  m.def(
      "report",
      [](const std::vector<std::string>& traces_csv, const std::vector<std::string>& labels) {
        std::vector<RegretTrace> traces;
        for (const std::string& t : traces_csv) {
          std::istringstream is(t);
          traces.push_back(read_trace_csv(is));
        }
        std::ostringstream os;
        report(os, traces, labels);
        return os.str();
      },
      py::arg("traces_csv"), py::arg("labels"));

  m.def(
      "hardcase",
      [](int d, int p, const std::string& tiebreak, std::uint64_t seed) {
        const RewardModel model = make_random_model(ModelKind::HARDCASE, d, 1, p, {}, seed);
        const HardCaseRun r = ucb_hard_case_run(d, p, model.alpha_star, parse_tie_break(tiebreak),
                                                Stream::derive(seed, StreamTag::Noiseless, 10));
        py::dict out;
        out["alpha_star"] = model.alpha_star;
        out["plays"] = r.plays;
        out["all_vertices"] = r.all_vertices;
        out["certificate_ok"] = r.certificate_ok;
        return out;
      },
      py::arg("d"), py::arg("p"), py::arg("tiebreak") = "adversarial", py::arg("seed") = 1);

  m.def(
      "tensorize", [](const Vec& a, int p) { return tensorize(a, p); }, py::arg("a"),
      py::arg("p"));

  m.def(
      "fit_loglog_slope",
      [](const std::vector<double>& x, const std::vector<double>& y) {
        const SlopeFit f = fit_loglog_slope(x, y);
        return py::make_tuple(f.slope, f.intercept, f.stderr_slope);
      },
      py::arg("x"), py::arg("y"));
}
