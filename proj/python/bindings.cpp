#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cmath>

#include "aoigpr/allocator.hpp"
#include "aoigpr/config.hpp"
#include "aoigpr/engine.hpp"
#include "aoigpr/errors.hpp"
#include "aoigpr/gpr.hpp"
#include "aoigpr/kernel.hpp"

namespace py = pybind11;
using namespace aoigpr;

namespace {

template <class T, class F>
py::array_t<T> column(const std::vector<SlotRecord>& trace, F get) {
  py::array_t<T> a(static_cast<py::ssize_t>(trace.size()));
  auto m = a.template mutable_unchecked<1>();
  for (std::size_t i = 0; i < trace.size(); ++i) m(static_cast<py::ssize_t>(i)) = get(trace[i]);
  return a;
}

py::dict trace_dict(const std::vector<SlotRecord>& t) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  py::dict d;
  d["slot"] = column<std::int64_t>(t, [](const SlotRecord& r) { return r.slot; });
  d["pair"] = column<int>(t, [](const SlotRecord& r) { return r.pair; });
  d["delta_ms"] = column<double>(t, [](const SlotRecord& r) { return r.delta_ms; });
  d["mu_ms"] = column<double>(t, [&](const SlotRecord& r) { return r.mu_ms.value_or(nan); });
  d["sigma2_ms2"] = column<double>(t, [&](const SlotRecord& r) { return r.sigma2_ms2.value_or(nan); });
  d["rate_pkts"] = column<double>(t, [](const SlotRecord& r) { return r.rate_pkts; });
  d["total_power_w"] = column<double>(t, [](const SlotRecord& r) { return r.total_power_w; });
  d["delivered"] = column<bool>(t, [](const SlotRecord& r) { return r.delivered; });
  d["flags"] = column<unsigned>(t, [](const SlotRecord& r) { return r.flags; });
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "AoI-aware V2V power allocation with online Gaussian process agents";

  py::register_exception<ConfigParseError>(m, "ConfigParseError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<SingularKernelError>(m, "SingularKernelError", PyExc_ArithmeticError);

  py::class_<ScenarioConfig>(m, "ScenarioConfig")
      .def(py::init<>())
      .def_readwrite("K", &ScenarioConfig::K)
      .def_readwrite("N", &ScenarioConfig::N)
      .def_readwrite("W", &ScenarioConfig::W)
      .def_readwrite("tau", &ScenarioConfig::tau)
      .def_readwrite("p", &ScenarioConfig::p)
      .def_readwrite("L", &ScenarioConfig::L)
      .def_readwrite("P_max", &ScenarioConfig::P_max)
      .def_readwrite("Z", &ScenarioConfig::Z)
      .def_readwrite("arrival_rate", &ScenarioConfig::arrival_rate)
      .def_readwrite("d", &ScenarioConfig::d)
      .def_readwrite("M", &ScenarioConfig::M)
      .def_readwrite("alpha_c", &ScenarioConfig::alpha_c)
      .def_readwrite("alpha_i", &ScenarioConfig::alpha_i)
      .def_readwrite("T", &ScenarioConfig::T)
      .def_readwrite("seed", &ScenarioConfig::seed)
      .def_readwrite("warmup", &ScenarioConfig::warmup)
      .def_property(
          "candidate_cap", [](const ScenarioConfig& c) { return c.learning.candidate_cap; },
          [](ScenarioConfig& c, int v) { c.learning.candidate_cap = v; })
      .def_property(
          "refit_period", [](const ScenarioConfig& c) { return c.learning.refit_period; },
          [](ScenarioConfig& c, int v) { c.learning.refit_period = v; })
      .def("to_text", &to_text)
      .def("validate", &validate)
      .def("__repr__", [](const ScenarioConfig& c) {
        return "<ScenarioConfig K=" + std::to_string(c.K) + " N=" + std::to_string(c.N) +
               " M=" + std::to_string(c.M) + " T=" + std::to_string(c.T) + ">";
      });
  m.def("load_config", [](const std::filesystem::path& p) { return load_config(p); });
  m.def("parse_config", [](const std::string& text) { return parse_config(text); });
  m.def("derive_arrival", &derive_arrival, py::arg("arrival_rate"), py::arg("tau"), py::arg("Z"));
  m.def("dbm_to_watt", &dbm_to_watt);
  m.def("watt_to_dbm", &watt_to_dbm);

  py::class_<KernelHyperparams>(m, "KernelHyperparams")
      .def(py::init([](double h, double lambda, double nu, double sigma_j) {
             return KernelHyperparams{h, lambda, nu, sigma_j};
           }),
           py::arg("h") = 10.0, py::arg("lambda_") = 1.0, py::arg("nu") = 0.5, py::arg("sigma_j") = 0.0)
      .def_readwrite("h", &KernelHyperparams::h)
      .def_readwrite("lambda_", &KernelHyperparams::lambda)
      .def_readwrite("nu", &KernelHyperparams::nu)
      .def_readwrite("sigma_j", &KernelHyperparams::sigma_j);
  m.def(
      "matern",
      [](double r, const KernelHyperparams& theta, bool standard) {
        return matern(r, theta, standard ? KernelScaling::kStandard : KernelScaling::kPaper);
      },
      py::arg("r"), py::arg("theta"), py::arg("standard_scaling") = false);

  py::class_<OnlineGpr>(m, "OnlineGpr")
      .def(py::init([](std::size_t capacity, const KernelHyperparams& theta) { return OnlineGpr(capacity, theta); }),
           py::arg("capacity"), py::arg("theta"))
      .def("push", [](OnlineGpr& g, std::vector<double> x, double y) { g.push(Sample{std::move(x), y}); })
      .def("predict",
           [](const OnlineGpr& g, const std::vector<double>& x) {
             const auto post = g.predict(x);
             return py::make_tuple(post.mu, post.sigma2);
           })
      .def("log_marginal_likelihood", &OnlineGpr::log_marginal_likelihood)
      .def_property_readonly("size", [](const OnlineGpr& g) { return g.dataset().size(); });

  m.def("count_feasible_actions", &count_feasible_actions, py::arg("N"), py::arg("L"), py::arg("p"),
        py::arg("P_max"));
  m.def("violation_probability", &violation_probability, py::arg("mu"), py::arg("sigma2"), py::arg("d"));
  m.def(
      "acquisition",
      [](double mu, double sigma2, double alpha_c, double alpha_i, double d_ms) {
        return acquisition(mu, sigma2, Objective{alpha_c, alpha_i, d_ms});
      },
      py::arg("mu"), py::arg("sigma2"), py::arg("alpha_c"), py::arg("alpha_i"), py::arg("d_ms"));

  m.def(
      "run_simulation",
      [](const ScenarioConfig& cfg, const std::string& policy, int threads) {
        SimOptions opts;
        opts.threads = threads;
        opts.record_interference = false;
        SimulationResult r;
        {
          py::gil_scoped_release release;
          r = run_simulation(cfg, parse_policy(policy), opts);
        }
        py::dict report;
        report["samples"] = r.report.samples;
        report["violation_prob"] = r.report.violation_prob;
        report["avg_aoi_ms"] = r.report.avg_aoi_ms;
        report["mean_rmse_ms"] = r.report.mean_rmse_ms;
        report["rmse_ms"] = r.report.rmse_ms;
        report["fallback_slots"] = r.report.fallback_slots;
        report["refits"] = r.report.refits;
        std::vector<std::pair<double, double>> curve;
        for (const auto& p : r.report.ccdf) curve.emplace_back(p.threshold_ms, p.ccdf);
        report["ccdf"] = curve;
        return py::make_tuple(report, trace_dict(r.trace));
      },
      py::arg("config"), py::arg("policy") = "proposed", py::arg("threads") = 1,
      "Runs one simulation and returns (report, trace) with the trace as numpy columns.");
}
