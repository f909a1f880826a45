#include "cli.hpp"
#include "unipoint/basis.hpp"
#include "unipoint/error.hpp"
#include "unipoint/experiment.hpp"
#include "unipoint/metrics.hpp"
#include "unipoint/processes.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace unipoint;

namespace {

EventSequence to_sequence(const py::handle& h) {
  if (py::isinstance<py::dict>(h)) {
    const auto d = h.cast<py::dict>();
    return {d["times"].cast<std::vector<double>>(), d["t_end"].cast<double>()};
  }
  const auto t = h.cast<py::tuple>();
  return {t[0].cast<std::vector<double>>(), t[1].cast<double>()};
}

std::vector<EventSequence> to_sequences(const py::iterable& seqs) {
  std::vector<EventSequence> out;
  for (const auto& s : seqs) out.push_back(to_sequence(s));
  return out;
}

py::dict to_dict(const EventSequence& s) {
  py::dict d;
  d["times"] = std::vector<double>(s.times().begin(), s.times().end());
  d["t_end"] = s.t_end();
  return d;
}

ParametricProcess make_process(const std::string& kind, const py::kwargs& params) {
  Json j = Json::object();
  for (const auto& [k, v] : params) j[k.cast<std::string>()] = v.cast<double>();
  return process_from_params(parse_process_kind(kind), j, "");
}

} // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Temporal point processes with sum-of-basis neural intensities";

  // translators are tried newest first, so the base class goes first
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);

  py::class_<ParametricProcess>(m, "Process")
      .def_property_readonly("name", &ParametricProcess::name)
      .def(
          "intensity",
          [](const ParametricProcess& p, const std::vector<double>& history, double t) {
            return intensity(p, history, t);
          },
          py::arg("history"), py::arg("t"))
      .def(
          "compensator",
          [](const ParametricProcess& p, const std::vector<double>& history, double t0, double t1) {
            return compensator(p, history, t0, t1);
          },
          py::arg("history"), py::arg("t0"), py::arg("t1"))
      .def("log_likelihood",
           [](const ParametricProcess& p, const py::handle& seq) { return log_likelihood(p, to_sequence(seq)); })
      .def("residuals",
           [](const ParametricProcess& p, const py::handle& seq) {
             return time_change_residuals(p, to_sequence(seq));
           })
      .def("to_json", [](const ParametricProcess& p) { return to_json(p).dump(); })
      .def("__repr__", [](const ParametricProcess& p) { return "Process(" + to_json(p).dump() + ")"; });

  m.def("process", &make_process, py::arg("kind"), "Build a process, e.g. process('exp-hawkes', mu=0.5, alpha=0.8, beta=1)");

  m.def(
      "simulate",
      [](const ParametricProcess& p, std::size_t sequences, std::optional<std::size_t> events,
         std::optional<double> t_end, std::uint64_t seed) {
        SimulateOptions opts;
        opts.n_events = events;
        opts.t_end = t_end;
        py::list out;
        for (const auto& s : simulate_many(p, opts, sequences, seed)) out.append(to_dict(s));
        return out;
      },
      py::arg("process"), py::arg("sequences") = 1, py::arg("events") = std::nullopt,
      py::arg("t_end") = std::nullopt, py::arg("seed") = 0);

  m.def(
      "fit_mle",
      [](const std::string& kind, const py::iterable& seqs, std::size_t max_steps) {
        MleOptions opts;
        opts.max_steps = max_steps;
        return fit_mle(parse_process_kind(kind), to_sequences(seqs), opts).process;
      },
      py::arg("kind"), py::arg("sequences"), py::arg("max_steps") = 5000);

  m.def(
      "basis_eval",
      [](const std::string& kind, const std::vector<double>& params, double x) {
        return basis_eval(parse_basis_kind(kind), params, x);
      },
      py::arg("kind"), py::arg("params"), py::arg("x"));
  m.def(
      "transfer_eval", [](const std::string& kind, double x) { return transfer_eval(parse_transfer_kind(kind), x); },
      py::arg("kind"), py::arg("x"));

  m.def("ks_test_exp1", [](const std::vector<double>& samples) {
    const auto r = ks_test_exp1(samples);
    return py::make_tuple(r.statistic, r.p_value);
  });
  m.def("paired_ttest", [](const std::vector<double>& a, const std::vector<double>& b) {
    const auto r = paired_ttest(a, b);
    py::dict d;
    d["t"] = r.t;
    d["p_value"] = r.p_value;
    d["df"] = r.df;
    d["degenerate"] = r.degenerate;
    return d;
  });

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run the command line in-process; returns (exit_code, stdout, stderr).");
}
