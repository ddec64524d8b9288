// Python bindings. Structured values cross the boundary as plain dicts in the
// same JSON shapes the CLI reads and writes.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "agency/canon.hpp"
#include "agency/consensus.hpp"
#include "agency/error.hpp"
#include "agency/runtime.hpp"
#include "agency/serialization.hpp"
#include "agency/sim.hpp"

namespace py = pybind11;
using namespace agency;

namespace {

std::string dumps(const py::object& obj) {
  if (py::isinstance<py::str>(obj)) return obj.cast<std::string>();
  return py::module_::import("json").attr("dumps")(obj).cast<std::string>();
}

py::object loads(const std::string& text) { return py::module_::import("json").attr("loads")(text); }

template <typename T>
T from_py(const py::object& obj, const char* what) {
  return io::parse<T>(dumps(obj), what);
}

template <typename T>
py::object to_py(const T& value) {
  return loads(io::serialize(value));
}

py::dict tally_dict(const consensus::Tally& t) {
  py::dict d;
  d["total_n"] = t.total_n;
  d["counts"] = t.counts;
  d["prevalent"] = t.prevalent;
  d["predominant"] = t.predominant;
  return d;
}

consensus::Tally tally_from(const py::dict& d) {
  consensus::Tally t;
  t.total_n = d["total_n"].cast<int>();
  t.counts = d["counts"].cast<std::map<std::string, int>>();
  t.prevalent = d["prevalent"].cast<std::string>();
  t.predominant = d["predominant"].cast<bool>();
  return t;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "N-plus-1 agency core: consensus math, simulation harness and simulated pipeline runs";

  // Errors map by category, so stage-wrapped failures keep their Python type.
  static py::exception<Error> base(m, "AgencyError", PyExc_RuntimeError);
  static py::exception<ValidationError> validation(m, "ValidationError", base.ptr());
  static py::exception<BackendError> backend(m, "BackendError", base.ptr());
  static py::exception<InconclusiveError> inconclusive(m, "InconclusiveError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      switch (e.kind()) {
        case ErrorKind::Validation: py::set_error(validation, e.what()); return;
        case ErrorKind::Backend: py::set_error(backend, e.what()); return;
        case ErrorKind::Inconclusive: py::set_error(inconclusive, e.what()); return;
        default: py::set_error(base, e.what()); return;
      }
    }
  });

  m.def(
      "posterior_predominant",
      [](double p, int n, int m1) { return consensus::posterior_predominant(consensus::TwoClassModel(p), n, m1); },
      py::arg("p"), py::arg("n"), py::arg("m1"),
      "Probability that the class holding m1 of n realizations is the correct one.");
  m.def(
      "make_tally", [](const std::vector<std::string>& labels) { return tally_dict(consensus::make_tally(labels)); },
      py::arg("labels"));
  m.def(
      "bootstrap_estimate", [](const py::dict& tally) { return consensus::bootstrap_estimate(tally_from(tally)); },
      py::arg("tally"));
  m.def(
      "classify_regime",
      [](const std::vector<double>& correct_probs, double p_star) {
        return std::string(consensus::to_string(consensus::classify_regime(consensus::ProfileSummary(correct_probs, p_star))));
      },
      py::arg("correct_probs"), py::arg("p_star"));
  m.def(
      "ensemble_metric", [](const std::vector<double>& estimates) { return consensus::ensemble_metric(estimates); },
      py::arg("estimates"));

  m.def("majority_probability", &sim::majority_probability, py::arg("p"), py::arg("n"));
  m.def(
      "monte_carlo_posterior",
      [](double p, int n, int m1, std::uint64_t trials, std::uint64_t seed, unsigned threads) {
        py::gil_scoped_release release;
        auto r = sim::monte_carlo_posterior(p, n, m1, trials, seed, {threads, std::nullopt});
        py::gil_scoped_acquire acquire;
        return loads(io::dump_canonical(nlohmann::json(r)));
      },
      py::arg("p"), py::arg("n"), py::arg("m1"), py::arg("trials"), py::arg("seed") = 0, py::arg("threads") = 1);
  m.def(
      "verify_condorcet",
      [](double p, int n, std::uint64_t trials, std::uint64_t seed, unsigned threads) {
        const auto profile = sim::two_class_profile("condorcet", p, seed);
        py::gil_scoped_release release;
        auto r = sim::verify_condorcet(profile, n, trials, seed, {threads, std::nullopt});
        py::gil_scoped_acquire acquire;
        return loads(io::dump_canonical(nlohmann::json(r)));
      },
      py::arg("p"), py::arg("n"), py::arg("trials"), py::arg("seed") = 0, py::arg("threads") = 1);
  m.def(
      "two_class_profile",
      [](const std::string& problem_id, double p, std::uint64_t seed) {
        return loads(io::dump_canonical(nlohmann::json(sim::two_class_profile(problem_id, p, seed))));
      },
      py::arg("problem_id"), py::arg("p"), py::arg("seed") = 0);
  m.def(
      "sample_realization",
      [](const py::object& profile, std::size_t index) {
        return to_py(sim::sample_realization(from_py<sim::ProblemProfile>(profile, "profile"), index));
      },
      py::arg("profile"), py::arg("index"));

  m.def(
      "validate_statement",
      [](const py::object& stmt) {
        py::list out;
        for (const auto& issue : model::validate_statement(from_py<model::ProblemStatement>(stmt, "statement")))
          out.append(py::make_tuple(issue.field, issue.message));
        return out;
      },
      py::arg("statement"), "List of (field, message) issues; empty when well formed.");
  m.def(
      "run_simulated",
      [](const py::object& stmt, const py::object& profile, std::size_t n, int max_parallel, bool recognition,
         std::optional<std::string> created_at) {
        const auto s = from_py<model::ProblemStatement>(stmt, "statement");
        auto prof = from_py<sim::ProblemProfile>(profile, "profile");
        runtime::BackendConfig config;
        config.kind = runtime::BackendKind::Simulated;
        config.max_parallel = max_parallel;
        runtime::AgencyOptions options;
        options.created_at = std::move(created_at);
        runtime::AgencyRun run;
        {
          py::gil_scoped_release release;
          sim::SimulatedBackend backend(config, std::move(prof),
                                        recognition ? sim::CompareMode::Recognition : sim::CompareMode::Default);
          run = runtime::run_agency(s, n, backend, {}, options);
        }
        return to_py(run.transcript);
      },
      py::arg("statement"), py::arg("profile"), py::arg("n"), py::arg("max_parallel") = 4,
      py::arg("recognition") = false, py::arg("created_at") = std::nullopt,
      "Run the agency with the simulated backend and return the transcript.");
  m.def(
      "render_transcript",
      [](const py::object& transcript) {
        return model::render_transcript(from_py<model::Transcript>(transcript, "transcript"));
      },
      py::arg("transcript"));
  m.def(
      "grade_with_oracle",
      [](const py::object& transcript, const py::object& profile, const py::object& tmpl) {
        const auto grades = canon::grade_with_oracle(from_py<model::Transcript>(transcript, "transcript"),
                                                     from_py<sim::ProblemProfile>(profile, "profile"),
                                                     from_py<model::GradingTemplate>(tmpl, "template"));
        return to_py(grades);
      },
      py::arg("transcript"), py::arg("profile"), py::arg("template"));
}
