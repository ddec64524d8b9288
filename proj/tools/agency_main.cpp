// agency: command-line front end for the N-plus-1 agency.
//
//   agency solve     run one problem statement
//   agency batch     run a canon manifest and report p-hat / varpi
//   agency simulate  Monte Carlo checks (posterior, condorcet)
//   agency grade     oracle-grade a simulated transcript
//   agency render    print a transcript as markdown
//
// Exit codes: 0 success, 1 usage error, 2 backend failure, 3 validation
// failure, 4 inconclusive (or failed) simulation.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "agency/canon.hpp"
#include "agency/config.hpp"
#include "agency/error.hpp"
#include "agency/remote_backend.hpp"
#include "agency/runtime.hpp"
#include "agency/serialization.hpp"
#include "agency/sim.hpp"

namespace {

using namespace agency;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitBackend = 2;
constexpr int kExitValidation = 3;
constexpr int kExitInconclusive = 4;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage: return kExitUsage;
    case ErrorKind::Backend: return kExitBackend;
    case ErrorKind::Validation: return kExitValidation;
    case ErrorKind::Inconclusive: return kExitInconclusive;
  }
  return kExitUsage;
}

// Backend options shared by solve and batch.
struct BackendFlags {
  std::optional<std::string> config_path;
  std::optional<std::string> backend;
  std::optional<std::string> model;
  std::optional<std::string> effort;
  std::optional<int> max_parallel;
  bool debug_wire = false;
  std::string compare_mode = "default";

  void add_to(CLI::App& app, bool with_debug_wire) {
    app.add_option("--config", config_path, "agency.toml-style key/value file (keys mirror the backend config)");
    app.add_option("--backend", backend, "remote or sim")->check(CLI::IsMember({"remote", "sim"}));
    app.add_option("--model", model, "Model id (default o4-mini)");
    app.add_option("--effort", effort, "Reasoning effort")->check(CLI::IsMember({"low", "medium", "high"}));
    app.add_option("--max-parallel", max_parallel, "Solve calls in flight at once")->check(CLI::PositiveNumber);
    app.add_option("--compare-mode", compare_mode, "Simulated compare: default or recognition")
        ->check(CLI::IsMember({"default", "recognition"}));
    if (with_debug_wire) app.add_flag("--debug-wire", debug_wire, "Log request/response bodies under <out>/wire/");
  }

  runtime::BackendConfig resolve(bool has_profile) const {
    runtime::BackendConfig cfg;
    cfg.kind = runtime::BackendKind::Remote;
    if (config_path) cfg = config::load_backend_config(*config_path, cfg);
    if (backend)
      cfg.kind = runtime::parse_backend_kind(*backend);
    else if (has_profile && !config_path)
      cfg.kind = runtime::BackendKind::Simulated;
    if (model) cfg.model_id = *model;
    if (effort) cfg.reasoning_effort = runtime::parse_reasoning_effort(*effort);
    if (max_parallel) cfg.max_parallel = *max_parallel;
    cfg.validate();
    return cfg;
  }

  sim::CompareMode sim_mode() const {
    return compare_mode == "recognition" ? sim::CompareMode::Recognition : sim::CompareMode::Default;
  }
};

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

int cmd_solve(const std::string& problem_path, std::size_t n, const std::optional<std::string>& profile_path,
              const std::string& out, bool allow_partial, bool force_compare, bool tally_in_compare,
              const BackendFlags& flags) {
  const auto stmt = io::load_statement(problem_path);
  const auto cfg = flags.resolve(profile_path.has_value());

  std::unique_ptr<runtime::ModelBackend> backend;
  if (cfg.kind == runtime::BackendKind::Simulated) {
    if (!profile_path) throw Error(ErrorKind::Usage, "--backend sim requires --profile");
    backend = std::make_unique<sim::SimulatedBackend>(cfg, sim::load_profile(*profile_path), flags.sim_mode());
  } else {
    std::optional<fs::path> wire;
    if (flags.debug_wire) wire = fs::path(out) / "wire";
    backend = std::make_unique<runtime::RemoteBackend>(cfg, runtime::RemoteBackend::api_key_from_env(), wire);
  }

  runtime::AgencyOptions options;
  options.allow_partial = allow_partial;
  options.force_compare = force_compare;
  options.append_tally_to_compare = tally_in_compare;
  options.out_dir = fs::path(out);
  const auto run = runtime::run_agency(stmt, n, *backend, {}, options);
  print_warnings(run.warnings);

  const auto& t = run.transcript;
  std::cout << "transcript: " << (fs::path(out) / (t.problem_id + ".transcript.json")).string() << "\n";
  std::cout << "rendered:   " << (fs::path(out) / (t.problem_id + ".transcript.md")).string() << "\n";
  std::cout << "realizations: " << t.n << (run.failures.empty() ? "" : " (partial)") << "\n";
  if (const auto labels = runtime::class_labels(t)) {
    const auto tally = consensus::make_tally(*labels);
    std::cout << "tally:";
    for (const auto& [label, count] : tally.counts) std::cout << " " << label << "=" << count;
    std::cout << "\nprevalent: " << tally.prevalent << (tally.predominant ? " (predominant)" : " (not predominant)")
              << "\np_hat: " << consensus::bootstrap_estimate(tally) << "\n";
    if (!tally.predominant)
      std::cerr << "note: no predominant class; p_hat is unreliable unless the per-solve success rate exceeds 1/2\n";
  } else {
    std::cout << "tally: unavailable (realizations are unlabelled)\n";
  }
  return kExitOk;
}

int cmd_batch(const std::string& canon_path, std::size_t n, const std::string& out, std::size_t canon_parallel,
              const BackendFlags& flags) {
  const auto manifest = canon::load_manifest(canon_path);
  auto cfg = flags.resolve(false);
  if (!flags.backend && !flags.config_path) {
    // Default to simulation when every entry carries a profile.
    bool all_profiled = true;
    for (const auto& e : manifest.entries) all_profiled = all_profiled && e.profile.has_value();
    if (all_profiled) cfg.kind = runtime::BackendKind::Simulated;
  }

  std::shared_ptr<runtime::ModelBackend> remote;
  if (cfg.kind == runtime::BackendKind::Remote) {
    std::optional<fs::path> wire;
    if (flags.debug_wire) wire = fs::path(out) / "wire";
    remote = std::make_shared<runtime::RemoteBackend>(cfg, runtime::RemoteBackend::api_key_from_env(), wire);
  }
  const auto mode = flags.sim_mode();
  canon::BackendFactory factory = [&](const model::ProblemStatement& stmt,
                                      const std::optional<sim::ProblemProfile>& profile)
      -> std::unique_ptr<runtime::ModelBackend> {
    if (cfg.kind == runtime::BackendKind::Simulated) {
      if (!profile) throw ValidationError("problem '" + stmt.id + "' has no profile for the simulated backend");
      return std::make_unique<sim::SimulatedBackend>(cfg, *profile, mode);
    }
    // Entries share one remote client; wrap it so run_agency gets a unique_ptr.
    struct Shared final : runtime::ModelBackend {
      explicit Shared(std::shared_ptr<runtime::ModelBackend> inner)
          : ModelBackend(inner->config()), inner_(std::move(inner)) {}
      runtime::ChatResponse complete(const runtime::ChatRequest& r) override { return inner_->complete(r); }
      std::shared_ptr<runtime::ModelBackend> inner_;
    };
    return std::make_unique<Shared>(remote);
  };

  canon::CanonOptions options;
  options.out_dir = fs::path(out);
  options.canon_parallel = canon_parallel;
  options.config_snapshot = cfg.snapshot();
  const auto report = canon::run_canon(manifest, n, factory, options);
  const auto report_path = fs::path(out) / (manifest.name + ".report.json");
  io::write_file(report_path, io::dump_canonical(canon::to_json(report)));

  int status = kExitOk;
  for (const auto& row : report.per_problem) {
    std::cout << row.problem_id << "  " << canon::to_string(row.status);
    if (row.p_hat) std::cout << "  p_hat=" << *row.p_hat << (row.predominant ? " (predominant)" : "");
    std::cout << "\n";
    if (row.status == canon::RowStatus::Failed) {
      std::cerr << "error: " << row.problem_id << ": " << row.error << "\n";
      const int code = exit_code(row.error_kind.value_or(ErrorKind::Backend));
      if (status == kExitOk || code == kExitValidation) status = code;
    }
  }
  if (report.varpi)
    std::cout << "varpi: " << *report.varpi << "\n";
  else
    std::cout << "varpi: unavailable\n";
  std::cout << "report: " << report_path.string() << "\n";
  return status;
}

int emit_report(const sim::SimReport& report) {
  std::cout << io::dump_canonical(nlohmann::json(report));
  std::cerr << report.summary_line() << "\n";
  return report.pass ? kExitOk : kExitInconclusive;
}

int cmd_grade(const std::string& transcript_path, const std::string& profile_path, const std::string& template_path) {
  const auto transcript = io::load_transcript(transcript_path);
  const auto profile = sim::load_profile(profile_path);
  const auto tmpl = io::load_grading_template(template_path);
  const auto grades = canon::grade_with_oracle(transcript, profile, tmpl);
  nlohmann::json out{{"problem_id", transcript.problem_id},
                     {"grades", grades},
                     {"correct_fraction", canon::correct_fraction(grades)}};
  std::cout << io::dump_canonical(out);
  return kExitOk;
}

int cmd_render(const std::string& transcript_path) {
  std::cout << model::render_transcript(io::load_transcript(transcript_path));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"N-plus-1 agency: N independent solves, one comparison"};
  app.require_subcommand(1);

  // solve
  auto* solve = app.add_subcommand("solve", "Run the agency on one problem statement");
  std::string problem_path;
  std::size_t solve_n = 3;
  std::optional<std::string> profile_path;
  std::string solve_out = ".";
  bool allow_partial = false, force_compare = false, tally_in_compare = false;
  BackendFlags solve_flags;
  solve->add_option("--problem", problem_path, "Problem statement JSON")->required();
  solve->add_option("--n", solve_n, "Number of Solve realizations")->check(CLI::PositiveNumber);
  solve->add_option("--profile", profile_path, "Simulation profile JSON (implies --backend sim)");
  solve->add_option("--out", solve_out, "Output directory");
  solve->add_flag("--allow-partial", allow_partial, "Keep going when some realizations fail");
  solve->add_flag("--force-compare", force_compare, "Run Compare even for n = 1");
  solve->add_flag("--tally-in-compare", tally_in_compare, "Append the class tally to the Compare prompt");
  solve_flags.add_to(*solve, true);

  // batch
  auto* batch = app.add_subcommand("batch", "Run every problem in a canon manifest");
  std::string canon_path;
  std::size_t batch_n = 0;
  std::string batch_out = ".";
  std::size_t canon_parallel = 1;
  BackendFlags batch_flags;
  batch->add_option("--canon", canon_path, "Canon manifest JSON")->required();
  batch->add_option("--n", batch_n, "Number of Solve realizations per problem")->required()->check(CLI::PositiveNumber);
  batch->add_option("--out", batch_out, "Output directory");
  batch->add_option("--canon-parallel", canon_parallel, "Problems run concurrently")->check(CLI::PositiveNumber);
  batch_flags.add_to(*batch, true);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo checks of the consensus formulas");
  simulate->require_subcommand(1);
  double sim_p = 0.0;
  int sim_n = 0, sim_m1 = 0;
  std::uint64_t sim_trials = 0, sim_seed = 0;
  unsigned sim_threads = 1;
  auto* posterior = simulate->add_subcommand("posterior", "Empirical Pr(class 1 correct | M1 = m1)");
  posterior->add_option("--p", sim_p, "Per-solve success probability")->required();
  posterior->add_option("--n", sim_n, "Solves per trial")->required();
  posterior->add_option("--m1", sim_m1, "Class-1 count to condition on")->required();
  posterior->add_option("--trials", sim_trials, "Trials")->required();
  posterior->add_option("--seed", sim_seed, "RNG seed");
  posterior->add_option("--threads", sim_threads, "Worker threads (result is independent of this)");
  auto* condorcet = simulate->add_subcommand("condorcet", "Empirical Pr(correct class predominant)");
  condorcet->add_option("--p", sim_p, "Per-solve success probability")->required();
  condorcet->add_option("--n", sim_n, "Solves per trial")->required();
  condorcet->add_option("--trials", sim_trials, "Trials")->required();
  condorcet->add_option("--seed", sim_seed, "RNG seed");
  condorcet->add_option("--threads", sim_threads, "Worker threads (result is independent of this)");

  // grade
  auto* grade = app.add_subcommand("grade", "Oracle-grade a transcript against a profile");
  std::string grade_transcript, grade_profile, grade_template;
  grade->add_option("--transcript", grade_transcript, "Transcript JSON")->required();
  grade->add_option("--profile", grade_profile, "Profile JSON")->required();
  grade->add_option("--template", grade_template, "Grading template JSON")->required();

  // render
  auto* render = app.add_subcommand("render", "Print a transcript as markdown");
  std::string render_transcript;
  render->add_option("--transcript", render_transcript, "Transcript JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*solve)
      return cmd_solve(problem_path, solve_n, profile_path, solve_out, allow_partial, force_compare,
                       tally_in_compare, solve_flags);
    if (*batch) return cmd_batch(canon_path, batch_n, batch_out, canon_parallel, batch_flags);
    if (*posterior)
      return emit_report(sim::monte_carlo_posterior(sim_p, sim_n, sim_m1, sim_trials, sim_seed, {sim_threads, {}}));
    if (*condorcet) {
      const auto profile = sim::two_class_profile("condorcet", sim_p, sim_seed);
      return emit_report(sim::verify_condorcet(profile, sim_n, sim_trials, sim_seed, {sim_threads, {}}));
    }
    if (*grade) return cmd_grade(grade_transcript, grade_profile, grade_template);
    if (*render) return cmd_render(render_transcript);
  } catch (const agency::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBackend;
  }
  return kExitUsage;
}
