// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "agency/canon.hpp"
#include "agency/consensus.hpp"
#include "agency/error.hpp"
#include "agency/runtime.hpp"
#include "agency/serialization.hpp"
#include "agency/sim.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace {

using namespace agency;
using Clock = std::chrono::steady_clock;

// Tolerances and limits.
constexpr double kFixtureTol = 1e-4;
constexpr double kOracleTol = 1e-10;
constexpr double kFrequencyTol = 0.03;
constexpr double kCondorcetTol = 0.01;
constexpr double kCondorcetFloor = 0.94;
constexpr double kMs = 1e-3;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double posterior(double p, int n, int m1) {
  return consensus::posterior_predominant(consensus::TwoClassModel(p), n, m1);
}

Outcome c1_fixtures() {
  const auto t0 = Clock::now();
  const double a = posterior(0.8, 8, 6), b = posterior(0.8, 8, 2), c = posterior(0.8, 4, 3);
  const double elapsed = seconds_since(t0);
  std::ostringstream d;
  d << "0.9961->" << a << " 0.0039->" << b << " 0.9412->" << c << " in " << elapsed / kMs << " ms";
  const bool ok = std::abs(a - 0.9961) <= kFixtureTol && std::abs(b - 0.0039) <= kFixtureTol &&
                  std::abs(c - 0.9412) <= kFixtureTol && elapsed < 1 * kMs;
  return {ok, d.str()};
}

Outcome c2_oracle() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  int cases = 0;
  for (double p : {0.51, 0.6, 0.7, 0.8, 0.9, 0.99})
    for (int n = 1; n <= 12; ++n) {
      const auto oracle = testing::enumerate_posterior(p, n);
      for (int m1 = 0; m1 <= n; ++m1, ++cases) worst = std::max(worst, std::abs(posterior(p, n, m1) - oracle[m1]));
    }
  const double elapsed = seconds_since(t0);
  std::ostringstream d;
  d << cases << " cases, max |diff| " << worst << " in " << elapsed << " s";
  return {worst <= kOracleTol && elapsed < 1.0, d.str()};
}

Outcome c3_monte_carlo() {
  const auto t0 = Clock::now();
  const auto r = sim::monte_carlo_posterior(0.8, 8, 6, 1000000, 20260101, {1, std::nullopt});
  const double elapsed = seconds_since(t0);
  std::ostringstream d;
  d << r.summary_line() << "; " << elapsed << " s";
  return {r.pass && std::abs(r.reference_value - 0.9961) <= kFixtureTol && elapsed < 30.0, d.str()};
}

Outcome c4_condorcet() {
  const auto t0 = Clock::now();
  const auto profile = sim::two_class_profile("condorcet", 0.85, 0);
  const sim::MonteCarloOptions opts{1, kCondorcetTol};
  const auto one = sim::verify_condorcet(profile, 1, 100000, 1, opts);
  const auto nine = sim::verify_condorcet(profile, 9, 100000, 2, opts);
  const double elapsed = seconds_since(t0);
  const double ref1 = testing::enumerate_majority(0.85, 1), ref9 = testing::enumerate_majority(0.85, 9);
  std::ostringstream d;
  d << "n=1 " << one.empirical_value << " (exact " << ref1 << "), n=9 " << nine.empirical_value << " (exact " << ref9
    << "), " << elapsed << " s";
  const bool ok = one.pass && nine.pass && std::abs(one.reference_value - ref1) <= 1e-12 &&
                  std::abs(nine.reference_value - ref9) <= 1e-12 && nine.empirical_value >= kCondorcetFloor &&
                  nine.empirical_value > one.empirical_value && elapsed < 30.0;
  return {ok, d.str()};
}

Outcome c5_properties() {
  constexpr int kCases = 2000;
  std::mt19937_64 g(55);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::array<int, 5> failures{};

  for (int i = 0; i < kCases; ++i) {
    const double p = 0.001 + 0.998 * unit(g);
    const int n = std::uniform_int_distribution<int>(1, 300)(g);
    const int m1 = std::uniform_int_distribution<int>(0, n)(g);
    // complementarity
    if (std::abs(posterior(p, n, m1) + posterior(p, n, n - m1) - 1.0) > 1e-12) ++failures[0];
    // neutrality
    if (posterior(0.5, n, m1) != 0.5) ++failures[1];
    // monotonicity in m1 for p > 1/2 (non-strict once the value rounds to 1)
    const double q = 0.5 + 0.49 * unit(g);
    const int k = std::uniform_int_distribution<int>(1, 60)(g);
    for (int m = 0; m < k; ++m) {
      const double lo = posterior(q, k, m), hi = posterior(q, k, m + 1);
      if (!(lo < hi || (lo == 1.0 && hi == 1.0))) {
        ++failures[2];
        break;
      }
    }
  }

  const std::vector<std::string> alphabet = {"a", "b", "c", "d", "e"};
  for (int i = 0; i < kCases; ++i) {
    std::vector<std::string> labels(std::uniform_int_distribution<int>(1, 20)(g));
    for (auto& l : labels) l = alphabet[std::uniform_int_distribution<std::size_t>(0, alphabet.size() - 1)(g)];
    const auto t = consensus::make_tally(labels);
    auto shuffled = labels;
    std::shuffle(shuffled.begin(), shuffled.end(), g);
    int best = 0;
    for (const auto& [l, c] : t.counts) best = std::max(best, c);
    std::string expected;
    for (const auto& [l, c] : t.counts)
      if (c == best) {
        expected = l;
        break;
      }
    const bool predominant = 2 * t.counts.at(t.prevalent) > static_cast<int>(labels.size());
    if (!(consensus::make_tally(shuffled) == t) || t.prevalent != expected || t.predominant != predominant)
      ++failures[3];
  }

  std::array<int, 4> seen{};
  for (int i = 0; i < kCases; ++i) {
    const int k = std::uniform_int_distribution<int>(1, 5)(g);
    std::vector<double> w(k + 1);
    double sum = 0.0;
    for (auto& x : w) sum += (x = unit(g));
    std::vector<double> correct;
    for (int j = 0; j < k; ++j) correct.push_back(w[j] / sum);
    const double p_star = w[k] / sum;
    const consensus::ProfileSummary s(correct, p_star);
    const double pmax = *std::max_element(correct.begin(), correct.end());
    const double pmin = *std::min_element(correct.begin(), correct.end());
    const bool a = pmax > 0.5, b = !a && pmin > p_star, c = !a && !b && pmax <= p_star, m = !a && !b && !c;
    const auto r = consensus::classify_regime(s);
    const auto expected = a ? consensus::Regime::CaseA
                          : b ? consensus::Regime::CaseB
                          : c ? consensus::Regime::CaseC
                              : consensus::Regime::Mixed;
    if (a + b + c + m != 1 || r != expected) ++failures[4];
    ++seen[static_cast<int>(r)];
  }

  int total = 0;
  for (int f : failures) total += f;
  std::ostringstream d;
  d << kCases << " cases each; failures complementarity=" << failures[0] << " neutrality=" << failures[1]
    << " monotonicity=" << failures[2] << " tally=" << failures[3] << " regime=" << failures[4]
    << "; regimes seen A/B/C/Mixed=" << seen[0] << "/" << seen[1] << "/" << seen[2] << "/" << seen[3];
  return {total == 0, d.str()};
}

runtime::AgencyOptions quiet_options() {
  runtime::AgencyOptions o;
  o.created_at = "2026-01-01T00:00:00Z";
  o.sleep = testing::no_sleep;
  return o;
}

Outcome c6_end_to_end() {
  constexpr int kRuns = 10000;
  const auto stmt = testing::make_statement("plate");
  int predominant_b = 0, b_prevalent = 0, recommended_when_prevalent = 0;
  for (int i = 0; i < kRuns; ++i) {
    auto profile = testing::make_profile("plate", {{"b", 0.9}, {"e", 0.1}}, {"b"}, sim::derive_seed(2026, i));
    sim::SimulatedBackend backend(testing::sim_config(1), profile);
    const auto run = runtime::run_agency(stmt, 10, backend, {}, quiet_options());
    const auto tally = consensus::make_tally(*runtime::class_labels(run.transcript));
    if (tally.prevalent == "b") {
      ++b_prevalent;
      if (tally.predominant) ++predominant_b;
      if (run.transcript.recommendation->recommended_solution == profile.find("b")->canonical_answer_text)
        ++recommended_when_prevalent;
    }
  }
  const double freq = static_cast<double>(predominant_b) / kRuns;
  const double exact = testing::enumerate_majority(0.9, 10);
  std::ostringstream d;
  d << "predominant b in " << freq << " of " << kRuns << " runs vs exact " << exact << "; compare recommended b in "
    << recommended_when_prevalent << "/" << b_prevalent << " runs where b prevalent";
  return {std::abs(freq - exact) <= kFrequencyTol && recommended_when_prevalent == b_prevalent, d.str()};
}

Outcome c7_bootstrap_vs_grading() {
  const auto stmt = testing::make_statement("assembly");
  // First seed whose N = 10 run lands exactly 8 realizations in the correct class.
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    auto profile = testing::make_profile("assembly", {{"d", 0.8}, {"e", 0.2}}, {"d"}, seed);
    sim::SimulatedBackend backend(testing::sim_config(2), profile);
    const auto run = runtime::run_agency(stmt, 10, backend, {}, quiet_options());
    const auto tally = consensus::make_tally(*runtime::class_labels(run.transcript));
    if (tally.counts.count("d") == 0 || tally.counts.at("d") != 8) continue;
    const model::GradingTemplate tmpl{"assembly", {{"model", 50}, {"answer", 50}}, 70};
    const double from_tally = consensus::bootstrap_estimate(tally);
    const double from_grades = canon::correct_fraction(canon::grade_with_oracle(run.transcript, profile, tmpl));
    std::ostringstream d;
    d << "seed " << seed << ": tally p_hat " << from_tally << ", oracle grading " << from_grades;
    return {from_tally == 0.8 && from_grades == 0.8, d.str()};
  }
  return {false, "no seed produced an 8/10 run"};
}

Outcome c8_robustness() {
  std::vector<std::string> failed;
  auto expect = [&](const std::string& name, const std::function<bool()>& check) {
    try {
      if (!check()) failed.push_back(name);
    } catch (const std::exception& e) {
      failed.push_back(name + " (unexpected: " + e.what() + ")");
    }
  };
  const auto stmt = testing::make_statement("robust");
  using runtime::ChatRequest;
  using runtime::ChatResponse;

  expect("failing backend", [&] {
    testing::ScriptedBackend down(testing::sim_config(2),
                                  [](const ChatRequest&, int) -> ChatResponse { throw TransportError("HTTP 503"); });
    try {
      runtime::run_agency(stmt, 3, down, {}, quiet_options());
    } catch (const StageError& e) {
      return e.stage() == "solve" && e.kind() == ErrorKind::Backend;
    }
    return false;
  });

  expect("partial run keeps successes", [&] {
    testing::ScriptedBackend flaky(testing::sim_config(2), [](const ChatRequest& r, int) -> ChatResponse {
      if (r.role == runtime::AgentRole::Solve && r.index == 3) throw BackendError("injected");
      return {testing::solve_text(r.index), std::nullopt, {}};
    });
    auto o = quiet_options();
    o.allow_partial = true;
    const auto run = runtime::run_agency(stmt, 4, flaky, {}, o);
    return run.transcript.n == 3 && run.failures.size() == 1 && run.failures[0].requested_index == 3 &&
           run.transcript.agency_config_snapshot.at("failed_realizations") == "1";
  });

  expect("malformed compare output", [&] {
    const std::string garbage = "<<< not the expected layout >>>";
    testing::ScriptedBackend odd(testing::sim_config(), [&](const ChatRequest& r, int) -> ChatResponse {
      if (r.role == runtime::AgentRole::Compare) return {garbage, std::nullopt, {}};
      return {testing::solve_text(r.index), std::nullopt, {}};
    });
    const auto run = runtime::run_agency(stmt, 3, odd, {}, quiet_options());
    return run.transcript.n == 3 && run.transcript.recommendation->recommended_solution == garbage &&
           run.transcript.recommendation->discussion == garbage && !run.warnings.empty();
  });

  expect("oversized attachment", [&] {
    auto big = stmt;
    big.attachments = {{"huge.png", "image/png", std::string(9u * 1024u * 1024u, '\0')}};
    testing::ScriptedBackend unused(testing::sim_config(), [](const ChatRequest&, int) -> ChatResponse { return {}; });
    try {
      runtime::run_agency(big, 2, unused, {}, quiet_options());
    } catch (const StageError& e) {
      return e.stage() == "preprocess" && e.kind() == ErrorKind::Validation &&
             std::string(e.what()).find("huge.png") != std::string::npos && unused.requests().empty();
    }
    return false;
  });

  expect("index gap", [&] {
    try {
      model::compose_transcript("robust", {testing::make_realization(1), testing::make_realization(3)}, std::nullopt);
    } catch (const ValidationError&) {
      return true;
    }
    return false;
  });

  expect("duplicate index", [&] {
    try {
      model::compose_transcript("robust", {testing::make_realization(2), testing::make_realization(2)}, std::nullopt);
    } catch (const ValidationError&) {
      return true;
    }
    return false;
  });

  expect("empty solve response", [&] {
    testing::ScriptedBackend blank(testing::sim_config(), [](const ChatRequest&, int) -> ChatResponse { return {}; });
    try {
      runtime::run_agency(stmt, 2, blank, {}, quiet_options());
    } catch (const StageError& e) {
      return e.stage() == "solve";
    }
    return false;
  });

  std::ostringstream d;
  d << (7 - failed.size()) << "/7 fault scenarios behaved";
  for (const auto& f : failed) d << "; FAILED " << f;
  return {failed.empty(), d.str()};
}

Outcome c9_determinism() {
  // Transcripts: same seed twice, different parallelism.
  const auto stmt = testing::make_statement("det");
  const auto profile = testing::make_profile("det", {{"a", 0.5}, {"b", 0.3}, {"c", 0.2}}, {"a"}, 424242);
  std::vector<std::string> forms;
  for (int parallel : {1, 4, 1}) {
    sim::SimulatedBackend backend(testing::sim_config(parallel), profile);
    auto o = quiet_options();
    o.created_at.reset();
    auto t = runtime::run_agency(stmt, 12, backend, {}, o).transcript;
    t.agency_config_snapshot.erase("max_parallel");
    forms.push_back(io::comparison_form(t));
  }
  const bool transcripts_same = forms[0] == forms[1] && forms[1] == forms[2];

  // Canon reports: same manifest and seeds twice.
  testing::TempDir dir;
  nlohmann::json entries = nlohmann::json::array();
  for (int i = 0; i < 3; ++i) {
    const std::string id = "det" + std::to_string(i);
    io::write_file(dir.path / (id + ".json"), io::serialize(testing::make_statement(id)));
    io::write_file(dir.path / (id + ".profile.json"),
                   io::serialize(sim::two_class_profile(id, 0.6 + 0.1 * i, 1000 + i)));
    entries.push_back({{"problem", id + ".json"}, {"profile", id + ".profile.json"}});
  }
  io::write_file(dir.path / "canon.json", nlohmann::json{{"name", "det"}, {"entries", entries}}.dump());
  const auto manifest = canon::load_manifest(dir.path / "canon.json");
  canon::BackendFactory factory = [](const model::ProblemStatement&, const std::optional<sim::ProblemProfile>& p) {
    return std::make_unique<sim::SimulatedBackend>(testing::sim_config(3), *p);
  };
  std::vector<std::string> reports;
  for (int i = 0; i < 2; ++i) {
    canon::CanonOptions o;
    o.agency.sleep = testing::no_sleep;
    reports.push_back(io::dump_canonical(canon::to_json(canon::run_canon(manifest, 15, factory, o), false)));
  }
  const bool reports_same = reports[0] == reports[1];

  std::ostringstream d;
  d << "transcripts " << (transcripts_same ? "identical" : "DIFFER") << " across 3 runs (" << forms[0].size()
    << " bytes); canon reports " << (reports_same ? "identical" : "DIFFER") << " (" << reports[0].size() << " bytes)";
  return {transcripts_same && reports_same, d.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, Outcome (*)()>> criteria = {
      {"1 posterior fixtures", c1_fixtures},
      {"2 oracle equivalence", c2_oracle},
      {"3 monte carlo posterior", c3_monte_carlo},
      {"4 condorcet amplification", c4_condorcet},
      {"5 property suites", c5_properties},
      {"6 end-to-end simulated agency", c6_end_to_end},
      {"7 bootstrap vs oracle grading", c7_bootstrap_vs_grading},
      {"8 robustness", c8_robustness},
      {"9 determinism", c9_determinism},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("[%s] %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
