#include <gtest/gtest.h>

#include <cmath>

#include "agency/canon.hpp"
#include "agency/config.hpp"
#include "agency/error.hpp"
#include "agency/serialization.hpp"
#include "support.hpp"

namespace agency::canon {
namespace {

using nlohmann::json;
using testing::make_profile;
using testing::make_statement;
using testing::sim_config;
using testing::TempDir;

// Writes a statement and a profile for `id` under `dir`, returns the manifest entry.
json write_entry(const std::filesystem::path& dir, const std::string& id, const sim::ProblemProfile& profile) {
  io::write_file(dir / (id + ".json"), io::serialize(make_statement(id)));
  io::write_file(dir / (id + ".profile.json"), io::serialize(profile));
  return json{{"problem", id + ".json"}, {"profile", id + ".profile.json"}};
}

BackendFactory sim_factory() {
  return [](const model::ProblemStatement&, const std::optional<sim::ProblemProfile>& profile)
             -> std::unique_ptr<runtime::ModelBackend> {
    if (!profile) throw ValidationError("no profile");
    return std::make_unique<sim::SimulatedBackend>(sim_config(4), *profile);
  };
}

CanonOptions fixed_options() {
  CanonOptions o;
  o.agency.created_at = "2026-01-01T00:00:00Z";
  o.agency.sleep = testing::no_sleep;
  return o;
}

CanonManifest three_entry_canon(const std::filesystem::path& dir, std::uint64_t seed) {
  json entries = json::array();
  const std::vector<std::pair<std::string, double>> ps = {{"PA", 0.9}, {"PB", 0.7}, {"PC", 0.8}};
  std::uint64_t k = 0;
  for (const auto& [id, p] : ps) {
    auto profile = sim::two_class_profile(id, p, sim::derive_seed(seed, k++));
    entries.push_back(write_entry(dir, id, profile));
  }
  io::write_file(dir / "canon.json", json{{"name", "three"}, {"entries", entries}}.dump());
  return load_manifest(dir / "canon.json");
}

TEST(RunCanon, EnsembleMeanOverSeeds) {
  // One run has sd ~0.05 on varpi; the mean over 200 seeded runs must sit near 0.8.
  TempDir dir;
  double sum = 0.0;
  const int runs = 200;
  for (int s = 0; s < runs; ++s) {
    const auto manifest = three_entry_canon(dir.path, static_cast<std::uint64_t>(s));
    const auto report = run_canon(manifest, 25, sim_factory(), fixed_options());
    ASSERT_TRUE(report.varpi.has_value());
    sum += *report.varpi;
  }
  EXPECT_NEAR(sum / runs, 0.8, 0.05);
  EXPECT_NEAR(sum / runs, 0.8, 0.01);
}

TEST(RunCanon, SingleRunShape) {
  TempDir dir;
  const auto report = run_canon(three_entry_canon(dir.path, 1), 25, sim_factory(), fixed_options());
  ASSERT_EQ(report.per_problem.size(), 3u);
  double mean = 0.0;
  for (const auto& row : report.per_problem) {
    EXPECT_EQ(row.status, RowStatus::Ok);
    EXPECT_EQ(row.n, 25u);
    ASSERT_TRUE(row.p_hat.has_value());
    ASSERT_TRUE(row.tally.has_value());
    EXPECT_EQ(row.predominant, row.tally->predominant);
    mean += *row.p_hat / 3.0;
  }
  EXPECT_NEAR(*report.varpi, mean, 1e-12);
  EXPECT_EQ(report.per_problem[0].problem_id, "PA");
  EXPECT_EQ(report.config_snapshot.at("n"), "25");
}

TEST(RunCanon, DegenerateProfile) {
  TempDir dir;
  auto profile = make_profile("PONE", {{"b", 1.0}}, {"b"});
  io::write_file(dir.path / "c.json", json{{"name", "one"}, {"entries", {write_entry(dir.path, "PONE", profile)}}}.dump());
  const auto report = run_canon(load_manifest(dir.path / "c.json"), 5, sim_factory(), fixed_options());
  ASSERT_EQ(report.per_problem.size(), 1u);
  EXPECT_EQ(report.per_problem[0].p_hat, 1.0);
  EXPECT_EQ(report.varpi, 1.0);
  EXPECT_TRUE(report.per_problem[0].predominant);
}

TEST(RunCanon, MissingFileIsIsolated) {
  TempDir dir;
  auto good = write_entry(dir.path, "PGOOD", make_profile("PGOOD", {{"b", 1.0}}, {"b"}));
  json missing{{"problem", "nope.json"}, {"profile", "nope.profile.json"}};
  io::write_file(dir.path / "c.json", json{{"name", "mixed"}, {"entries", {missing, good}}}.dump());
  const auto report = run_canon(load_manifest(dir.path / "c.json"), 3, sim_factory(), fixed_options());
  ASSERT_EQ(report.per_problem.size(), 2u);
  EXPECT_EQ(report.per_problem[0].status, RowStatus::Failed);
  EXPECT_EQ(report.per_problem[0].error_kind, ErrorKind::Validation);
  EXPECT_FALSE(report.per_problem[0].error.empty());
  EXPECT_EQ(report.per_problem[1].status, RowStatus::Ok);
  EXPECT_EQ(report.varpi, 1.0);
  const auto j = to_json(report, false);
  EXPECT_EQ(j["per_problem"][0]["status"], "failed");
  EXPECT_TRUE(j["per_problem"][0]["p_hat"].is_null());
}

TEST(RunCanon, DuplicateIdsAndProfileMismatch) {
  TempDir dir;
  auto a = write_entry(dir.path, "PDUP", make_profile("PDUP", {{"b", 1.0}}, {"b"}));
  io::write_file(dir.path / "wrong.profile.json", io::serialize(make_profile("OTHER", {{"b", 1.0}}, {"b"})));
  json mismatched{{"problem", "PDUP.json"}, {"profile", "wrong.profile.json"}};
  io::write_file(dir.path / "c.json", json{{"name", "dup"}, {"entries", {a, a}}}.dump());
  auto report = run_canon(load_manifest(dir.path / "c.json"), 2, sim_factory(), fixed_options());
  EXPECT_EQ(report.per_problem[0].status, RowStatus::Ok);
  EXPECT_EQ(report.per_problem[1].status, RowStatus::Failed);

  io::write_file(dir.path / "c2.json", json{{"name", "mismatch"}, {"entries", {mismatched}}}.dump());
  report = run_canon(load_manifest(dir.path / "c2.json"), 2, sim_factory(), fixed_options());
  EXPECT_EQ(report.per_problem[0].status, RowStatus::Failed);
  EXPECT_FALSE(report.varpi.has_value());
}

TEST(RunCanon, TallyUnavailableWithoutLabels) {
  TempDir dir;
  io::write_file(dir.path / "P.json", io::serialize(make_statement("P")));
  io::write_file(dir.path / "c.json", R"({"name":"r","entries":[{"problem":"P.json"}]})");
  BackendFactory unlabeled = [](const model::ProblemStatement&, const std::optional<sim::ProblemProfile>&) {
    return std::make_unique<testing::ScriptedBackend>(sim_config(), [](const runtime::ChatRequest& req, int) {
      if (req.role == runtime::AgentRole::Solve)
        return runtime::ChatResponse{testing::solve_text(req.index), std::nullopt, {}};
      return runtime::ChatResponse{"free text only", std::nullopt, {}};
    });
  };
  const auto report = run_canon(load_manifest(dir.path / "c.json"), 2, unlabeled, fixed_options());
  EXPECT_EQ(report.per_problem[0].status, RowStatus::TallyUnavailable);
  EXPECT_FALSE(report.per_problem[0].p_hat.has_value());
  EXPECT_FALSE(report.varpi.has_value());
  EXPECT_EQ(to_json(report)["per_problem"][0]["status"], "tally_unavailable");
}

TEST(RunCanon, DeterministicAndParallelInvariant) {
  TempDir dir;
  const auto manifest = three_entry_canon(dir.path, 7);
  auto options = fixed_options();
  const auto a = io::dump_canonical(to_json(run_canon(manifest, 10, sim_factory(), options), false));
  const auto b = io::dump_canonical(to_json(run_canon(manifest, 10, sim_factory(), options), false));
  EXPECT_EQ(a, b);
  options.canon_parallel = 3;
  auto par = to_json(run_canon(manifest, 10, sim_factory(), options), false);
  auto seq = io::parse_json(a, "a");
  par["config_snapshot"].erase("canon_parallel");
  seq["config_snapshot"].erase("canon_parallel");
  EXPECT_EQ(par, seq);
}

TEST(RunCanon, PersistsTranscripts) {
  TempDir dir;
  auto options = fixed_options();
  options.out_dir = dir.path / "out";
  run_canon(three_entry_canon(dir.path, 3), 4, sim_factory(), options);
  for (const char* id : {"PA", "PB", "PC"})
    EXPECT_TRUE(std::filesystem::exists(dir.path / "out" / (std::string(id) + ".transcript.json"))) << id;
}

TEST(Manifest, Errors) {
  TempDir dir;
  io::write_file(dir.path / "empty.json", R"({"name":"x","entries":[]})");
  EXPECT_THROW(load_manifest(dir.path / "empty.json"), ValidationError);
  io::write_file(dir.path / "noproblem.json", R"({"name":"x","entries":[{"profile":"p"}]})");
  EXPECT_THROW(load_manifest(dir.path / "noproblem.json"), ValidationError);
  EXPECT_THROW(load_manifest(dir.path / "absent.json"), ValidationError);
  io::write_file(dir.path / "ok.json", R"({"entries":[{"problem":"a/b.json","grading_template":"/abs/t.json"}]})");
  const auto m = load_manifest(dir.path / "ok.json");
  EXPECT_EQ(m.name, "ok");
  EXPECT_EQ(m.entries[0].problem, dir.path / "a/b.json");
  EXPECT_EQ(m.entries[0].grading_template, std::filesystem::path("/abs/t.json"));
  EXPECT_THROW(run_canon(m, 0, sim_factory()), ValidationError);
}

model::GradingTemplate tmpl(const std::string& id) { return {id, {{"model", 50}, {"answer", 50}}, 70}; }

model::Transcript labelled_transcript(const std::string& id, const std::vector<std::string>& labels) {
  std::vector<model::Realization> rs;
  for (std::size_t i = 0; i < labels.size(); ++i) rs.push_back(testing::make_realization(i + 1, labels[i]));
  return model::compose_transcript(id, rs, std::nullopt, "T");
}

TEST(GradeWithOracle, CorrectAndIncorrect) {
  const auto profile = make_profile("P", {{"d", 0.8}, {"e", 0.2}}, {"d"});
  const auto grades = grade_with_oracle(labelled_transcript("P", {"d", "e"}), profile, tmpl("P"));
  ASSERT_EQ(grades.size(), 2u);
  EXPECT_EQ(grades[0].value, 100);
  EXPECT_EQ(grades[0].verdict, model::Verdict::Correct);
  EXPECT_EQ(grades[1].value, 0);
  EXPECT_EQ(grades[1].verdict, model::Verdict::Incorrect);
}

TEST(GradeWithOracle, RecoversBootstrapEstimate) {
  const auto profile = make_profile("P", {{"d", 0.8}, {"e", 0.2}}, {"d"});
  std::vector<std::string> labels(10, "d");
  labels[2] = labels[6] = "e";
  const auto t = labelled_transcript("P", labels);
  const auto grades = grade_with_oracle(t, profile, tmpl("P"));
  EXPECT_DOUBLE_EQ(correct_fraction(grades), 0.8);
  EXPECT_DOUBLE_EQ(consensus::bootstrap_estimate(consensus::make_tally(*runtime::class_labels(t))), 0.8);
}

TEST(GradeWithOracle, Errors) {
  const auto profile = make_profile("P", {{"d", 1.0}}, {"d"});
  EXPECT_THROW(grade_with_oracle(labelled_transcript("P", {"zz"}), profile, tmpl("P")), ValidationError);
  auto unlabeled = labelled_transcript("P", {"d"});
  unlabeled.realizations[0].class_label.reset();
  EXPECT_THROW(grade_with_oracle(unlabeled, profile, tmpl("P")), ValidationError);
  EXPECT_THROW(grade_with_oracle(labelled_transcript("P", {"d"}), profile, tmpl("Q")), ValidationError);
  EXPECT_THROW(grade_with_oracle(labelled_transcript("Q", {"d"}), profile, tmpl("")), ValidationError);
  EXPECT_THROW(correct_fraction({}), std::invalid_argument);
}

TEST(Config, ParseAndApply) {
  const auto kv = config::parse_key_values(
      "# agency settings\n[backend]\nkind = \"remote\"\nmodel_id = o3\nreasoning_effort = medium\n"
      "max_parallel = 8  # inline\nretry_max_attempts = 5\nretry_base_backoff_ms = 250\nrequest_timeout_s = 30\n"
      "endpoint = \"http://localhost:8080/v1/chat/completions\"\n");
  runtime::BackendConfig c;
  config::apply(kv, c);
  EXPECT_EQ(c.kind, runtime::BackendKind::Remote);
  EXPECT_EQ(c.model_id, "o3");
  EXPECT_EQ(c.reasoning_effort, runtime::ReasoningEffort::Medium);
  EXPECT_EQ(c.max_parallel, 8);
  EXPECT_EQ(c.retry.max_attempts, 5);
  EXPECT_EQ(c.retry.base_backoff, std::chrono::milliseconds(250));
  EXPECT_EQ(c.request_timeout, std::chrono::seconds(30));
  EXPECT_EQ(c.endpoint, "http://localhost:8080/v1/chat/completions");
}

TEST(Config, Errors) {
  runtime::BackendConfig c;
  EXPECT_THROW(config::parse_key_values("no equals sign\n"), ValidationError);
  EXPECT_THROW(config::apply({{"api_key", "x"}}, c), ValidationError);
  EXPECT_THROW(config::apply({{"max_parallel", "zero"}}, c), ValidationError);
  EXPECT_THROW(config::apply({{"max_parallel", "0"}}, c), ValidationError);
  EXPECT_THROW(config::apply({{"kind", "grpc"}}, c), ValidationError);
  TempDir dir;
  io::write_file(dir.path / "agency.toml", "model_id = gpt-x\n");
  EXPECT_EQ(config::load_backend_config(dir.path / "agency.toml").model_id, "gpt-x");
  EXPECT_THROW(config::load_backend_config(dir.path / "missing.toml"), ValidationError);
}

}  // namespace
}  // namespace agency::canon
