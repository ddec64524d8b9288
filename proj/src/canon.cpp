#include "agency/canon.hpp"

#include <atomic>
#include <set>
#include <thread>

#include "agency/error.hpp"
#include "agency/serialization.hpp"

namespace agency::canon {

using nlohmann::json;

CanonManifest load_manifest(const std::filesystem::path& path) {
  const auto j = io::parse_json(io::read_file(path), path.string());
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  CanonManifest m;
  try {
    m.name = j.value("name", path.stem().string());
    for (const auto& e : j.at("entries")) {
      CanonEntry entry;
      entry.problem = resolve(e.at("problem").get<std::string>());
      if (e.contains("profile") && !e["profile"].is_null()) entry.profile = resolve(e["profile"].get<std::string>());
      if (e.contains("grading_template") && !e["grading_template"].is_null())
        entry.grading_template = resolve(e["grading_template"].get<std::string>());
      m.entries.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  if (m.entries.empty()) throw ValidationError(path.string() + ": manifest has no entries");
  return m;
}

std::string_view to_string(RowStatus s) {
  switch (s) {
    case RowStatus::Ok: return "ok";
    case RowStatus::TallyUnavailable: return "tally_unavailable";
    case RowStatus::Failed: return "failed";
  }
  return "failed";
}

json to_json(const CanonReport& report, bool include_timestamp) {
  json rows = json::array();
  for (const auto& r : report.per_problem) {
    json row{{"problem_id", r.problem_id},
             {"n", r.n},
             {"predominant", r.predominant},
             {"status", std::string(to_string(r.status))},
             {"tally", nullptr},
             {"p_hat", nullptr}};
    if (r.tally)
      row["tally"] = json{{"total_n", r.tally->total_n},
                          {"counts", r.tally->counts},
                          {"prevalent", r.tally->prevalent},
                          {"predominant", r.tally->predominant}};
    if (r.p_hat) row["p_hat"] = *r.p_hat;
    if (!r.error.empty()) row["error"] = r.error;
    rows.push_back(std::move(row));
  }
  json j{{"name", report.name},
         {"per_problem", std::move(rows)},
         {"varpi", nullptr},
         {"config_snapshot", report.config_snapshot}};
  if (report.varpi) j["varpi"] = *report.varpi;
  if (include_timestamp) j["created_at"] = report.created_at;
  return j;
}

namespace {

struct LoadedEntry {
  std::optional<model::ProblemStatement> stmt;
  std::optional<sim::ProblemProfile> profile;
};

void fail(CanonRow& row, ErrorKind kind, const std::string& message) {
  row.status = RowStatus::Failed;
  row.error = message;
  row.error_kind = kind;
}

}  // namespace

CanonReport run_canon(const CanonManifest& manifest, std::size_t n, const BackendFactory& make_backend,
                      const CanonOptions& options) {
  if (n < 1) throw ValidationError("run_canon: n must be at least 1");
  if (manifest.entries.empty()) throw ValidationError("run_canon: manifest has no entries");

  const auto count = manifest.entries.size();
  std::vector<CanonRow> rows(count);
  std::vector<LoadedEntry> loaded(count);
  std::set<std::string> ids;

  // Load up front so duplicate problem ids are caught before anything runs.
  for (std::size_t i = 0; i < count; ++i) {
    const auto& entry = manifest.entries[i];
    auto& row = rows[i];
    row.n = n;
    row.problem_id = entry.problem.stem().string();
    try {
      loaded[i].stmt = io::load_statement(entry.problem);
      row.problem_id = loaded[i].stmt->id;
      if (!ids.insert(row.problem_id).second)
        throw ValidationError("duplicate problem id '" + row.problem_id + "' in canon");
      if (entry.profile) {
        loaded[i].profile = sim::load_profile(*entry.profile);
        if (loaded[i].profile->problem_id != row.problem_id)
          throw ValidationError("profile '" + entry.profile->string() + "' is for problem '" +
                                loaded[i].profile->problem_id + "'");
      }
    } catch (const Error& e) {
      loaded[i] = {};
      fail(row, e.kind(), e.what());
    } catch (const std::exception& e) {
      loaded[i] = {};
      fail(row, ErrorKind::Validation, e.what());
    }
  }

  auto agency_options = options.agency;
  if (options.out_dir) agency_options.out_dir = options.out_dir;

  auto run_entry = [&](std::size_t i) {
    auto& row = rows[i];
    if (!loaded[i].stmt) return;
    try {
      auto backend = make_backend(*loaded[i].stmt, loaded[i].profile);
      const auto run = runtime::run_agency(*loaded[i].stmt, n, *backend, options.instructions, agency_options);
      row.n = run.transcript.n;
      if (const auto labels = runtime::class_labels(run.transcript)) {
        row.tally = consensus::make_tally(*labels);
        row.p_hat = consensus::bootstrap_estimate(*row.tally);
        row.predominant = row.tally->predominant;
        row.status = RowStatus::Ok;
      } else {
        row.status = RowStatus::TallyUnavailable;
      }
    } catch (const Error& e) {
      fail(row, e.kind(), e.what());
    } catch (const std::exception& e) {
      fail(row, ErrorKind::Backend, e.what());
    }
  };

  const auto workers = std::max<std::size_t>(1, std::min(options.canon_parallel, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) run_entry(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (auto i = next.fetch_add(1); i < count; i = next.fetch_add(1)) run_entry(i);
      });
  }

  CanonReport report;
  report.name = manifest.name;
  report.per_problem = std::move(rows);
  std::vector<double> estimates;
  for (const auto& r : report.per_problem)
    if (r.p_hat) estimates.push_back(*r.p_hat);
  if (!estimates.empty()) report.varpi = consensus::ensemble_metric(estimates);
  report.config_snapshot = options.config_snapshot;
  report.config_snapshot["n"] = std::to_string(n);
  report.config_snapshot["canon_parallel"] = std::to_string(workers);
  report.created_at = agency_options.created_at.value_or(model::now_utc_iso8601());
  return report;
}

std::vector<model::Grade> grade_with_oracle(const model::Transcript& transcript, const sim::ProblemProfile& profile,
                                            const model::GradingTemplate& tmpl) {
  model::validate(tmpl);
  if (!tmpl.problem_id.empty() && tmpl.problem_id != transcript.problem_id)
    throw ValidationError("grading template is for '" + tmpl.problem_id + "', transcript for '" +
                          transcript.problem_id + "'");
  if (profile.problem_id != transcript.problem_id)
    throw ValidationError("profile is for '" + profile.problem_id + "', transcript for '" + transcript.problem_id +
                          "'");

  std::vector<model::Grade> grades;
  grades.reserve(transcript.realizations.size());
  for (const auto& r : transcript.realizations) {
    if (!r.class_label)
      throw ValidationError("realization " + std::to_string(r.index) + " has no class label to grade");
    const auto* cls = profile.find(*r.class_label);
    if (!cls)
      throw ValidationError("realization " + std::to_string(r.index) + ": unknown class label '" + *r.class_label +
                            "'");
    std::vector<int> awards;
    awards.reserve(tmpl.items.size());
    for (const auto& item : tmpl.items) awards.push_back(cls->correct ? item.points : 0);
    grades.push_back(model::apply_grade(tmpl, awards));
  }
  return grades;
}

double correct_fraction(const std::vector<model::Grade>& grades) {
  if (grades.empty()) throw std::invalid_argument("correct_fraction: no grades");
  std::size_t correct = 0;
  for (const auto& g : grades) correct += g.verdict == model::Verdict::Correct ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(grades.size());
}

}  // namespace agency::canon
