#pragma once

// MultiProblemSolve: run the agency over a canon of problem statements and
// report per-problem p-hat and the ensemble mean.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "agency/backend.hpp"
#include "agency/consensus.hpp"
#include "agency/error.hpp"
#include "agency/problem_model.hpp"
#include "agency/runtime.hpp"
#include "agency/sim.hpp"

namespace agency::canon {

struct CanonEntry {
  std::filesystem::path problem;
  std::optional<std::filesystem::path> profile;
  std::optional<std::filesystem::path> grading_template;
};

struct CanonManifest {
  std::string name;
  std::vector<CanonEntry> entries;
};

// Manifest JSON: {"name": ..., "entries": [{"problem": ..., "profile": ...,
// "grading_template": ...}]}. Relative paths resolve against the manifest's
// directory. Throws ValidationError for an empty manifest or a missing
// "problem" key; files themselves are opened when the entry runs.
CanonManifest load_manifest(const std::filesystem::path& path);

enum class RowStatus { Ok, TallyUnavailable, Failed };
std::string_view to_string(RowStatus s);

struct CanonRow {
  std::string problem_id;
  std::size_t n = 0;
  std::optional<consensus::Tally> tally;
  std::optional<double> p_hat;
  bool predominant = false;
  RowStatus status = RowStatus::Ok;
  std::string error;
  std::optional<ErrorKind> error_kind;
};

struct CanonReport {
  std::string name;
  std::vector<CanonRow> per_problem;
  std::optional<double> varpi;  // mean of the available p_hat values
  std::map<std::string, std::string> config_snapshot;
  std::string created_at;
};

nlohmann::json to_json(const CanonReport& report, bool include_timestamp = true);

// Builds the backend for one entry. `profile` is set when the entry has one.
using BackendFactory = std::function<std::unique_ptr<runtime::ModelBackend>(
    const model::ProblemStatement& stmt, const std::optional<sim::ProblemProfile>& profile)>;

struct CanonOptions {
  std::optional<std::filesystem::path> out_dir;
  std::size_t canon_parallel = 1;
  runtime::InstructionPair instructions;
  runtime::AgencyOptions agency;
  std::map<std::string, std::string> config_snapshot;
};

// Runs every entry (sequentially unless canon_parallel > 1) and tallies class
// labels. Entry failures are recorded in their row; they never stop the canon.
// One row per manifest entry, in manifest order.
CanonReport run_canon(const CanonManifest& manifest, std::size_t n, const BackendFactory& make_backend,
                      const CanonOptions& options = {});

// Oracle grading stub: realizations in a correct class earn every point of the
// template, others earn none. Throws ValidationError when a realization has no
// label or a label the profile does not define.
std::vector<model::Grade> grade_with_oracle(const model::Transcript& transcript, const sim::ProblemProfile& profile,
                                            const model::GradingTemplate& tmpl);

// Fraction of Correct verdicts.
double correct_fraction(const std::vector<model::Grade>& grades);

}  // namespace agency::canon
