#pragma once

// The N-plus-1 pipeline: preprocess, N independent Solve calls, one Compare
// call, transcript.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "agency/backend.hpp"
#include "agency/problem_model.hpp"

namespace agency::runtime {

struct AgentInstructions {
  AgentRole role = AgentRole::Solve;
  std::string system_text;
  std::string tool_policy;
  std::string restrictions_text;
  std::string expectations_text;
};

// Shipped defaults.
AgentInstructions default_solve_instructions();
AgentInstructions default_compare_instructions();

struct InstructionPair {
  AgentInstructions solve = default_solve_instructions();
  AgentInstructions compare = default_compare_instructions();
};

inline constexpr std::size_t kMaxAttachmentBytes = 8u * 1024u * 1024u;

struct PreparedProblem {
  std::string prompt_text;
  std::vector<model::Attachment> attachments;
  std::string provenance;  // problem id

  friend bool operator==(const PreparedProblem&, const PreparedProblem&) = default;
};

// Builds the Solve prompt. Throws ValidationError for a structurally invalid
// statement or an attachment over kMaxAttachmentBytes (the message names it).
PreparedProblem preprocess(const model::ProblemStatement& stmt, const AgentInstructions& solve_instructions);

// Waits between retries. Tests swap in a no-op.
using Sleeper = std::function<void(std::chrono::milliseconds)>;
void default_sleeper(std::chrono::milliseconds d);

// One Solve call in a fresh session. Transport failures are retried with
// exponential backoff up to config().retry.max_attempts; after that, or on an
// empty response, throws RealizationFailure carrying `index`.
model::Realization solve_once(const PreparedProblem& prep, const AgentInstructions& instr, ModelBackend& backend,
                              std::size_t index, const Sleeper& sleep = default_sleeper);

struct SolveFailure {
  std::size_t requested_index = 0;
  std::string reason;
};

struct SolveBatch {
  std::vector<model::Realization> realizations;  // ascending index
  std::vector<SolveFailure> failures;
  std::vector<std::string> warnings;
};

struct SolveOptions {
  bool allow_partial = false;
  Sleeper sleep = default_sleeper;
};

// Runs n Solve calls with at most config().max_parallel in flight. Results are
// ordered by index, never by completion. Without allow_partial any failure
// throws (RealizationFailure for the lowest failing index). With allow_partial
// the successes are renumbered 1..n' (original index kept in backend_metadata
// "requested_index") and failures are reported; zero successes always throws.
SolveBatch solve_n(const PreparedProblem& prep, const AgentInstructions& instr, ModelBackend& backend, std::size_t n,
                   const SolveOptions& options = {});

// Index-ordered concatenation sent to Agent Compare. Byte-identical for equal input.
std::string build_compare_prompt(std::span<const model::Realization> realizations);

struct ParsedCompare {
  model::Recommendation recommendation;
  std::map<std::size_t, std::string> class_labels;  // realization index -> class
  std::vector<std::string> warnings;
};

// Parses Compare output laid out as "## Discussion", "## Recommended Solution",
// "## Assessments", "## Secondary Opinions", "## Equivalence Classes". Missing
// or empty "## Recommended Solution" degrades to the whole raw text in both
// discussion and recommended_solution, plus a warning. Assessments or labels
// naming unknown indices are dropped with a warning.
ParsedCompare parse_compare_output(std::string_view raw, std::span<const model::Realization> realizations);

// Renders a recommendation in the layout parse_compare_output reads.
std::string format_compare_output(const model::Recommendation& rec,
                                  const std::map<std::size_t, std::string>& class_labels);

// One Compare call. Throws BackendError after retries are exhausted.
ParsedCompare compare(std::span<const model::Realization> realizations, const AgentInstructions& instr,
                      ModelBackend& backend, const Sleeper& sleep = default_sleeper,
                      std::optional<std::string> extra_context = std::nullopt);

struct AgencyOptions {
  bool allow_partial = false;
  bool force_compare = false;           // run Compare even when n == 1
  bool append_tally_to_compare = false; // opt-in: show Compare the class tally
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::string> created_at;  // override the timestamp
  Sleeper sleep = default_sleeper;
};

struct AgencyRun {
  model::Transcript transcript;
  std::vector<SolveFailure> failures;
  std::vector<std::string> warnings;
};

// preprocess -> solve_n -> compare (when n >= 2 or forced) -> compose_transcript,
// then persists under out_dir if set. Failures are rethrown as StageError
// naming the stage, keeping the original error category.
AgencyRun run_agency(const model::ProblemStatement& stmt, std::size_t n, ModelBackend& backend,
                     const InstructionPair& instructions = {}, const AgencyOptions& options = {});

// Class labels of all realizations, or nullopt if any realization lacks one.
std::optional<std::vector<std::string>> class_labels(const model::Transcript& t);

}  // namespace agency::runtime
