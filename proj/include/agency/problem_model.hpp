#pragma once

// Problem statements, solve realizations, transcripts and grading.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace agency::model {

// Attachment payloads are opaque; images are never inspected.
struct Attachment {
  std::string filename;
  std::string media_type;
  std::string bytes;

  friend bool operator==(const Attachment&, const Attachment&) = default;
};

struct Parameter {
  std::string name;
  std::string description;
  std::string domain_description;

  friend bool operator==(const Parameter&, const Parameter&) = default;
};

struct ProblemStatement {
  std::string id;
  std::string title;
  std::string body_text;
  std::vector<Attachment> attachments;
  std::vector<std::string> qoi;  // quantities of interest
  std::optional<std::vector<Parameter>> parameters;
  std::optional<std::string> engineering_context;

  friend bool operator==(const ProblemStatement&, const ProblemStatement&) = default;
};

struct ValidationIssue {
  std::string field;
  std::string message;

  friend bool operator==(const ValidationIssue&, const ValidationIssue&) = default;
};

// Structural checks only. An empty report means the statement is well formed.
std::vector<ValidationIssue> validate_statement(const ProblemStatement& stmt);

// One Agent Solve output.
struct Realization {
  std::size_t index = 0;  // 1-based
  std::string part1_data_completion;
  std::string part2_model;
  std::string part3_solution_procedure;
  std::string part4_verification_validation;
  std::string raw_output;
  std::optional<std::string> class_label;
  std::optional<std::string> approximation_error_note;
  std::map<std::string, std::string> backend_metadata;

  friend bool operator==(const Realization&, const Realization&) = default;
};

// Splits `raw` on the "## Part 1" .. "## Part 4" delimiters into the four part
// fields of `r`. When the four headers are not all present in order the parts
// are left empty and a warning is returned; raw_output is never touched.
std::optional<std::string> extract_parts(Realization& r);

struct Assessment {
  std::size_t index = 0;
  std::string text;

  friend bool operator==(const Assessment&, const Assessment&) = default;
};

struct Recommendation {
  std::string discussion;
  std::string recommended_solution;
  std::vector<Assessment> per_realization_assessments;
  std::vector<std::string> secondary_opinions_noted;

  friend bool operator==(const Recommendation&, const Recommendation&) = default;
};

struct Transcript {
  std::string problem_id;
  std::size_t n = 0;
  std::vector<Realization> realizations;
  std::optional<Recommendation> recommendation;  // absent for ex-situ (N = 1) runs
  std::string created_at;                        // UTC, ISO-8601
  std::map<std::string, std::string> agency_config_snapshot;

  friend bool operator==(const Transcript&, const Transcript&) = default;
};

// Current time as "YYYY-MM-DDTHH:MM:SSZ".
std::string now_utc_iso8601();

// Orders realizations by index and checks they run 1..n without gaps or
// duplicates. Throws ValidationError otherwise, or when the recommendation
// assesses an index that is not in the list or has an empty recommended_solution.
Transcript compose_transcript(std::string problem_id, std::vector<Realization> realizations,
                              std::optional<Recommendation> recommendation,
                              std::string created_at = now_utc_iso8601(),
                              std::map<std::string, std::string> config_snapshot = {});

// Re-checks the invariants compose_transcript establishes.
void validate(const Transcript& t);

// Human-readable markdown for accept/reject review: one "## Realization k"
// section per realization in index order, then "## Recommendation" when present.
// Agent-authored text is quoted so it cannot introduce headers of its own.
std::string render_transcript(const Transcript& t);

struct GradingItem {
  std::string criterion_text;
  int points = 0;

  friend bool operator==(const GradingItem&, const GradingItem&) = default;
};

inline constexpr int kDefaultGradeThreshold = 70;
inline constexpr int kTotalGradePoints = 100;

struct GradingTemplate {
  std::string problem_id;
  std::vector<GradingItem> items;
  int threshold = kDefaultGradeThreshold;

  friend bool operator==(const GradingTemplate&, const GradingTemplate&) = default;
};

// Throws ValidationError unless points are non-negative and sum to 100 and
// the threshold is in [0,100].
void validate(const GradingTemplate& tmpl);

enum class Verdict { Correct, Incorrect };

struct ItemAward {
  std::string criterion_text;
  int awarded_points = 0;

  friend bool operator==(const ItemAward&, const ItemAward&) = default;
};

struct Grade {
  int value = 0;
  Verdict verdict = Verdict::Incorrect;
  std::vector<ItemAward> item_awards;

  friend bool operator==(const Grade&, const Grade&) = default;
};

// Correct iff the summed awards reach the template threshold (inclusive).
// Throws ValidationError when awards do not line up with the items or exceed
// an item's points.
Grade apply_grade(const GradingTemplate& tmpl, std::span<const int> awards);

}  // namespace agency::model
