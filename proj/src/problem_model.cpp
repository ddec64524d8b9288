#include "agency/problem_model.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <ctime>
#include <numeric>
#include <set>
#include <sstream>

#include "agency/error.hpp"

namespace agency::model {

std::vector<ValidationIssue> validate_statement(const ProblemStatement& stmt) {
  std::vector<ValidationIssue> issues;
  if (stmt.id.empty()) issues.push_back({"id", "id empty"});
  if (stmt.qoi.empty()) issues.push_back({"qoi", "qoi empty"});
  for (std::size_t i = 0; i < stmt.qoi.size(); ++i)
    if (stmt.qoi[i].empty()) issues.push_back({"qoi", "qoi entry " + std::to_string(i + 1) + " empty"});
  // Image-only statements are fine; a statement with nothing at all is not.
  if (stmt.body_text.empty() && stmt.attachments.empty())
    issues.push_back({"body_text", "statement has neither body text nor attachments"});

  std::set<std::string> seen;
  for (const auto& a : stmt.attachments) {
    if (a.filename.empty()) {
      issues.push_back({"attachments", "attachment with empty filename"});
      continue;
    }
    if (a.media_type.empty()) issues.push_back({"attachments", "attachment '" + a.filename + "' has no media type"});
    if (!seen.insert(a.filename).second)
      issues.push_back({"attachments", "duplicate attachment filename '" + a.filename + "'"});
  }
  if (stmt.parameters) {
    for (const auto& p : *stmt.parameters)
      if (p.name.empty()) issues.push_back({"parameters", "parameter with empty name"});
  }
  return issues;
}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

// Returns the part number (1-4) if `line` is a "## Part k" header.
int part_header(std::string_view line) {
  constexpr std::string_view prefix = "## Part ";
  if (line.substr(0, prefix.size()) != prefix || line.size() <= prefix.size()) return 0;
  const char d = line[prefix.size()];
  if (d < '1' || d > '4') return 0;
  // "## Part 12" is not a header for part 1.
  if (line.size() > prefix.size() + 1 && std::isdigit(static_cast<unsigned char>(line[prefix.size() + 1]))) return 0;
  return d - '0';
}

}  // namespace

std::optional<std::string> extract_parts(Realization& r) {
  struct Header {
    int part;
    std::size_t body_begin;
    std::size_t line_begin;
  };
  std::vector<Header> headers;
  std::size_t pos = 0;
  const std::string& raw = r.raw_output;
  while (pos <= raw.size()) {
    auto eol = raw.find('\n', pos);
    if (eol == std::string::npos) eol = raw.size();
    if (int k = part_header(std::string_view(raw).substr(pos, eol - pos)); k != 0)
      headers.push_back({k, std::min(eol + 1, raw.size()), pos});
    pos = eol + 1;
  }

  std::array<std::string*, 4> fields = {&r.part1_data_completion, &r.part2_model, &r.part3_solution_procedure,
                                        &r.part4_verification_validation};
  bool ordered = headers.size() == 4;
  for (std::size_t i = 0; ordered && i < 4; ++i) ordered = headers[i].part == static_cast<int>(i + 1);
  if (!ordered) {
    for (auto* f : fields) f->clear();
    return "realization " + std::to_string(r.index) +
           ": output does not follow the '## Part 1'..'## Part 4' layout; kept as raw output only";
  }
  for (std::size_t i = 0; i < 4; ++i) {
    const auto end = i + 1 < 4 ? headers[i + 1].line_begin : raw.size();
    *fields[i] = trim(std::string_view(raw).substr(headers[i].body_begin, end - headers[i].body_begin));
  }
  return std::nullopt;
}

std::string now_utc_iso8601() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void validate(const Transcript& t) {
  if (t.problem_id.empty()) throw ValidationError("transcript: problem_id empty");
  if (t.realizations.empty()) throw ValidationError("transcript: no realizations");
  if (t.n != t.realizations.size()) throw ValidationError("transcript: n does not match realization count");
  std::set<std::size_t> indices;
  for (std::size_t i = 0; i < t.realizations.size(); ++i) {
    const auto idx = t.realizations[i].index;
    if (idx != i + 1) {
      std::ostringstream msg;
      msg << "transcript: realization indices must run 1.." << t.n << " without gaps or duplicates (found "
          << idx << " at position " << i + 1 << ")";
      throw ValidationError(msg.str());
    }
    if (t.realizations[i].raw_output.empty())
      throw ValidationError("transcript: realization " + std::to_string(idx) + " has empty raw_output");
    indices.insert(idx);
  }
  if (t.recommendation) {
    if (t.recommendation->recommended_solution.empty())
      throw ValidationError("transcript: recommendation has empty recommended_solution");
    for (const auto& a : t.recommendation->per_realization_assessments)
      if (!indices.contains(a.index))
        throw ValidationError("transcript: assessment refers to unknown realization " + std::to_string(a.index));
  }
}

Transcript compose_transcript(std::string problem_id, std::vector<Realization> realizations,
                              std::optional<Recommendation> recommendation, std::string created_at,
                              std::map<std::string, std::string> config_snapshot) {
  std::stable_sort(realizations.begin(), realizations.end(),
                   [](const Realization& a, const Realization& b) { return a.index < b.index; });
  Transcript t;
  t.problem_id = std::move(problem_id);
  t.n = realizations.size();
  t.realizations = std::move(realizations);
  t.recommendation = std::move(recommendation);
  t.created_at = std::move(created_at);
  t.agency_config_snapshot = std::move(config_snapshot);
  validate(t);
  return t;
}

void validate(const GradingTemplate& tmpl) {
  if (tmpl.items.empty()) throw ValidationError("grading template: no items");
  int sum = 0;
  for (const auto& item : tmpl.items) {
    if (item.points < 0) throw ValidationError("grading template: negative points for '" + item.criterion_text + "'");
    sum += item.points;
  }
  if (sum != kTotalGradePoints)
    throw ValidationError("grading template: points sum to " + std::to_string(sum) + ", expected 100");
  if (tmpl.threshold < 0 || tmpl.threshold > kTotalGradePoints)
    throw ValidationError("grading template: threshold outside [0,100]");
}

Grade apply_grade(const GradingTemplate& tmpl, std::span<const int> awards) {
  validate(tmpl);
  if (awards.size() != tmpl.items.size())
    throw ValidationError("apply_grade: " + std::to_string(awards.size()) + " awards for " +
                          std::to_string(tmpl.items.size()) + " template items");
  Grade g;
  for (std::size_t i = 0; i < awards.size(); ++i) {
    const auto& item = tmpl.items[i];
    if (awards[i] < 0 || awards[i] > item.points)
      throw ValidationError("apply_grade: award " + std::to_string(awards[i]) + " out of range [0," +
                            std::to_string(item.points) + "] for '" + item.criterion_text + "'");
    g.item_awards.push_back({item.criterion_text, awards[i]});
  }
  g.value = std::accumulate(awards.begin(), awards.end(), 0);
  g.verdict = g.value >= tmpl.threshold ? Verdict::Correct : Verdict::Incorrect;
  return g;
}

}  // namespace agency::model
