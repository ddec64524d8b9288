#include <sstream>

#include "agency/problem_model.hpp"

namespace agency::model {

namespace {

// Quote every line so agent text cannot open sections of its own.
void quoted(std::ostringstream& out, const std::string& text) {
  if (text.empty()) {
    out << "> _(empty)_\n";
    return;
  }
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty())
      out << ">\n";
    else
      out << "> " << line << "\n";
  }
}

std::string one_line(std::string text) {
  for (auto& c : text)
    if (c == '\n' || c == '\r') c = ' ';
  return text;
}

void realization_section(std::ostringstream& out, const Realization& r) {
  out << "## Realization " << r.index << "\n\n";
  if (r.class_label) out << "- Equivalence class: `" << one_line(*r.class_label) << "`\n";
  for (const auto& [key, value] : r.backend_metadata) out << "- " << one_line(key) << ": " << one_line(value) << "\n";
  out << "\n";
  const bool has_parts = !(r.part1_data_completion.empty() && r.part2_model.empty() &&
                           r.part3_solution_procedure.empty() && r.part4_verification_validation.empty());
  if (has_parts) {
    const std::pair<const char*, const std::string*> parts[] = {
        {"Part 1: Data Completion", &r.part1_data_completion},
        {"Part 2: Mathematical Model", &r.part2_model},
        {"Part 3: Solution Procedure", &r.part3_solution_procedure},
        {"Part 4: Verification and Validation", &r.part4_verification_validation},
    };
    for (const auto& [title, text] : parts) {
      out << "### " << title << "\n\n";
      quoted(out, *text);
      out << "\n";
    }
  } else {
    out << "### Raw Output\n\n";
    quoted(out, r.raw_output);
    out << "\n";
  }
  if (r.approximation_error_note) {
    out << "### Approximation Error\n\n";
    quoted(out, *r.approximation_error_note);
    out << "\n";
  }
}

}  // namespace

std::string render_transcript(const Transcript& t) {
  std::ostringstream out;
  out << "# Problem Transcript: " << one_line(t.problem_id) << "\n\n";
  out << "- Realizations: " << t.n << "\n";
  out << "- Created: " << t.created_at << "\n";
  for (const auto& [key, value] : t.agency_config_snapshot)
    out << "- " << one_line(key) << ": " << one_line(value) << "\n";
  out << "\n";

  for (const auto& r : t.realizations) realization_section(out, r);

  if (t.recommendation) {
    const auto& rec = *t.recommendation;
    out << "## Recommendation\n\n";
    out << "### Recommended Solution\n\n";
    quoted(out, rec.recommended_solution);
    out << "\n### Discussion\n\n";
    quoted(out, rec.discussion);
    out << "\n";
    if (!rec.per_realization_assessments.empty()) {
      out << "### Assessments\n\n";
      for (const auto& a : rec.per_realization_assessments) {
        out << "- Realization " << a.index << ":\n";
        quoted(out, a.text);
      }
      out << "\n";
    }
    if (!rec.secondary_opinions_noted.empty()) {
      out << "### Secondary Opinions\n\n";
      for (const auto& s : rec.secondary_opinions_noted) out << "- " << one_line(s) << "\n";
      out << "\n";
    }
    out << "### Review\n\n";
    out << "- [ ] Accept recommendation\n";
    out << "- [ ] Reject recommendation\n";
  }
  return out.str();
}

}  // namespace agency::model
