// Default agent instructions and the Solve prompt builder.
//
// The instruction wording below was written for this project. It is not
// taken from any published prompt.

#include <sstream>

#include "agency/error.hpp"
#include "agency/runtime.hpp"

namespace agency::runtime {

namespace {

constexpr const char* kToolPolicy =
    "Do every numerical calculation by first writing and then executing a script. "
    "Never perform arithmetic in prose; report the script and its printed results.";

constexpr const char* kRestrictions =
    "Initial Analysis Restrictions: use only low-cost mathematical models, namely algebraic relations, "
    "ordinary differential equations, or partial differential equations in one space dimension. "
    "Use readily available archival data for material and physical properties. "
    "Do not build multi-dimensional numerical simulations.";

constexpr const char* kExpectations =
    "Expectations for Proposed Problem Solutions: state and justify every assumption and every piece of "
    "missing data you supply; state the mathematical model; describe the solution procedure and its result "
    "for each Quantity of Interest; verify the computation and discuss validity, including an estimate of "
    "the approximation error.";

constexpr const char* kSolveSystem =
    "You are an engineering analyst. Solve the problem statement you are given, on your own, from first "
    "principles. Organize your answer in exactly four sections with these headers, in this order:\n"
    "## Part 1 Data Completion\n"
    "## Part 2 Mathematical Model\n"
    "## Part 3 Solution Procedure\n"
    "## Part 4 Verification and Validation\n"
    "Give the final value of every Quantity of Interest in Part 3.";

constexpr const char* kCompareSystem =
    "You are reviewing several independent solutions to the same engineering problem statement. Group the "
    "solutions into equivalence classes of semantically identical answers, compare them critically, identify "
    "errors, note any alternative models or procedures worth keeping, and recommend one solution. If the "
    "problem admits several justifiable answers, say so. Lay out your reply with these headers:\n"
    "## Discussion\n"
    "## Recommended Solution\n"
    "## Assessments\n"
    "(one line per solution: \"- Realization k: <assessment>\")\n"
    "## Secondary Opinions\n"
    "(one bullet per noteworthy minority view)\n"
    "## Equivalence Classes\n"
    "(one line per solution: \"- Realization k: <short class label>\", using the same label for equivalent "
    "answers)";

}  // namespace

AgentInstructions default_solve_instructions() {
  return {AgentRole::Solve, kSolveSystem, kToolPolicy, kRestrictions, kExpectations};
}

AgentInstructions default_compare_instructions() {
  return {AgentRole::Compare, kCompareSystem, kToolPolicy, kRestrictions, kExpectations};
}

PreparedProblem preprocess(const model::ProblemStatement& stmt, const AgentInstructions& instr) {
  if (const auto issues = model::validate_statement(stmt); !issues.empty()) {
    std::string msg = "invalid problem statement";
    for (const auto& i : issues) msg += "; " + i.field + ": " + i.message;
    throw ValidationError(msg);
  }
  for (const auto& a : stmt.attachments) {
    if (a.bytes.size() > kMaxAttachmentBytes)
      throw ValidationError("attachment '" + a.filename + "' is " + std::to_string(a.bytes.size()) +
                            " bytes, over the " + std::to_string(kMaxAttachmentBytes) + "-byte limit");
  }

  std::ostringstream p;
  p << "# Problem Statement";
  if (!stmt.title.empty()) p << ": " << stmt.title;
  p << "\n\n";
  if (!stmt.body_text.empty()) p << stmt.body_text << "\n\n";
  p << "## Quantities of Interest\n\n";
  for (const auto& q : stmt.qoi) p << "- " << q << "\n";
  p << "\n";
  if (stmt.parameters && !stmt.parameters->empty()) {
    p << "## Problem Statement Parameters\n\n";
    for (const auto& prm : *stmt.parameters) {
      p << "- " << prm.name;
      if (!prm.description.empty()) p << ": " << prm.description;
      if (!prm.domain_description.empty()) p << " (domain: " << prm.domain_description << ")";
      p << "\n";
    }
    p << "\n";
  }
  if (stmt.engineering_context) p << "## Engineering Context\n\n" << *stmt.engineering_context << "\n\n";
  if (!stmt.attachments.empty()) {
    p << "## Attachments\n\n";
    for (const auto& a : stmt.attachments) p << "- " << a.filename << " (" << a.media_type << ")\n";
    p << "\n";
  }
  if (!instr.expectations_text.empty()) p << "## Expectations\n\n" << instr.expectations_text << "\n\n";
  if (!instr.restrictions_text.empty()) p << "## Restrictions\n\n" << instr.restrictions_text << "\n\n";
  if (!instr.tool_policy.empty()) p << "## Tool Policy\n\n" << instr.tool_policy << "\n";

  return PreparedProblem{p.str(), stmt.attachments, stmt.id};
}

}  // namespace agency::runtime
