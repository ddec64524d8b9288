#include "agency/runtime.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include "agency/consensus.hpp"
#include "agency/error.hpp"
#include "agency/serialization.hpp"

namespace agency::runtime {

std::string_view to_string(BackendKind kind) { return kind == BackendKind::Remote ? "remote" : "sim"; }

std::string_view to_string(ReasoningEffort effort) {
  switch (effort) {
    case ReasoningEffort::Low: return "low";
    case ReasoningEffort::Medium: return "medium";
    case ReasoningEffort::High: return "high";
  }
  return "high";
}

std::string_view to_string(AgentRole role) { return role == AgentRole::Solve ? "solve" : "compare"; }

BackendKind parse_backend_kind(std::string_view text) {
  if (text == "remote") return BackendKind::Remote;
  if (text == "sim" || text == "simulated") return BackendKind::Simulated;
  throw ValidationError("unknown backend kind '" + std::string(text) + "' (expected remote or sim)");
}

ReasoningEffort parse_reasoning_effort(std::string_view text) {
  if (text == "low") return ReasoningEffort::Low;
  if (text == "medium") return ReasoningEffort::Medium;
  if (text == "high") return ReasoningEffort::High;
  throw ValidationError("unknown reasoning effort '" + std::string(text) + "' (expected low, medium or high)");
}

void BackendConfig::validate() const {
  if (max_parallel < 1) throw ValidationError("backend config: max_parallel must be at least 1");
  if (retry.max_attempts < 1) throw ValidationError("backend config: retry max_attempts must be at least 1");
  if (retry.base_backoff.count() < 0) throw ValidationError("backend config: negative base backoff");
  if (request_timeout.count() <= 0) throw ValidationError("backend config: request_timeout must be positive");
}

std::map<std::string, std::string> BackendConfig::snapshot() const {
  std::map<std::string, std::string> s{
      {"kind", std::string(to_string(kind))},
      {"model_id", model_id},
      {"reasoning_effort", std::string(to_string(reasoning_effort))},
      {"max_parallel", std::to_string(max_parallel)},
      {"retry_max_attempts", std::to_string(retry.max_attempts)},
      {"retry_base_backoff_ms", std::to_string(retry.base_backoff.count())},
      {"request_timeout_s", std::to_string(request_timeout.count())},
  };
  if (kind == BackendKind::Remote) s["endpoint"] = endpoint;
  return s;
}

void default_sleeper(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

namespace {

// Calls the backend, retrying TransportError with exponential backoff.
// Returns the response and the number of attempts used.
std::pair<ChatResponse, int> call_with_retry(ModelBackend& backend, ChatRequest request, const Sleeper& sleep) {
  const auto& retry = backend.config().retry;
  const std::string base_session = request.session_id;
  for (int attempt = 1;; ++attempt) {
    request.session_id = base_session + "/attempt-" + std::to_string(attempt);
    try {
      return {backend.complete(request), attempt};
    } catch (const TransportError&) {
      if (attempt >= retry.max_attempts) throw;
      sleep(retry.base_backoff * (1LL << std::min(attempt - 1, 20)));
    }
  }
}

std::string system_prompt(const AgentInstructions& instr) {
  std::string s = instr.system_text;
  if (!instr.tool_policy.empty()) s += "\n\n" + instr.tool_policy;
  return s;
}

struct SolveOutcome {
  model::Realization realization;
  std::optional<std::string> warning;
};

SolveOutcome solve_once_impl(const PreparedProblem& prep, const AgentInstructions& instr, ModelBackend& backend,
                             std::size_t index, const Sleeper& sleep) {
  if (instr.role != AgentRole::Solve) throw ValidationError("solve_once: instructions are not for the solve role");
  if (instr.system_text.empty()) throw ValidationError("solve_once: empty system instructions");

  ChatRequest req;
  req.role = AgentRole::Solve;
  req.session_id = prep.provenance + "/solve/" + std::to_string(index);
  req.index = index;
  req.system_text = system_prompt(instr);
  req.user_text = prep.prompt_text;
  req.attachments = prep.attachments;

  const auto start = std::chrono::steady_clock::now();
  ChatResponse resp;
  int attempts = 0;
  try {
    std::tie(resp, attempts) = call_with_retry(backend, std::move(req), sleep);
  } catch (const TransportError& e) {
    throw RealizationFailure(index, std::string("transport failure after retries: ") + e.what());
  } catch (const BackendError& e) {
    throw RealizationFailure(index, e.what());
  }
  const auto elapsed =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
  if (resp.text.empty()) throw RealizationFailure(index, "empty backend response");

  model::Realization r;
  r.index = index;
  r.raw_output = std::move(resp.text);
  r.class_label = std::move(resp.class_label);
  r.backend_metadata = std::move(resp.metadata);
  r.backend_metadata.try_emplace("model_id", backend.config().model_id);
  r.backend_metadata["attempts"] = std::to_string(attempts);
  r.backend_metadata["wall_time_ms"] = std::to_string(elapsed.count());
  auto warning = model::extract_parts(r);
  return {std::move(r), std::move(warning)};
}

}  // namespace

model::Realization solve_once(const PreparedProblem& prep, const AgentInstructions& instr, ModelBackend& backend,
                              std::size_t index, const Sleeper& sleep) {
  return solve_once_impl(prep, instr, backend, index, sleep).realization;
}

SolveBatch solve_n(const PreparedProblem& prep, const AgentInstructions& instr, ModelBackend& backend, std::size_t n,
                   const SolveOptions& options) {
  if (n < 1) throw ValidationError("solve_n: n must be at least 1");

  std::vector<std::optional<SolveOutcome>> slots(n);
  std::vector<std::optional<std::string>> errors(n);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};

  auto worker = [&] {
    for (;;) {
      if (!options.allow_partial && abort.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        slots[i] = solve_once_impl(prep, instr, backend, i + 1, options.sleep);
      } catch (const RealizationFailure& e) {
        errors[i] = e.reason();
        abort = true;
      } catch (const std::exception& e) {
        errors[i] = e.what();
        abort = true;
      }
    }
  };

  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(backend.config().max_parallel), n);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  SolveBatch batch;
  for (std::size_t i = 0; i < n; ++i)
    if (errors[i]) batch.failures.push_back({i + 1, *errors[i]});

  if (!batch.failures.empty() && !options.allow_partial) {
    const auto& first = batch.failures.front();
    throw RealizationFailure(first.requested_index,
                             first.reason + " (partial results not allowed; " + std::to_string(batch.failures.size()) +
                                 " of " + std::to_string(n) + " realizations failed)");
  }

  std::size_t next_index = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (!slots[i]) continue;
    auto& outcome = *slots[i];
    if (outcome.warning) batch.warnings.push_back(*outcome.warning);
    if (!batch.failures.empty()) {
      outcome.realization.backend_metadata["requested_index"] = std::to_string(i + 1);
      outcome.realization.index = next_index;
    }
    ++next_index;
    batch.realizations.push_back(std::move(outcome.realization));
  }
  for (const auto& f : batch.failures)
    batch.warnings.push_back("realization " + std::to_string(f.requested_index) + " failed: " + f.reason);

  if (batch.realizations.empty())
    throw BackendError("solve_n: all " + std::to_string(n) + " realizations failed; first: " +
                       batch.failures.front().reason);
  return batch;
}

std::string build_compare_prompt(std::span<const model::Realization> realizations) {
  std::vector<const model::Realization*> ordered;
  ordered.reserve(realizations.size());
  for (const auto& r : realizations) ordered.push_back(&r);
  std::stable_sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->index < b->index; });

  std::ostringstream p;
  p << "The following " << ordered.size() << " solution realizations were produced independently for the same "
    << "problem statement.\n\n";
  for (const auto* r : ordered) {
    p << "### Realization " << r->index << "\n\n" << r->raw_output;
    if (r->raw_output.empty() || r->raw_output.back() != '\n') p << "\n";
    p << "\n";
  }
  return p.str();
}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

enum class Section { Preamble, Discussion, Recommended, Assessments, Secondary, Classes, Other };

Section section_for(const std::string& header) {
  const auto h = lower(trim(header));
  if (h == "discussion") return Section::Discussion;
  if (h == "recommended solution" || h == "recommendation") return Section::Recommended;
  if (h == "assessments") return Section::Assessments;
  if (h == "secondary opinions") return Section::Secondary;
  if (h == "equivalence classes") return Section::Classes;
  return Section::Other;
}

void append_line(std::string& target, const std::string& line) {
  if (!target.empty()) target += "\n";
  target += line;
}

std::string strip_label(std::string s) {
  s = trim(s);
  if (s.size() >= 2 && s.front() == '`' && s.back() == '`') s = trim(std::string_view(s).substr(1, s.size() - 2));
  return s;
}

}  // namespace

ParsedCompare parse_compare_output(std::string_view raw, std::span<const model::Realization> realizations) {
  static const std::regex kIndexedLine(R"(^\s*[-*]\s*Realization\s+(\d+)\s*[:\-]\s*(.*)$)", std::regex::icase);
  static const std::regex kIndexedHeader(R"(^###\s*Realization\s+(\d+)\s*:?\s*(.*)$)", std::regex::icase);

  std::string discussion, recommended;
  std::vector<model::Assessment> assessments;
  std::vector<std::string> secondary;
  std::vector<std::pair<std::size_t, std::string>> labels;
  std::string* open_text = nullptr;  // assessment or secondary bullet accepting continuation lines

  Section current = Section::Preamble;
  std::istringstream in{std::string(raw)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("## ", 0) == 0) {
      const auto s = section_for(line.substr(3));
      if (s != Section::Other) {
        current = s;
        open_text = nullptr;
        continue;
      }
    }
    std::smatch m;
    switch (current) {
      case Section::Preamble:
      case Section::Other:
        break;
      case Section::Discussion:
        append_line(discussion, line);
        break;
      case Section::Recommended:
        append_line(recommended, line);
        break;
      case Section::Assessments:
        if (std::regex_match(line, m, kIndexedLine) || std::regex_match(line, m, kIndexedHeader)) {
          assessments.push_back({std::stoul(m[1].str()), trim(m[2].str())});
          open_text = &assessments.back().text;
        } else if (open_text && !trim(line).empty()) {
          append_line(*open_text, trim(line));
        }
        break;
      case Section::Secondary: {
        const auto t = trim(line);
        if (t.rfind("- ", 0) == 0 || t.rfind("* ", 0) == 0) {
          secondary.push_back(trim(std::string_view(t).substr(2)));
          open_text = &secondary.back();
        } else if (open_text && !t.empty()) {
          append_line(*open_text, t);
        }
        break;
      }
      case Section::Classes:
        if (std::regex_match(line, m, kIndexedLine)) {
          auto label = strip_label(m[2].str());
          if (!label.empty()) labels.emplace_back(std::stoul(m[1].str()), std::move(label));
        }
        break;
    }
  }

  ParsedCompare out;
  std::set<std::size_t> known;
  for (const auto& r : realizations) known.insert(r.index);

  recommended = trim(recommended);
  if (recommended.empty()) {
    out.recommendation.discussion = std::string(raw);
    out.recommendation.recommended_solution = std::string(raw);
    out.warnings.push_back("compare output lacks a '## Recommended Solution' section; kept the raw text");
    return out;
  }

  out.recommendation.discussion = trim(discussion);
  out.recommendation.recommended_solution = std::move(recommended);
  for (auto& a : assessments) {
    if (known.contains(a.index))
      out.recommendation.per_realization_assessments.push_back(std::move(a));
    else
      out.warnings.push_back("compare assessed unknown realization " + std::to_string(a.index) + "; dropped");
  }
  out.recommendation.secondary_opinions_noted = std::move(secondary);
  for (auto& [idx, label] : labels) {
    if (known.contains(idx))
      out.class_labels[idx] = std::move(label);
    else
      out.warnings.push_back("compare labelled unknown realization " + std::to_string(idx) + "; dropped");
  }
  return out;
}

std::string format_compare_output(const model::Recommendation& rec,
                                  const std::map<std::size_t, std::string>& class_labels) {
  std::ostringstream o;
  o << "## Discussion\n" << rec.discussion << "\n\n";
  o << "## Recommended Solution\n" << rec.recommended_solution << "\n\n";
  o << "## Assessments\n";
  for (const auto& a : rec.per_realization_assessments) o << "- Realization " << a.index << ": " << a.text << "\n";
  o << "\n## Secondary Opinions\n";
  for (const auto& s : rec.secondary_opinions_noted) o << "- " << s << "\n";
  o << "\n## Equivalence Classes\n";
  for (const auto& [idx, label] : class_labels) o << "- Realization " << idx << ": " << label << "\n";
  return o.str();
}

ParsedCompare compare(std::span<const model::Realization> realizations, const AgentInstructions& instr,
                      ModelBackend& backend, const Sleeper& sleep, std::optional<std::string> extra_context) {
  if (instr.role != AgentRole::Compare) throw ValidationError("compare: instructions are not for the compare role");
  if (realizations.empty()) throw ValidationError("compare: no realizations");

  ChatRequest req;
  req.role = AgentRole::Compare;
  req.session_id = "compare";
  req.system_text = system_prompt(instr);
  req.user_text = build_compare_prompt(realizations);
  if (extra_context) req.user_text += *extra_context;
  req.realizations = realizations;

  auto [resp, attempts] = call_with_retry(backend, std::move(req), sleep);
  (void)attempts;
  if (trim(resp.text).empty()) throw BackendError("compare: empty backend response");
  return parse_compare_output(resp.text, realizations);
}

std::optional<std::vector<std::string>> class_labels(const model::Transcript& t) {
  std::vector<std::string> labels;
  for (const auto& r : t.realizations) {
    if (!r.class_label || r.class_label->empty()) return std::nullopt;
    labels.push_back(*r.class_label);
  }
  return labels;
}

namespace {

template <typename F>
auto in_stage(const char* stage, ErrorKind fallback, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e.kind(), e.what());
  } catch (const std::exception& e) {
    throw StageError(stage, fallback, e.what());
  }
}

}  // namespace

AgencyRun run_agency(const model::ProblemStatement& stmt, std::size_t n, ModelBackend& backend,
                     const InstructionPair& instructions, const AgencyOptions& options) {
  if (n < 1) throw StageError("setup", ErrorKind::Usage, "n must be at least 1");

  AgencyRun run;
  const auto prep =
      in_stage("preprocess", ErrorKind::Validation, [&] { return preprocess(stmt, instructions.solve); });

  auto batch = in_stage("solve", ErrorKind::Backend, [&] {
    return solve_n(prep, instructions.solve, backend, n, SolveOptions{options.allow_partial, options.sleep});
  });
  run.failures = std::move(batch.failures);
  run.warnings = std::move(batch.warnings);
  auto realizations = std::move(batch.realizations);

  std::optional<model::Recommendation> recommendation;
  if (realizations.size() >= 2 || options.force_compare) {
    auto parsed = in_stage("compare", ErrorKind::Backend, [&] {
      std::optional<std::string> extra;
      if (options.append_tally_to_compare) {
        std::vector<std::string> labels;
        for (const auto& r : realizations)
          if (r.class_label) labels.push_back(*r.class_label);
        if (labels.size() == realizations.size()) {
          const auto tally = consensus::make_tally(labels);
          std::ostringstream t;
          t << "Class tally over " << tally.total_n << " realizations:";
          for (const auto& [label, count] : tally.counts) t << " " << label << "=" << count;
          t << "; prevalent " << tally.prevalent << (tally.predominant ? " (predominant)" : "") << ".\n";
          extra = t.str();
        } else {
          run.warnings.push_back("tally not appended to compare prompt: realizations are unlabelled");
        }
      }
      return compare(realizations, instructions.compare, backend, options.sleep, extra);
    });
    for (auto& w : parsed.warnings) run.warnings.push_back(std::move(w));
    for (auto& r : realizations) {
      if (r.class_label) continue;
      if (auto it = parsed.class_labels.find(r.index); it != parsed.class_labels.end()) r.class_label = it->second;
    }
    recommendation = std::move(parsed.recommendation);
  }

  auto snapshot = backend.config().snapshot();
  snapshot["n_requested"] = std::to_string(n);
  snapshot["allow_partial"] = options.allow_partial ? "true" : "false";
  snapshot["compare_forced"] = options.force_compare ? "true" : "false";
  snapshot["tally_in_compare"] = options.append_tally_to_compare ? "true" : "false";
  if (!run.failures.empty()) snapshot["failed_realizations"] = std::to_string(run.failures.size());

  run.transcript = in_stage("compose", ErrorKind::Validation, [&] {
    return model::compose_transcript(stmt.id, std::move(realizations), std::move(recommendation),
                                     options.created_at.value_or(model::now_utc_iso8601()), std::move(snapshot));
  });

  if (options.out_dir)
    in_stage("persist", ErrorKind::Validation, [&] { io::persist_transcript(run.transcript, *options.out_dir); });
  return run;
}

}  // namespace agency::runtime
