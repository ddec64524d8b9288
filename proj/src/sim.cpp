#include "agency/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

#include "agency/error.hpp"
#include "agency/runtime.hpp"
#include "agency/serialization.hpp"

namespace agency::sim {

using nlohmann::json;

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void ProblemProfile::validate() const {
  if (classes.empty()) throw ValidationError("profile '" + problem_id + "': no classes");
  std::set<std::string> labels;
  double sum = 0.0;
  bool any_correct = false;
  for (const auto& c : classes) {
    if (c.label.empty()) throw ValidationError("profile '" + problem_id + "': empty class label");
    if (!labels.insert(c.label).second)
      throw ValidationError("profile '" + problem_id + "': duplicate class label '" + c.label + "'");
    if (!(c.prob >= 0.0 && c.prob <= 1.0))
      throw ValidationError("profile '" + problem_id + "': probability of '" + c.label + "' outside [0,1]");
    sum += c.prob;
    any_correct = any_correct || c.correct;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("profile '" + problem_id + "': probabilities do not sum to 1");
  if (!any_correct) throw ValidationError("profile '" + problem_id + "': no correct class");
}

consensus::ProfileSummary ProblemProfile::summary() const {
  validate();
  std::vector<double> correct;
  double p_star = 0.0;
  for (const auto& c : classes) {
    if (c.correct)
      correct.push_back(c.prob);
    else
      p_star += c.prob;
  }
  return consensus::ProfileSummary(std::move(correct), p_star);
}

const ProfileClass* ProblemProfile::find(std::string_view label) const {
  auto it = std::find_if(classes.begin(), classes.end(), [&](const ProfileClass& c) { return c.label == label; });
  return it == classes.end() ? nullptr : &*it;
}

void to_json(json& j, const ProfileClass& c) {
  j = json{{"label", c.label},
           {"correct", c.correct},
           {"prob", c.prob},
           {"canonical_answer_text", c.canonical_answer_text},
           {"recognizable", c.recognizable}};
}

void from_json(const json& j, ProfileClass& c) {
  j.at("label").get_to(c.label);
  j.at("correct").get_to(c.correct);
  j.at("prob").get_to(c.prob);
  c.canonical_answer_text = j.value("canonical_answer_text", "");
  c.recognizable = j.value("recognizable", false);
}

void to_json(json& j, const ProblemProfile& p) {
  j = json{{"problem_id", p.problem_id}, {"classes", p.classes}, {"seed", p.seed}};
}

void from_json(const json& j, ProblemProfile& p) {
  j.at("problem_id").get_to(p.problem_id);
  j.at("classes").get_to(p.classes);
  p.seed = j.value("seed", std::uint64_t{0});
}

ProblemProfile load_profile(const std::filesystem::path& path) {
  auto profile = io::parse<ProblemProfile>(io::read_file(path), path.string());
  profile.validate();
  return profile;
}

ProblemProfile two_class_profile(std::string problem_id, double p, std::uint64_t seed) {
  ProblemProfile profile;
  profile.problem_id = std::move(problem_id);
  profile.classes = {{"correct", true, p, "The correct answer.", false},
                     {"incorrect", false, 1.0 - p, "An incorrect answer.", false}};
  profile.seed = seed;
  return profile;
}

std::string SimReport::summary_line() const {
  std::ostringstream s;
  s << description << ": empirical " << std::setprecision(6) << empirical_value << " vs reference "
    << reference_value << " (|err| " << std::setprecision(3) << abs_error << (pass ? " <= " : " > ") << "tol "
    << tolerance << ", kept " << kept << "/" << trials << ") " << (pass ? "PASS" : "FAIL");
  return s.str();
}

void to_json(json& j, const SimReport& r) {
  j = json{{"description", r.description},     {"trials", r.trials},
           {"kept", r.kept},                   {"empirical_value", r.empirical_value},
           {"reference_value", r.reference_value}, {"abs_error", r.abs_error},
           {"tolerance", r.tolerance},         {"pass", r.pass}};
}

std::size_t draw_class(const ProblemProfile& profile, Rng& rng) {
  const double u = rng.uniform();
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < profile.classes.size(); ++i) {
    const double p = profile.classes[i].prob;
    if (p <= 0.0) continue;
    last_positive = i;
    cumulative += p;
    if (u < cumulative) return i;
  }
  // Rounding can leave the cumulative sum a hair under 1.
  return last_positive;
}

model::Realization sample_realization(const ProblemProfile& profile, std::size_t index, Rng& rng) {
  const auto& cls = profile.classes[draw_class(profile, rng)];
  model::Realization r;
  r.index = index;
  r.raw_output = cls.canonical_answer_text.empty() ? "Answer: " + cls.label : cls.canonical_answer_text;
  r.class_label = cls.label;
  return r;
}

model::Realization sample_realization(const ProblemProfile& profile, std::size_t index) {
  Rng rng(profile.seed, index);
  return sample_realization(profile, index, rng);
}

SimulatedCompare simulated_compare(std::span<const model::Realization> realizations, const ProblemProfile& profile,
                                   CompareMode mode) {
  if (realizations.empty()) throw ValidationError("simulated_compare: no realizations");
  std::vector<std::string> labels;
  labels.reserve(realizations.size());
  for (const auto& r : realizations) labels.push_back(r.class_label.value_or("(unlabelled)"));
  const auto tally = consensus::make_tally(labels);

  std::string chosen = tally.prevalent;
  bool recognized = false;
  if (mode == CompareMode::Recognition) {
    int best = 0;
    for (const auto& [label, count] : tally.counts) {
      const auto* cls = profile.find(label);
      if (cls && cls->correct && cls->recognizable && count > best) {
        best = count;
        chosen = label;
      }
    }
    recognized = best > 0 && chosen != tally.prevalent;
  }

  auto canonical = [&](const std::string& label) {
    if (const auto* cls = profile.find(label); cls && !cls->canonical_answer_text.empty())
      return cls->canonical_answer_text;
    for (std::size_t i = 0; i < realizations.size(); ++i)
      if (labels[i] == label) return realizations[i].raw_output;
    return label;
  };

  SimulatedCompare out;
  out.recommended_label = chosen;
  auto& rec = out.recommendation;
  rec.recommended_solution = canonical(chosen);

  std::ostringstream d;
  d << "Tally over " << tally.total_n << " realizations:";
  for (const auto& [label, count] : tally.counts) d << " " << label << "=" << count;
  d << ". Prevalent class " << tally.prevalent << (tally.predominant ? " is predominant." : " is not predominant.");
  if (recognized) d << " Class " << chosen << " is recognized as correct and recommended over the prevalent class.";
  rec.discussion = d.str();

  for (std::size_t i = 0; i < realizations.size(); ++i) {
    const auto& label = labels[i];
    rec.per_realization_assessments.push_back(
        {realizations[i].index, label == chosen ? "Agrees with the recommended solution (class " + label + ")."
                                                : "Differs from the recommended solution: class " + label + "."});
  }
  for (const auto& [label, count] : tally.counts) {
    if (label == chosen) continue;
    rec.secondary_opinions_noted.push_back("Class " + label + " (" + std::to_string(count) + " of " +
                                           std::to_string(tally.total_n) + ")");
  }
  return out;
}

namespace {

constexpr std::uint64_t kChunkTrials = 1u << 14;

struct ChunkCounts {
  std::uint64_t kept = 0;
  std::uint64_t hits = 0;
};

// Splits `trials` into fixed-size chunks, each with its own derived stream,
// so the merged counts are independent of how many threads ran them.
template <typename TrialFn>
ChunkCounts run_chunked(std::uint64_t trials, std::uint64_t seed, unsigned threads, TrialFn trial) {
  const std::uint64_t chunks = (trials + kChunkTrials - 1) / kChunkTrials;
  std::vector<ChunkCounts> per_chunk(chunks);
  std::atomic<std::uint64_t> next{0};
  auto worker = [&] {
    for (;;) {
      const auto c = next.fetch_add(1);
      if (c >= chunks) return;
      Rng rng(seed, c);
      const auto begin = c * kChunkTrials;
      const auto end = std::min(trials, begin + kChunkTrials);
      ChunkCounts counts;
      for (auto t = begin; t < end; ++t) trial(rng, counts);
      per_chunk[c] = counts;
    }
  };
  const auto workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::uint64_t>(chunks, 1))));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  ChunkCounts total;
  for (const auto& c : per_chunk) {
    total.kept += c.kept;
    total.hits += c.hits;
  }
  return total;
}

SimReport finish(std::string description, std::uint64_t trials, const ChunkCounts& counts, double reference,
                 double tolerance) {
  SimReport r;
  r.description = std::move(description);
  r.trials = trials;
  r.kept = counts.kept;
  r.empirical_value = static_cast<double>(counts.hits) / static_cast<double>(counts.kept);
  r.reference_value = reference;
  r.abs_error = std::abs(r.empirical_value - r.reference_value);
  r.tolerance = tolerance;
  r.pass = r.abs_error <= r.tolerance;
  return r;
}

}  // namespace

SimReport monte_carlo_posterior(double p, int n, int m1, std::uint64_t trials, std::uint64_t seed,
                                const MonteCarloOptions& options) {
  if (trials < 1) throw std::invalid_argument("monte_carlo_posterior: trials must be at least 1");
  const double reference = consensus::posterior_predominant(consensus::TwoClassModel(p), n, m1);

  const auto counts = run_chunked(trials, seed, options.threads, [&](Rng& rng, ChunkCounts& c) {
    const bool class1_correct = (rng.next() >> 63) != 0;
    int correct = 0;
    for (int i = 0; i < n; ++i) correct += rng.bernoulli(p) ? 1 : 0;
    const int class1 = class1_correct ? correct : n - correct;
    if (class1 != m1) return;
    ++c.kept;
    if (class1_correct) ++c.hits;
  });
  if (counts.kept == 0)
    throw InconclusiveError("monte_carlo_posterior: no trial produced m1 = " + std::to_string(m1) + " of n = " +
                            std::to_string(n) + " in " + std::to_string(trials) + " trials; increase --trials");

  const double v = reference * (1.0 - reference);
  const double tolerance = options.tolerance.value_or(4.0 * std::sqrt(v / static_cast<double>(counts.kept)));
  std::ostringstream d;
  d << "posterior p=" << p << " n=" << n << " m1=" << m1;
  return finish(d.str(), trials, counts, reference, tolerance);
}

double majority_probability(double p, int n) {
  if (n < 1) throw std::domain_error("majority_probability: n must be positive");
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("majority_probability: p outside [0,1]");
  if (p == 0.0) return 0.0;
  if (p == 1.0) return 1.0;
  const double log_p = std::log(p);
  const double log_q = std::log1p(-p);
  double total = 0.0;
  for (int k = n / 2 + 1; k <= n; ++k) {
    const double log_choose = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
    total += std::exp(log_choose + k * log_p + (n - k) * log_q);
  }
  return std::min(total, 1.0);
}

SimReport verify_condorcet(const ProblemProfile& profile, int n, std::uint64_t trials, std::uint64_t seed,
                           const MonteCarloOptions& options) {
  profile.validate();
  if (profile.classes.size() != 2) throw ValidationError("verify_condorcet: profile must have exactly two classes");
  const auto correct_it =
      std::find_if(profile.classes.begin(), profile.classes.end(), [](const ProfileClass& c) { return c.correct; });
  if (std::count_if(profile.classes.begin(), profile.classes.end(), [](const ProfileClass& c) { return c.correct; }) != 1)
    throw ValidationError("verify_condorcet: profile must have exactly one correct class");
  const double p = correct_it->prob;
  if (!(p > 0.5)) throw ValidationError("verify_condorcet: correct-class probability must exceed 1/2");
  if (n < 1) throw std::invalid_argument("verify_condorcet: n must be at least 1");
  if (trials < 1) throw std::invalid_argument("verify_condorcet: trials must be at least 1");
  const auto correct_index = static_cast<std::size_t>(correct_it - profile.classes.begin());

  const auto counts = run_chunked(trials, seed, options.threads, [&](Rng& rng, ChunkCounts& c) {
    int correct = 0;
    for (int i = 0; i < n; ++i) correct += draw_class(profile, rng) == correct_index ? 1 : 0;
    ++c.kept;
    if (2 * correct > n) ++c.hits;
  });

  std::ostringstream d;
  d << "condorcet p=" << p << " n=" << n;
  return finish(d.str(), trials, counts, majority_probability(p, n), options.tolerance.value_or(0.01));
}

SimulatedBackend::SimulatedBackend(runtime::BackendConfig config, ProblemProfile profile, CompareMode mode)
    : ModelBackend(std::move(config)), profile_(std::move(profile)), mode_(mode) {
  profile_.validate();
}

runtime::ChatResponse SimulatedBackend::complete(const runtime::ChatRequest& request) {
  runtime::ChatResponse resp;
  resp.metadata["model_id"] = config().model_id;
  if (request.role == runtime::AgentRole::Solve) {
    auto r = sample_realization(profile_, request.index);
    resp.text = std::move(r.raw_output);
    resp.class_label = std::move(r.class_label);
    resp.metadata["completion_tokens"] = std::to_string(resp.text.size() / 4);
    return resp;
  }
  auto sc = simulated_compare(request.realizations, profile_, mode_);
  std::map<std::size_t, std::string> labels;
  for (const auto& r : request.realizations)
    if (r.class_label) labels[r.index] = *r.class_label;
  resp.text = runtime::format_compare_output(sc.recommendation, labels);
  return resp;
}

}  // namespace agency::sim
