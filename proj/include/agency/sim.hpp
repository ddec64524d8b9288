#pragma once

// Simulated ground truth: a categorical model of solve outcomes, a simulated
// Compare agent, and Monte Carlo checks of the consensus formulas.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "agency/backend.hpp"
#include "agency/consensus.hpp"
#include "agency/problem_model.hpp"

namespace agency::sim {

// SplitMix64 finalizer applied to (seed, stream); used to give every
// (seed, realization index) and every Monte Carlo chunk its own stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// mt19937_64 has a standard-mandated output sequence, and the conversions
// below use no std distributions, so streams are identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, std::uint64_t stream) : engine_(derive_seed(seed, stream)) {}

  std::uint64_t next() { return engine_(); }
  // 53 random bits mapped onto [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

struct ProfileClass {
  std::string label;
  bool correct = false;
  double prob = 0.0;
  std::string canonical_answer_text;
  bool recognizable = false;

  friend bool operator==(const ProfileClass&, const ProfileClass&) = default;
};

struct ProblemProfile {
  std::string problem_id;
  std::vector<ProfileClass> classes;
  std::uint64_t seed = 0;

  // Throws ValidationError unless: at least one class, unique non-empty labels,
  // probabilities in [0,1] summing to 1 within 1e-9, and at least one correct class.
  void validate() const;
  consensus::ProfileSummary summary() const;
  const ProfileClass* find(std::string_view label) const;

  friend bool operator==(const ProblemProfile&, const ProblemProfile&) = default;
};

void to_json(nlohmann::json& j, const ProfileClass& c);
void from_json(const nlohmann::json& j, ProfileClass& c);
void to_json(nlohmann::json& j, const ProblemProfile& p);
void from_json(const nlohmann::json& j, ProblemProfile& p);

ProblemProfile load_profile(const std::filesystem::path& path);

// Two classes: "correct" with probability p and "incorrect" with 1 - p.
ProblemProfile two_class_profile(std::string problem_id, double p, std::uint64_t seed);

struct SimReport {
  std::string description;
  std::uint64_t trials = 0;
  std::uint64_t kept = 0;  // trials contributing to the estimate
  double empirical_value = 0.0;
  double reference_value = 0.0;
  double abs_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;

  std::string summary_line() const;
};

void to_json(nlohmann::json& j, const SimReport& r);

// Index of the class drawn from the profile's categorical distribution.
std::size_t draw_class(const ProblemProfile& profile, Rng& rng);

// A realization whose class is drawn with `rng`; raw_output is the class's
// canonical answer text.
model::Realization sample_realization(const ProblemProfile& profile, std::size_t index, Rng& rng);
// Same, with the stream derived from (profile.seed, index).
model::Realization sample_realization(const ProblemProfile& profile, std::size_t index);

enum class CompareMode {
  Default,      // recommend the prevalent class
  Recognition,  // prefer any present class that is recognizable and correct
};

struct SimulatedCompare {
  model::Recommendation recommendation;
  std::string recommended_label;
};

// Deterministic stand-in for Agent Compare. Recognition mode is a deliberately
// crude model of a reviewer spotting a lone correct answer among wrong ones.
SimulatedCompare simulated_compare(std::span<const model::Realization> realizations, const ProblemProfile& profile,
                                   CompareMode mode = CompareMode::Default);

struct MonteCarloOptions {
  unsigned threads = 1;
  std::optional<double> tolerance;  // overrides the default rule
};

// Rejection-sampled estimate of the posterior: each trial draws which of two
// classes is Correct (uniformly), draws n solves with success probability p,
// and is kept when class 1 collects exactly m1 of them. Default tolerance is
// 4*sqrt(v/k), v = ref*(1-ref), k = kept trials. Throws InconclusiveError when
// no trial is kept. The result does not depend on `threads`.
SimReport monte_carlo_posterior(double p, int n, int m1, std::uint64_t trials, std::uint64_t seed,
                                const MonteCarloOptions& options = {});

// P(Binomial(n, p) > n/2), summed term by term.
double majority_probability(double p, int n);

// Fraction of trials in which the Correct class of a two-class profile is
// predominant among n draws, against majority_probability. Default tolerance 0.01.
SimReport verify_condorcet(const ProblemProfile& profile, int n, std::uint64_t trials, std::uint64_t seed,
                           const MonteCarloOptions& options = {});

// ModelBackend that answers Solve requests with sample_realization and Compare
// requests with simulated_compare.
class SimulatedBackend final : public runtime::ModelBackend {
 public:
  SimulatedBackend(runtime::BackendConfig config, ProblemProfile profile, CompareMode mode = CompareMode::Default);

  runtime::ChatResponse complete(const runtime::ChatRequest& request) override;
  const ProblemProfile& profile() const noexcept { return profile_; }

 private:
  ProblemProfile profile_;
  CompareMode mode_;
};

}  // namespace agency::sim
