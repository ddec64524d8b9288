#pragma once

// Probabilistic consensus over N independent solve realizations.
//
// Everything here is a pure function of its arguments and safe to call
// concurrently.

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace agency::consensus {

using ClassLabel = std::string;

// Per-class counts over N realizations.
//
// `prevalent` is the modal class; among tied maxima the lexicographically
// smallest label wins. `predominant` holds iff the prevalent count is
// strictly greater than N/2.
struct Tally {
  int total_n = 0;
  std::map<ClassLabel, int> counts;
  ClassLabel prevalent;
  bool predominant = false;

  int prevalent_count() const;
  friend bool operator==(const Tally&, const Tally&) = default;
};

// Throws std::invalid_argument if the tally breaks any of its invariants.
void validate(const Tally& tally);

// Per-solve success probability of the single Correct class, strictly inside (0, 1).
class TwoClassModel {
 public:
  explicit TwoClassModel(double p);
  double p() const noexcept { return p_; }

 private:
  double p_;
};

// Correct-class probabilities p_1..p_K plus the aggregate Incorrect mass p*.
class ProfileSummary {
 public:
  // Throws std::invalid_argument unless every probability is in [0,1],
  // K >= 1, and sum(correct_probs) + p_star == 1 within 1e-9.
  ProfileSummary(std::vector<double> correct_probs, double p_star);

  const std::vector<double>& correct_probs() const noexcept { return correct_probs_; }
  double p_star() const noexcept { return p_star_; }
  double p_max() const;
  double p_min() const;
  double p_tot() const;

 private:
  std::vector<double> correct_probs_;
  double p_star_;
};

enum class Regime {
  CaseA,  // p_max > 1/2
  CaseB,  // p_max <= 1/2 and p_min > p*
  CaseC,  // p_max <= p*
  Mixed,  // none of the above
};

std::string_view to_string(Regime regime);

// Probability that the class holding m1 of n realizations is the Correct one,
// given two classes and per-solve success probability p:
//   1 / (1 + ((1-p)/p)^(2*m1 - n))
// Evaluated as a logistic of the log-space exponent so large n cannot overflow.
// Throws std::domain_error if m1 is outside [0, n] or n < 1.
double posterior_predominant(const TwoClassModel& model, int n, int m1);

// p-hat = M1 / N, the prevalent count over the total.
//
// Only meaningful when the true p exceeds 1/2; for harder problems the
// prevalent class may be an Incorrect one and the estimate is then biased.
double bootstrap_estimate(const Tally& tally);

// Throws std::invalid_argument on empty input or an empty label.
Tally make_tally(std::span<const ClassLabel> labels);

Regime classify_regime(const ProfileSummary& profile);

// Unweighted mean of per-problem estimates. Throws std::invalid_argument on
// empty input or any value outside [0,1].
double ensemble_metric(std::span<const double> per_problem_estimates);

}  // namespace agency::consensus
