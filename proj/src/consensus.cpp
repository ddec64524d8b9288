#include "agency/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace agency::consensus {

namespace {

bool is_probability(double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; }

}  // namespace

int Tally::prevalent_count() const {
  auto it = counts.find(prevalent);
  return it == counts.end() ? 0 : it->second;
}

void validate(const Tally& tally) {
  if (tally.total_n < 1) throw std::invalid_argument("tally: total_n must be positive");
  if (tally.counts.empty()) throw std::invalid_argument("tally: no classes");
  int sum = 0;
  int best = -1;
  ClassLabel best_label;
  for (const auto& [label, count] : tally.counts) {
    if (count < 0) throw std::invalid_argument("tally: negative count for '" + label + "'");
    sum += count;
    // std::map iterates in ascending label order, so strict > keeps the smallest label on ties.
    if (count > best) {
      best = count;
      best_label = label;
    }
  }
  if (sum != tally.total_n) throw std::invalid_argument("tally: counts do not sum to total_n");
  if (tally.prevalent != best_label) throw std::invalid_argument("tally: prevalent is not the modal class");
  if (tally.predominant != (2 * best > tally.total_n))
    throw std::invalid_argument("tally: predominant flag inconsistent with counts");
}

TwoClassModel::TwoClassModel(double p) : p_(p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("p must lie strictly inside (0, 1)");
}

ProfileSummary::ProfileSummary(std::vector<double> correct_probs, double p_star)
    : correct_probs_(std::move(correct_probs)), p_star_(p_star) {
  if (correct_probs_.empty()) throw std::invalid_argument("profile summary: need at least one correct class");
  if (!is_probability(p_star_)) throw std::invalid_argument("profile summary: p_star outside [0,1]");
  for (double pk : correct_probs_)
    if (!is_probability(pk)) throw std::invalid_argument("profile summary: correct-class probability outside [0,1]");
  if (std::abs(p_tot() + p_star_ - 1.0) > 1e-9)
    throw std::invalid_argument("profile summary: probabilities do not sum to 1");
}

double ProfileSummary::p_max() const { return *std::max_element(correct_probs_.begin(), correct_probs_.end()); }
double ProfileSummary::p_min() const { return *std::min_element(correct_probs_.begin(), correct_probs_.end()); }
double ProfileSummary::p_tot() const { return std::accumulate(correct_probs_.begin(), correct_probs_.end(), 0.0); }

std::string_view to_string(Regime regime) {
  switch (regime) {
    case Regime::CaseA: return "CaseA";
    case Regime::CaseB: return "CaseB";
    case Regime::CaseC: return "CaseC";
    case Regime::Mixed: return "Mixed";
  }
  return "Mixed";
}

double posterior_predominant(const TwoClassModel& model, int n, int m1) {
  if (n < 1) throw std::domain_error("n must be positive");
  if (m1 < 0 || m1 > n) throw std::domain_error("m1 must lie in [0, n]");
  const double p = model.p();
  // 1 - p is exact for p >= 1/2, which keeps p = 0.5 at exactly zero log-odds.
  const double log_odds = std::log(1.0 - p) - std::log(p);
  const double exponent = static_cast<double>(2 * m1 - n) * log_odds;
  if (exponent > 0.0) {
    const double e = std::exp(-exponent);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(exponent));
}

double bootstrap_estimate(const Tally& tally) {
  validate(tally);
  return static_cast<double>(tally.prevalent_count()) / static_cast<double>(tally.total_n);
}

Tally make_tally(std::span<const ClassLabel> labels) {
  if (labels.empty()) throw std::invalid_argument("make_tally: no labels");
  Tally tally;
  tally.total_n = static_cast<int>(labels.size());
  for (const auto& label : labels) {
    if (label.empty()) throw std::invalid_argument("make_tally: empty class label");
    ++tally.counts[label];
  }
  int best = -1;
  for (const auto& [label, count] : tally.counts) {
    if (count > best) {
      best = count;
      tally.prevalent = label;
    }
  }
  tally.predominant = 2 * best > tally.total_n;
  return tally;
}

Regime classify_regime(const ProfileSummary& profile) {
  if (profile.p_max() > 0.5) return Regime::CaseA;
  if (profile.p_min() > profile.p_star()) return Regime::CaseB;
  if (profile.p_max() <= profile.p_star()) return Regime::CaseC;
  return Regime::Mixed;
}

double ensemble_metric(std::span<const double> per_problem_estimates) {
  if (per_problem_estimates.empty()) throw std::invalid_argument("ensemble_metric: no estimates");
  double sum = 0.0;
  for (double x : per_problem_estimates) {
    if (!is_probability(x)) throw std::invalid_argument("ensemble_metric: estimate outside [0,1]");
    sum += x;
  }
  return sum / static_cast<double>(per_problem_estimates.size());
}

}  // namespace agency::consensus
