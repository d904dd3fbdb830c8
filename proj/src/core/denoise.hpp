#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/matrix.hpp"
#include "core/rng.hpp"

namespace cdt {

// Gaussian mixture problem: m samples in dimension d drawn from C clusters
// with unit-norm centers whose pairwise distances lie in [r_lower, r_upper];
// per-coordinate noise variance is sigma^2 / d.
struct GmmSpec {
  std::size_t dim = 512;       // d
  std::size_t samples = 512;   // m
  std::size_t clusters = 4;    // C
  double sigma = 0.05;
  double r_lower = 1.2;
  double r_upper = 1.6;
  double delta = 0.05;          // failure probability budget
  std::size_t k_neighbors = 84;  // K for the kNN-average case
  double lambda = 1.0;           // inverse temperature for the softmax case
  double k_constant = 1.0;       // the abstract constant in the K condition
  std::size_t center_retry_cap = 100000;

  void validate() const;
};

struct GmmInstance {
  Matrix centers;               // C x d (unit rows)
  Matrix samples;               // m x d
  std::vector<int> assignment;  // m entries, each < C
};

// C unit vectors with all pairwise distances inside [r_lower, r_upper],
// found by rejection sampling; exceeding the retry cap raises an
// infeasibility error carrying the bounds.
Matrix sample_centers(const GmmSpec& spec, Rng& rng);

// Balanced assignment (counts differ by at most one); samples are
// center + N(0, sigma^2/d I).
GmmInstance sample_instance(const GmmSpec& spec, const Matrix& centers,
                            Rng& rng);

// Mean of the k nearest samples to each sample (self included); distance
// ties resolve to the lower index.
Matrix knn_average(const GmmInstance& inst, std::size_t k);

// x'_i = sum_j exp(lambda <x_j, x_i>) x_j / sum_j exp(lambda <x_j, x_i>),
// row-stabilized before exponentiation.
Matrix softmax_smooth(const GmmInstance& inst, double lambda);

struct ConditionTrace {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  std::string relation;  // "<=" or ">="
  bool satisfied = false;
};

struct TrialStats {
  bool event_failed = false;   // the theorem's per-instance event missed
  double mean_residual_before = 0.0;
  double mean_residual_after = 0.0;
  double max_residual_before = 0.0;
  double max_residual_after = 0.0;
};

struct TheoremReport {
  std::string theorem;
  bool conditions_met = false;
  std::vector<ConditionTrace> conditions;
  std::size_t trials = 0;
  std::size_t failures = 0;
  double failure_rate = 0.0;
  double probability_budget = 0.0;  // 3*delta or 4*delta
  double wilson_lower = 0.0;        // 95% lower bound on the failure rate
  double wilson_upper = 0.0;
  bool asserted = false;  // assertion evaluated (conditions were met)
  bool passed = false;    // wilson_lower <= budget
  double mean_ratio = 0.0;  // mean over trials of mean|x'-u| / mean|x-u|
  std::vector<TrialStats> per_trial;
};

// Exact printed preconditions; natural logarithms throughout, matching the
// exponential concentration bounds they come from.
std::vector<ConditionTrace> theorem1_conditions(const GmmSpec& spec);
std::vector<ConditionTrace> theorem2_conditions(const GmmSpec& spec);

// Monte-Carlo verification. Trials use seeds derived from the trial index,
// so any thread count produces the identical report; threads = 0 picks the
// hardware count.
TheoremReport verify_theorem1(const GmmSpec& spec, std::size_t trials,
                              const Rng& rng, std::size_t threads = 0);
TheoremReport verify_theorem2(const GmmSpec& spec, std::size_t trials,
                              const Rng& rng, std::size_t threads = 0);

struct SweepPoint {
  double parameter = 0.0;    // K or lambda
  double mean_ratio = 0.0;   // max-residual ratio, averaged over trials
  double event_rate = 0.0;   // fraction of trials where the event held
};

std::vector<SweepPoint> sweep_k(const GmmSpec& spec,
                                const std::vector<std::size_t>& ks,
                                std::size_t trials, const Rng& rng);
std::vector<SweepPoint> sweep_lambda(const GmmSpec& spec,
                                     const std::vector<double>& lambdas,
                                     std::size_t trials, const Rng& rng);

// One-sided 95% Wilson score bounds for k successes out of n.
double wilson_lower(std::size_t k, std::size_t n, double z = 1.959963984540054);
double wilson_upper(std::size_t k, std::size_t n, double z = 1.959963984540054);

std::string report_to_json(const TheoremReport& report);
void save_report_json(const TheoremReport& report, const std::string& path);
void save_sweep_csv(const std::vector<SweepPoint>& points,
                    const std::string& parameter_name,
                    const std::string& path);

}  // namespace cdt
