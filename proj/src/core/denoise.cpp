#include "core/denoise.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <thread>

#include "core/csv.hpp"
#include "core/error.hpp"

#include <nlohmann/json.hpp>

namespace cdt {

void GmmSpec::validate() const {
  if (dim == 0 || samples == 0 || clusters == 0 || k_neighbors == 0) {
    fail(ErrorCode::bad_config, "GmmSpec: d, m, C and K must be >= 1");
  }
  if (sigma <= 0.0) {
    fail(ErrorCode::bad_config, "GmmSpec: sigma must be > 0");
  }
  if (r_lower < 0.0 || r_upper < r_lower) {
    fail(ErrorCode::bad_config, "GmmSpec: need 0 <= r_lower <= r_upper");
  }
  if (delta <= 0.0 || delta >= 1.0) {
    fail(ErrorCode::bad_config, "GmmSpec: delta must be in (0, 1)");
  }
  if (lambda < 0.0) {
    fail(ErrorCode::bad_config, "GmmSpec: lambda must be >= 0");
  }
}

Matrix sample_centers(const GmmSpec& spec, Rng& rng) {
  spec.validate();
  const std::size_t c = spec.clusters, d = spec.dim;
  // Unit vectors need r_upper >= some attainable distance; rejection
  // handles the geometry, the cap converts stalls into diagnostics.
  Matrix centers(c, d);
  std::vector<double> v(d);
  for (std::size_t k = 0; k < c; ++k) {
    std::size_t attempts = 0;
    for (;;) {
      if (++attempts > spec.center_retry_cap) {
        fail(ErrorCode::bad_state,
             "sample_centers: no placement for center " + std::to_string(k) +
                 " within " + std::to_string(spec.center_retry_cap) +
                 " attempts; bounds [" + std::to_string(spec.r_lower) + ", " +
                 std::to_string(spec.r_upper) + "] look infeasible for C=" +
                 std::to_string(c) + ", d=" + std::to_string(d));
      }
      double norm2 = 0.0;
      for (double& x : v) {
        x = rng.gaussian();
        norm2 += x * x;
      }
      if (norm2 <= 0.0) continue;
      const double inv = 1.0 / std::sqrt(norm2);
      for (double& x : v) x *= inv;

      bool ok = true;
      for (std::size_t j = 0; j < k && ok; ++j) {
        double dist2 = 0.0;
        for (std::size_t t = 0; t < d; ++t) {
          const double diff = centers(j, t) - v[t];
          dist2 += diff * diff;
        }
        const double dist = std::sqrt(dist2);
        ok = dist >= spec.r_lower && dist <= spec.r_upper;
      }
      if (ok) {
        for (std::size_t t = 0; t < d; ++t) centers(k, t) = v[t];
        break;
      }
    }
  }
  return centers;
}

GmmInstance sample_instance(const GmmSpec& spec, const Matrix& centers,
                            Rng& rng) {
  spec.validate();
  if (centers.rows() != spec.clusters || centers.cols() != spec.dim) {
    fail(ErrorCode::dimension_mismatch,
         "sample_instance: centers " + centers.shape_str() + ", expected " +
             std::to_string(spec.clusters) + "x" + std::to_string(spec.dim));
  }
  GmmInstance inst;
  inst.centers = centers;
  inst.samples = Matrix(spec.samples, spec.dim);
  inst.assignment.resize(spec.samples);
  const double coord_std =
      spec.sigma / std::sqrt(static_cast<double>(spec.dim));
  for (std::size_t i = 0; i < spec.samples; ++i) {
    const std::size_t k = i % spec.clusters;  // balanced up to remainder
    inst.assignment[i] = static_cast<int>(k);
    double* row = inst.samples.data() + i * spec.dim;
    rng.fill_gaussian(row, spec.dim, coord_std);
    const double* center = centers.data() + k * spec.dim;
    for (std::size_t t = 0; t < spec.dim; ++t) row[t] += center[t];
  }
  return inst;
}

Matrix knn_average(const GmmInstance& inst, std::size_t k) {
  const std::size_t m = inst.samples.rows();
  const std::size_t d = inst.samples.cols();
  if (k == 0 || k > m) {
    fail(ErrorCode::invalid_argument,
         "knn_average: K=" + std::to_string(k) + " outside [1, " +
             std::to_string(m) + "]");
  }
  // Squared distances via the Gram matrix: |a-b|^2 = |a|^2 + |b|^2 - 2<a,b>.
  const Matrix gram = matmul_nt(inst.samples, inst.samples);
  std::vector<double> sq(m);
  for (std::size_t i = 0; i < m; ++i) sq[i] = gram(i, i);

  Matrix out(m, d);
  std::vector<std::pair<double, std::size_t>> dist(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      dist[j] = {sq[i] + sq[j] - 2.0 * gram(i, j), j};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<long>(k),
                      dist.end());
    const double inv = 1.0 / static_cast<double>(k);
    double* row = out.data() + i * d;
    for (std::size_t n = 0; n < k; ++n) {
      const double* src = inst.samples.data() + dist[n].second * d;
      for (std::size_t t = 0; t < d; ++t) row[t] += src[t];
    }
    for (std::size_t t = 0; t < d; ++t) row[t] *= inv;
  }
  return out;
}

Matrix softmax_smooth(const GmmInstance& inst, double lambda) {
  if (lambda < 0.0) {
    fail(ErrorCode::invalid_argument, "softmax_smooth: lambda must be >= 0");
  }
  const std::size_t m = inst.samples.rows();
  const std::size_t d = inst.samples.cols();
  const Matrix gram = matmul_nt(inst.samples, inst.samples);

  Matrix out(m, d);
  std::vector<double> w(m);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -1e300;
    for (std::size_t j = 0; j < m; ++j) mx = std::max(mx, lambda * gram(i, j));
    double denom = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      w[j] = std::exp(lambda * gram(i, j) - mx);
      denom += w[j];
    }
    double* row = out.data() + i * d;
    for (std::size_t j = 0; j < m; ++j) {
      const double wj = w[j] / denom;
      const double* src = inst.samples.data() + j * d;
      for (std::size_t t = 0; t < d; ++t) row[t] += wj * src[t];
    }
  }
  return out;
}

namespace {

std::vector<double> residual_norms(const Matrix& points,
                                   const GmmInstance& inst) {
  const std::size_t m = points.rows(), d = points.cols();
  std::vector<double> norms(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = points.data() + i * d;
    const double* center =
        inst.centers.data() +
        static_cast<std::size_t>(inst.assignment[i]) * d;
    double s = 0.0;
    for (std::size_t t = 0; t < d; ++t) {
      const double diff = row[t] - center[t];
      s += diff * diff;
    }
    norms[i] = std::sqrt(s);
  }
  return norms;
}

ConditionTrace make_cond(std::string name, double lhs,
                         const std::string& relation, double rhs) {
  ConditionTrace t;
  t.name = std::move(name);
  t.lhs = lhs;
  t.rhs = rhs;
  t.relation = relation;
  t.satisfied = relation == "<=" ? lhs <= rhs : lhs >= rhs;
  return t;
}

std::size_t min_cluster_count(const GmmSpec& spec) {
  // Balanced assignment: the smallest cluster gets floor(m / C).
  return spec.samples / spec.clusters;
}

}  // namespace

std::vector<ConditionTrace> theorem1_conditions(const GmmSpec& spec) {
  const double m = static_cast<double>(spec.samples);
  const double log_md = std::log(m / spec.delta);
  const double gap = spec.r_lower - 2.0 * spec.sigma;
  const double dim_factor =
      gap > 0.0 ? std::max(8.0, 2.0 * spec.sigma * spec.sigma / (gap * gap))
                : std::numeric_limits<double>::infinity();
  std::vector<ConditionTrace> out;
  out.push_back(make_cond("d >= max(8, 2*sigma^2/(r_lower-2*sigma)^2)*log(m/delta)",
                          static_cast<double>(spec.dim), ">=",
                          dim_factor * log_md));
  out.push_back(make_cond("K >= max(C_const, 9*log(m/delta))",
                          static_cast<double>(spec.k_neighbors), ">=",
                          std::max(spec.k_constant, 9.0 * log_md)));
  return out;
}

std::vector<ConditionTrace> theorem2_conditions(const GmmSpec& spec) {
  const double m = static_cast<double>(spec.samples);
  const double d = static_cast<double>(spec.dim);
  const double m_i = static_cast<double>(min_cluster_count(spec));
  std::vector<ConditionTrace> out;
  out.push_back(make_cond("sigma <= 1", spec.sigma, "<=", 1.0));
  out.push_back(make_cond(
      "20*lambda*sqrt(log(2m/(delta*sigma))/d) <= 1/4",
      20.0 * spec.lambda *
          std::sqrt(std::log(2.0 * m / (spec.delta * spec.sigma)) / d),
      "<=", 0.25));
  out.push_back(make_cond("(6m/m_i)*exp(-lambda/2) <= sigma/4",
                          6.0 * m / m_i * std::exp(-spec.lambda / 2.0), "<=",
                          spec.sigma / 4.0));
  out.push_back(make_cond("|sqrt(2) - r_lower| <= 1/2",
                          std::fabs(std::sqrt(2.0) - spec.r_lower), "<=",
                          0.5));
  out.push_back(make_cond(
      "log(m/(2*delta*sigma^2)) <= d",
      std::log(m / (2.0 * spec.delta * spec.sigma * spec.sigma)), "<=", d));
  return out;
}

double wilson_lower(std::size_t k, std::size_t n, double z) {
  if (n == 0) return 0.0;
  const double p = static_cast<double>(k) / static_cast<double>(n);
  const double z2 = z * z, nn = static_cast<double>(n);
  const double denom = 1.0 + z2 / nn;
  const double center = p + z2 / (2.0 * nn);
  const double spread =
      z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
  return std::max(0.0, (center - spread) / denom);
}

double wilson_upper(std::size_t k, std::size_t n, double z) {
  if (n == 0) return 1.0;
  const double p = static_cast<double>(k) / static_cast<double>(n);
  const double z2 = z * z, nn = static_cast<double>(n);
  const double denom = 1.0 + z2 / nn;
  const double center = p + z2 / (2.0 * nn);
  const double spread =
      z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
  return std::min(1.0, (center + spread) / denom);
}

namespace {

// Shared Monte-Carlo driver: run `trials` independent instances, smoothing
// each with `smooth` and judging the event with `event_failed`.
template <class Smooth, class Failed>
TheoremReport run_trials(const GmmSpec& spec, std::size_t trials,
                         const Rng& rng, std::size_t threads,
                         const Smooth& smooth, const Failed& event_failed) {
  TheoremReport report;
  report.trials = trials;
  report.per_trial.resize(trials);

  if (threads == 0) {
    threads = std::max(1u, std::thread::hardware_concurrency());
  }
  threads = std::min<std::size_t>(threads, std::max<std::size_t>(trials, 1));

  auto run_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t t = lo; t < hi; ++t) {
      Rng trial_rng = rng.derive(0x7472690000ull + t);
      const Matrix centers = sample_centers(spec, trial_rng);
      const GmmInstance inst = sample_instance(spec, centers, trial_rng);
      const Matrix smoothed = smooth(inst, trial_rng);
      const std::vector<double> before = residual_norms(inst.samples, inst);
      const std::vector<double> after = residual_norms(smoothed, inst);

      TrialStats& stats = report.per_trial[t];
      stats.event_failed = event_failed(before, after);
      const double m = static_cast<double>(before.size());
      stats.mean_residual_before =
          std::accumulate(before.begin(), before.end(), 0.0) / m;
      stats.mean_residual_after =
          std::accumulate(after.begin(), after.end(), 0.0) / m;
      stats.max_residual_before =
          *std::max_element(before.begin(), before.end());
      stats.max_residual_after =
          *std::max_element(after.begin(), after.end());
    }
  };

  if (threads <= 1 || trials <= 1) {
    run_range(0, trials);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (trials + threads - 1) / threads;
    for (std::size_t w = 0; w < threads; ++w) {
      const std::size_t lo = w * chunk;
      const std::size_t hi = std::min(trials, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back(run_range, lo, hi);
    }
    for (std::thread& th : pool) th.join();
  }

  double ratio_sum = 0.0;
  for (const TrialStats& s : report.per_trial) {
    report.failures += s.event_failed ? 1 : 0;
    ratio_sum += s.mean_residual_before > 0.0
                     ? s.mean_residual_after / s.mean_residual_before
                     : 0.0;
  }
  report.failure_rate = trials
                            ? static_cast<double>(report.failures) /
                                  static_cast<double>(trials)
                            : 0.0;
  report.mean_ratio = trials ? ratio_sum / static_cast<double>(trials) : 0.0;
  report.wilson_lower = wilson_lower(report.failures, trials);
  report.wilson_upper = wilson_upper(report.failures, trials);
  return report;
}

bool conditions_all_met(const std::vector<ConditionTrace>& conds) {
  for (const ConditionTrace& c : conds) {
    if (!c.satisfied) return false;
  }
  return true;
}

}  // namespace

TheoremReport verify_theorem1(const GmmSpec& spec, std::size_t trials,
                              const Rng& rng, std::size_t threads) {
  spec.validate();
  if (spec.k_neighbors > spec.samples) {
    fail(ErrorCode::invalid_argument,
         "verify_theorem1: K exceeds the sample count");
  }
  auto smooth = [&](const GmmInstance& inst, Rng&) {
    return knn_average(inst, spec.k_neighbors);
  };
  auto failed = [](const std::vector<double>& before,
                   const std::vector<double>& after) {
    for (std::size_t i = 0; i < before.size(); ++i) {
      if (!(after[i] < before[i])) return true;  // strict improvement missed
    }
    return false;
  };
  TheoremReport report = run_trials(spec, trials, rng, threads, smooth, failed);
  report.theorem = "theorem1";
  report.conditions = theorem1_conditions(spec);
  report.conditions_met = conditions_all_met(report.conditions);
  report.probability_budget = 3.0 * spec.delta;
  if (report.conditions_met) {
    report.asserted = true;
    report.passed = report.wilson_lower <= report.probability_budget;
  }
  return report;
}

TheoremReport verify_theorem2(const GmmSpec& spec, std::size_t trials,
                              const Rng& rng, std::size_t threads) {
  spec.validate();
  auto smooth = [&](const GmmInstance& inst, Rng&) {
    return softmax_smooth(inst, spec.lambda);
  };
  const double bound = spec.sigma / 2.0;
  auto failed = [bound](const std::vector<double>&,
                        const std::vector<double>& after) {
    for (const double a : after) {
      if (a > bound) return true;
    }
    return false;
  };
  TheoremReport report = run_trials(spec, trials, rng, threads, smooth, failed);
  report.theorem = "theorem2";
  report.conditions = theorem2_conditions(spec);
  report.conditions_met = conditions_all_met(report.conditions);
  report.probability_budget = 4.0 * spec.delta;
  if (report.conditions_met) {
    report.asserted = true;
    report.passed = report.wilson_lower <= report.probability_budget;
  }
  return report;
}

std::vector<SweepPoint> sweep_k(const GmmSpec& spec,
                                const std::vector<std::size_t>& ks,
                                std::size_t trials, const Rng& rng) {
  std::vector<SweepPoint> out;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    GmmSpec point = spec;
    point.k_neighbors = ks[i];
    const TheoremReport r =
        verify_theorem1(point, trials, rng.derive(0x6b5f + i));
    double ratio = 0.0;
    for (const TrialStats& s : r.per_trial) {
      ratio += s.max_residual_before > 0.0
                   ? s.max_residual_after / s.max_residual_before
                   : 0.0;
    }
    out.push_back({static_cast<double>(ks[i]),
                   trials ? ratio / static_cast<double>(trials) : 0.0,
                   1.0 - r.failure_rate});
  }
  return out;
}

std::vector<SweepPoint> sweep_lambda(const GmmSpec& spec,
                                     const std::vector<double>& lambdas,
                                     std::size_t trials, const Rng& rng) {
  std::vector<SweepPoint> out;
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    GmmSpec point = spec;
    point.lambda = lambdas[i];
    const TheoremReport r =
        verify_theorem2(point, trials, rng.derive(0x6c5f + i));
    double ratio = 0.0;
    for (const TrialStats& s : r.per_trial) {
      ratio += s.max_residual_before > 0.0
                   ? s.max_residual_after / s.max_residual_before
                   : 0.0;
    }
    out.push_back({lambdas[i],
                   trials ? ratio / static_cast<double>(trials) : 0.0,
                   1.0 - r.failure_rate});
  }
  return out;
}

std::string report_to_json(const TheoremReport& report) {
  nlohmann::json j;
  j["theorem"] = report.theorem;
  j["conditions_met"] = report.conditions_met;
  for (const ConditionTrace& c : report.conditions) {
    nlohmann::json cj;
    cj["condition"] = c.name;
    cj["lhs"] = c.lhs;
    cj["relation"] = c.relation;
    cj["rhs"] = c.rhs;
    cj["satisfied"] = c.satisfied;
    j["conditions"].push_back(cj);
  }
  j["trials"] = report.trials;
  j["failures"] = report.failures;
  j["failure_rate"] = report.failure_rate;
  j["probability_budget"] = report.probability_budget;
  j["wilson_lower"] = report.wilson_lower;
  j["wilson_upper"] = report.wilson_upper;
  j["asserted"] = report.asserted;
  j["passed"] = report.passed;
  j["mean_residual_ratio"] = report.mean_ratio;
  double mean_before = 0.0, mean_after = 0.0, max_after = 0.0;
  for (const TrialStats& s : report.per_trial) {
    mean_before += s.mean_residual_before;
    mean_after += s.mean_residual_after;
    max_after = std::max(max_after, s.max_residual_after);
  }
  const double n = report.per_trial.empty()
                       ? 1.0
                       : static_cast<double>(report.per_trial.size());
  j["mean_residual_before"] = mean_before / n;
  j["mean_residual_after"] = mean_after / n;
  j["max_residual_after"] = max_after;
  return j.dump(2);
}

void save_report_json(const TheoremReport& report, const std::string& path) {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::io, "cannot open " + path);
  os << report_to_json(report) << '\n';
  if (!os) fail(ErrorCode::io, "failed writing " + path);
}

void save_sweep_csv(const std::vector<SweepPoint>& points,
                    const std::string& parameter_name,
                    const std::string& path) {
  CsvWriter csv(path);
  csv.header({parameter_name, "max_residual_ratio", "event_rate"});
  for (const SweepPoint& p : points) {
    csv.row({format_double(p.parameter), format_double(p.mean_ratio),
             format_double(p.event_rate)});
  }
}

}  // namespace cdt
