#include "core/pseudolabel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "core/csv.hpp"
#include "core/error.hpp"

namespace cdt {

const char* metric_name(Metric m) {
  return m == Metric::cosine ? "cosine" : "euclidean";
}

Metric metric_from_name(const std::string& name) {
  if (name == "cosine") return Metric::cosine;
  if (name == "euclidean") return Metric::euclidean;
  fail(ErrorCode::bad_config, "unknown metric '" + name + "'");
}

void FeatureBank::validate() const {
  if (!probs.empty()) {
    if (probs.rows() != features.rows()) {
      fail(ErrorCode::dimension_mismatch,
           "FeatureBank: probs rows " + std::to_string(probs.rows()) +
               " != feature rows " + std::to_string(features.rows()));
    }
    for (std::size_t r = 0; r < probs.rows(); ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < probs.cols(); ++c) s += probs(r, c);
      if (std::fabs(s - 1.0) > 1e-9) {
        fail(ErrorCode::invalid_argument,
             "FeatureBank: probability row " + std::to_string(r) +
                 " sums to " + std::to_string(s));
      }
    }
  }
  if (!labels.empty() && labels.size() != features.rows()) {
    fail(ErrorCode::dimension_mismatch,
         "FeatureBank: label count does not match feature rows");
  }
}

std::size_t PairSet::kept_count() const {
  std::size_t n = 0;
  for (const LabeledPair& p : pairs) n += p.kept ? 1 : 0;
  return n;
}

PairSet PairSet::kept_only() const {
  PairSet out;
  for (const LabeledPair& p : pairs) {
    if (p.kept) out.pairs.push_back(p);
  }
  return out;
}

Matrix pairwise_distances(const Matrix& queries, const Matrix& refs,
                          Metric metric) {
  if (queries.cols() != refs.cols()) {
    fail(ErrorCode::dimension_mismatch,
         "pairwise_distances: dim mismatch " + queries.shape_str() + " vs " +
             refs.shape_str());
  }
  Matrix d(queries.rows(), refs.rows());
  if (metric == Metric::cosine) {
    const Matrix qn = normalize_rows(queries);
    const Matrix rn = normalize_rows(refs);
    const Matrix sim = matmul_nt(qn, rn);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = 1.0 - sim[i];
    return d;
  }
  for (std::size_t i = 0; i < queries.rows(); ++i) {
    for (std::size_t j = 0; j < refs.rows(); ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < queries.cols(); ++c) {
        const double diff = queries(i, c) - refs(j, c);
        s += diff * diff;
      }
      d(i, j) = std::sqrt(s);
    }
  }
  return d;
}

namespace {

void require_nonempty(const FeatureBank& a, const FeatureBank& b,
                      const char* op) {
  if (a.size() == 0 || b.size() == 0) {
    fail(ErrorCode::invalid_argument,
         std::string(op) + ": empty feature bank");
  }
}

std::size_t argmin_in_row(const Matrix& d, std::size_t row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < d.cols(); ++j) {
    if (d(row, j) < d(row, best)) best = j;
  }
  return best;
}

}  // namespace

PairSet build_pairs_source(const FeatureBank& src, const FeatureBank& tgt,
                           Metric metric) {
  require_nonempty(src, tgt, "build_pairs_source");
  const Matrix d = pairwise_distances(src.features, tgt.features, metric);
  PairSet out;
  out.pairs.reserve(src.size());
  for (std::size_t s = 0; s < src.size(); ++s) {
    LabeledPair p;
    p.source = static_cast<std::uint32_t>(s);
    p.target = static_cast<std::uint32_t>(argmin_in_row(d, s));
    p.label = src.labels.empty() ? -1 : src.labels[s];
    p.provenance = kProvenanceSource;
    out.pairs.push_back(p);
  }
  return out;
}

PairSet build_pairs_target(const FeatureBank& src, const FeatureBank& tgt,
                           Metric metric) {
  require_nonempty(src, tgt, "build_pairs_target");
  const Matrix d = pairwise_distances(tgt.features, src.features, metric);
  PairSet out;
  out.pairs.reserve(tgt.size());
  for (std::size_t t = 0; t < tgt.size(); ++t) {
    LabeledPair p;
    p.target = static_cast<std::uint32_t>(t);
    p.source = static_cast<std::uint32_t>(argmin_in_row(d, t));
    p.label = src.labels.empty() ? -1 : src.labels[p.source];
    p.provenance = kProvenanceTarget;
    out.pairs.push_back(p);
  }
  return out;
}

PairSet union_pairs(const PairSet& ps, const PairSet& pt) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, LabeledPair> merged;
  auto absorb = [&](const PairSet& set) {
    for (const LabeledPair& p : set.pairs) {
      const auto key = std::make_pair(p.source, p.target);
      auto it = merged.find(key);
      if (it == merged.end()) {
        merged.emplace(key, p);
      } else {
        it->second.provenance |= p.provenance;
        it->second.kept = it->second.kept && p.kept;
      }
    }
  };
  absorb(ps);
  absorb(pt);
  PairSet out;
  out.pairs.reserve(merged.size());
  for (const auto& [key, pair] : merged) out.pairs.push_back(pair);
  return out;
}

Centers initial_centers(const FeatureBank& tgt) {
  tgt.validate();
  if (tgt.probs.empty()) {
    fail(ErrorCode::invalid_argument,
         "initial_centers: target bank has no probability rows");
  }
  const std::size_t classes = tgt.probs.cols();
  const std::size_t dim = tgt.features.cols();
  Centers centers;
  centers.c = Matrix(classes, dim);
  centers.defined.assign(classes, false);
  for (std::size_t k = 0; k < classes; ++k) {
    double total = 0.0;
    for (std::size_t t = 0; t < tgt.size(); ++t) {
      const double w = tgt.probs(t, k);
      total += w;
      for (std::size_t c = 0; c < dim; ++c)
        centers.c(k, c) += w * tgt.features(t, c);
    }
    if (total > 0.0) {
      centers.defined[k] = true;
      for (std::size_t c = 0; c < dim; ++c) centers.c(k, c) /= total;
    }
  }
  return centers;
}

std::vector<int> assign_labels(const FeatureBank& tgt, const Centers& centers,
                               Metric metric) {
  bool any = false;
  for (const bool d : centers.defined) any = any || d;
  if (!any) {
    fail(ErrorCode::bad_state, "assign_labels: all centers are undefined");
  }
  const Matrix d = pairwise_distances(tgt.features, centers.c, metric);
  std::vector<int> labels(tgt.size(), -1);
  for (std::size_t t = 0; t < tgt.size(); ++t) {
    int best = -1;
    for (std::size_t k = 0; k < centers.classes(); ++k) {
      if (!centers.defined[k]) continue;
      if (best < 0 || d(t, k) < d(t, static_cast<std::size_t>(best))) {
        best = static_cast<int>(k);
      }
    }
    labels[t] = best;
  }
  return labels;
}

Centers recompute_centers(const FeatureBank& tgt,
                          const std::vector<int>& labels,
                          const Centers& previous) {
  if (labels.size() != tgt.size()) {
    fail(ErrorCode::dimension_mismatch,
         "recompute_centers: label count mismatch");
  }
  const std::size_t classes = previous.classes();
  const std::size_t dim = tgt.features.cols();
  Centers out;
  out.c = Matrix(classes, dim);
  out.defined.assign(classes, false);
  std::vector<std::size_t> counts(classes, 0);
  for (std::size_t t = 0; t < tgt.size(); ++t) {
    const int k = labels[t];
    if (k < 0 || static_cast<std::size_t>(k) >= classes) {
      fail(ErrorCode::invalid_argument,
           "recompute_centers: label out of range");
    }
    ++counts[static_cast<std::size_t>(k)];
    for (std::size_t c = 0; c < dim; ++c)
      out.c(static_cast<std::size_t>(k), c) += tgt.features(t, c);
  }
  for (std::size_t k = 0; k < classes; ++k) {
    if (counts[k] > 0) {
      out.defined[k] = true;
      for (std::size_t c = 0; c < dim; ++c)
        out.c(k, c) /= static_cast<double>(counts[k]);
    } else {
      out.defined[k] = previous.defined[k];
      for (std::size_t c = 0; c < dim; ++c) out.c(k, c) = previous.c(k, c);
    }
  }
  return out;
}

std::vector<int> center_aware_labels(const FeatureBank& tgt, Metric metric) {
  const Centers first = initial_centers(tgt);
  const std::vector<int> initial = assign_labels(tgt, first, metric);
  const Centers refined = recompute_centers(tgt, initial, first);
  return assign_labels(tgt, refined, metric);
}

PairSet filter_pairs(const PairSet& pairs, const std::vector<int>& src_labels,
                     const std::vector<int>& pseudo_labels) {
  PairSet out = pairs;
  for (LabeledPair& p : out.pairs) {
    if (p.source >= src_labels.size() || p.target >= pseudo_labels.size()) {
      fail(ErrorCode::invalid_argument,
           "filter_pairs: pair index outside label tables");
    }
    p.kept = p.kept && src_labels[p.source] == pseudo_labels[p.target];
  }
  return out;
}

PairQuality pair_metrics(const PairSet& pairs, std::size_t source_count,
                         std::size_t target_count,
                         const std::vector<int>& true_target_labels) {
  std::vector<bool> src_seen(source_count, false);
  std::vector<bool> tgt_seen(target_count, false);
  std::size_t kept = 0, correct = 0;
  for (const LabeledPair& p : pairs.pairs) {
    if (!p.kept) continue;
    ++kept;
    if (p.source < source_count) src_seen[p.source] = true;
    if (p.target < target_count) tgt_seen[p.target] = true;
    if (p.target < true_target_labels.size() &&
        p.label == true_target_labels[p.target]) {
      ++correct;
    }
  }
  PairQuality q;
  q.kept = kept;
  q.total = pairs.size();
  const auto frac = [](std::size_t hit, std::size_t total) {
    return total == 0 ? 0.0
                      : 100.0 * static_cast<double>(hit) /
                            static_cast<double>(total);
  };
  std::size_t s_hit = 0, t_hit = 0;
  for (const bool b : src_seen) s_hit += b ? 1 : 0;
  for (const bool b : tgt_seen) t_hit += b ? 1 : 0;
  q.recall_source = frac(s_hit, source_count);
  q.recall_target = frac(t_hit, target_count);
  if (kept > 0) {
    q.precision = frac(correct, kept);
  }
  return q;
}

void save_pairs_csv(const PairSet& pairs, const std::string& path) {
  CsvWriter csv(path);
  csv.header({"source_idx", "target_idx", "label", "kept", "provenance"});
  for (const LabeledPair& p : pairs.pairs) {
    std::string prov;
    if (p.provenance & kProvenanceSource) prov += 'S';
    if (p.provenance & kProvenanceTarget) prov += 'T';
    csv.row({std::to_string(p.source), std::to_string(p.target),
             std::to_string(p.label), p.kept ? "1" : "0", prov});
  }
}

PairSet load_pairs_csv(const std::string& path) {
  CsvReader csv(path);
  const std::vector<std::string> header = csv.next_row();
  const std::vector<std::string> expected = {"source_idx", "target_idx",
                                             "label", "kept", "provenance"};
  if (header != expected) {
    fail(ErrorCode::bad_format, "pair csv: unexpected header in " + path);
  }
  PairSet out;
  while (csv.has_more()) {
    const std::vector<std::string> row = csv.next_row();
    if (row.size() != 5) {
      fail(ErrorCode::bad_format, "pair csv: malformed row in " + path);
    }
    LabeledPair p;
    p.source = static_cast<std::uint32_t>(std::stoul(row[0]));
    p.target = static_cast<std::uint32_t>(std::stoul(row[1]));
    p.label = std::stoi(row[2]);
    p.kept = row[3] == "1";
    for (const char ch : row[4]) {
      if (ch == 'S') p.provenance |= kProvenanceSource;
      if (ch == 'T') p.provenance |= kProvenanceTarget;
    }
    out.pairs.push_back(p);
  }
  return out;
}

void save_feature_bank_csv(const FeatureBank& bank, const std::string& path) {
  CsvWriter csv(path);
  std::vector<std::string> header = {"index", "label"};
  for (std::size_t c = 0; c < bank.features.cols(); ++c) {
    header.push_back("f" + std::to_string(c));
  }
  csv.header(header);
  for (std::size_t r = 0; r < bank.size(); ++r) {
    std::vector<std::string> row;
    row.push_back(std::to_string(r));
    row.push_back(std::to_string(bank.labels.empty() ? -1 : bank.labels[r]));
    for (std::size_t c = 0; c < bank.features.cols(); ++c) {
      row.push_back(format_double(bank.features(r, c)));
    }
    csv.row(row);
  }
}

}  // namespace cdt
