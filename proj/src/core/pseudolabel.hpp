#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core/matrix.hpp"

namespace cdt {

enum class Metric { cosine, euclidean };

const char* metric_name(Metric m);
Metric metric_from_name(const std::string& name);

// Per-sample features plus, for target banks, the classifier's probability
// rows used as weights for the initial centers.
struct FeatureBank {
  Matrix features;          // n x dim
  std::vector<int> labels;  // ground truth (source) — may be empty
  Matrix probs;             // n x classes — empty outside target banks

  std::size_t size() const { return features.rows(); }
  void validate() const;
};

enum : std::uint8_t {
  kProvenanceSource = 1,  // built from the source side
  kProvenanceTarget = 2,  // built from the target side
};

struct LabeledPair {
  std::uint32_t source = 0;
  std::uint32_t target = 0;
  int label = -1;  // label of the source sample
  bool kept = true;
  std::uint8_t provenance = 0;
};

struct PairSet {
  std::vector<LabeledPair> pairs;

  std::size_t size() const { return pairs.size(); }
  std::size_t kept_count() const;
  PairSet kept_only() const;
};

// One pair per source sample, partner = nearest target; ties resolve to the
// lowest target index. Source coverage is complete by construction.
PairSet build_pairs_source(const FeatureBank& src, const FeatureBank& tgt,
                           Metric metric);
// Mirror image: one pair per target sample, complete target coverage.
PairSet build_pairs_target(const FeatureBank& src, const FeatureBank& tgt,
                           Metric metric);
// Set union with duplicate (source, target) entries collapsed; provenance
// flags are merged.
PairSet union_pairs(const PairSet& ps, const PairSet& pt);

struct Centers {
  Matrix c;                   // classes x dim
  std::vector<bool> defined;  // weight/count was nonzero
  std::size_t classes() const { return defined.size(); }
};

// Probability-weighted class centers of the target features. A class with
// zero total weight is flagged undefined.
Centers initial_centers(const FeatureBank& tgt);
// Nearest-center labels; undefined centers are excluded from the argmin and
// ties resolve to the lowest class index.
std::vector<int> assign_labels(const FeatureBank& tgt, const Centers& centers,
                               Metric metric);
// Unweighted per-class means; a class with no members keeps its previous
// center (and its previous defined flag).
Centers recompute_centers(const FeatureBank& tgt,
                          const std::vector<int>& labels,
                          const Centers& previous);
// One refinement round: weighted centers, assignment, recomputed centers,
// final assignment against the recomputed centers.
std::vector<int> center_aware_labels(const FeatureBank& tgt, Metric metric);

// Marks a pair kept only when the target's pseudo label equals the source
// label; never adds pairs.
PairSet filter_pairs(const PairSet& pairs, const std::vector<int>& src_labels,
                     const std::vector<int>& pseudo_labels);

struct PairQuality {
  double recall_source = 0.0;  // percent of source samples in kept pairs
  double recall_target = 0.0;  // percent of target samples in kept pairs
  std::optional<double> precision;  // percent of kept pairs with correct label
  std::size_t kept = 0;
  std::size_t total = 0;
};

PairQuality pair_metrics(const PairSet& pairs, std::size_t source_count,
                         std::size_t target_count,
                         const std::vector<int>& true_target_labels);

// CSV schema: source_idx,target_idx,label,kept,provenance
void save_pairs_csv(const PairSet& pairs, const std::string& path);
PairSet load_pairs_csv(const std::string& path);

void save_feature_bank_csv(const FeatureBank& bank, const std::string& path);

// n_query x n_ref distances under the chosen metric. Cosine distance
// operates on L2-normalized rows.
Matrix pairwise_distances(const Matrix& queries, const Matrix& refs,
                          Metric metric);

}  // namespace cdt
