#pragma once

#include <string>
#include <vector>

#include "core/model.hpp"
#include "core/pseudolabel.hpp"
#include "core/synthdata.hpp"
#include "core/train.hpp"

namespace cdt {

// The four labeling strategies compared by the pair-quality table.
enum class PairVariant {
  one_way_source,
  one_way_target,
  two_way,
  two_way_center_aware,
};

const char* variant_name(PairVariant v);

PairSet build_variant(PairVariant v, const FeatureBank& src_bank,
                      const FeatureBank& tgt_bank, Metric metric);

struct PairVariantResult {
  PairVariant variant;
  PairSet pairs;
  PairQuality quality;
};

// Runs all four variants off one feature extraction of the given model.
std::vector<PairVariantResult> pseudolabel_variants(const ModelParams& params,
                                                    const DomainDataset& src,
                                                    const DomainDataset& tgt,
                                                    Metric metric);

// Loss ablation rows: which branch losses are enabled and whether the
// source-target branch uses classification or distillation.
struct AblationRowSpec {
  std::string name;
  LossSwitches losses;
};
std::vector<AblationRowSpec> ablation_rows();

struct AblationResult {
  std::string name;
  double target_accuracy = 0.0;
  std::vector<double> per_class;
};

// Each row restarts from the supplied pretrained checkpoint.
std::vector<AblationResult> loss_ablation(const ModelParams& pretrained,
                                          const PairSet& pairs,
                                          const DomainDataset& src,
                                          const DomainDataset& tgt,
                                          const TrainConfig& base_cfg);

// Ground-truth true-positive pairs: every target sample paired with a
// uniformly drawn source sample of the same class.
PairSet ground_truth_pairs(const DomainDataset& src, const DomainDataset& tgt,
                           Rng& rng);

struct NoiseSweepPoint {
  double ratio = 0.0;
  double cross_accuracy = 0.0;   // cross-attention arm
  double direct_accuracy = 0.0;  // direct-label arm, no cross branch
  double oracle_accuracy = 0.0;  // cross arm on the uncorrupted subset
};

// Corruption-robustness sweep. All arms start from the pretrained
// checkpoint and see the same corrupted pair list per ratio; the oracle arm
// drops the false positives before training.
std::vector<NoiseSweepPoint> noise_sweep(const ModelParams& pretrained,
                                         const DomainDataset& src,
                                         const DomainDataset& tgt,
                                         const std::vector<double>& ratios,
                                         const TrainConfig& base_cfg,
                                         Rng& rng);

LossSwitches cross_arm_losses();
LossSwitches direct_arm_losses();

void save_variant_table_csv(const std::vector<PairVariantResult>& rows,
                            const std::string& path);
void save_ablation_csv(const std::vector<AblationResult>& rows,
                       const std::string& path);
void save_noise_sweep_csv(const std::vector<NoiseSweepPoint>& points,
                          const std::string& path);

}  // namespace cdt
