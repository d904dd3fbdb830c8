#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core/model.hpp"
#include "core/optimizer.hpp"
#include "core/pseudolabel.hpp"
#include "core/synthdata.hpp"

namespace cdt {

enum class CrossLossKind { cls, dtl };

struct LossSwitches {
  bool source = true;        // L_s: cross-entropy on the source branch
  bool target = true;        // L_t: cross-entropy on the target branch
  bool source_target = true;  // L_{s+t}: loss on the source-target branch
  CrossLossKind cross_kind = CrossLossKind::dtl;

  bool operator==(const LossSwitches&) const = default;
};

struct TrainConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::size_t batch_size = 64;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  LossSwitches losses;
  // 0 disables per-epoch target evaluation (the final value is always
  // computed by the callers that need it).
  std::size_t eval_every = 1;

  void validate() const;
  SgdConfig sgd() const {
    return SgdConfig{learning_rate, momentum, weight_decay};
  }
};

struct MetricsRecord {
  std::size_t epoch = 0;
  double loss_source = 0.0;
  double loss_target = 0.0;
  double loss_cross = 0.0;
  double loss_total = 0.0;
  std::optional<double> target_accuracy;
  std::optional<double> source_accuracy;
  std::optional<PairQuality> pair_quality;
};

// Written as JSON-lines and as CSV next to it (path + ".csv" when the path
// ends in ".jsonl", otherwise the two formats are derived from the stem).
void write_metrics(const std::vector<MetricsRecord>& records,
                   const std::string& jsonl_path, const std::string& csv_path);

struct EvalResult {
  double accuracy = 0.0;
  std::vector<double> per_class;  // accuracy per class index
  double macro_average = 0.0;
};

EvalResult evaluate(const ModelParams& params, const DomainDataset& data);

// Pooled features + classifier probabilities for every sample; the backbone
// of the labeling pipeline.
FeatureBank extract_features(const ModelParams& params,
                             const DomainDataset& data, bool with_labels);

// Source-only supervised training (the baseline). Metrics get one record per
// epoch; the epoch-0 record describes the untouched initialization.
std::vector<MetricsRecord> pretrain_source(ModelParams& params,
                                           const DomainDataset& source,
                                           const DomainDataset* target_eval,
                                           const TrainConfig& cfg);

// Triple-branch training over kept pairs. Per batch: source branch
// cross-entropy with the pair label, target branch cross-entropy with the
// pair's pseudo label, and either a classification or a distillation loss on
// the source-target branch (teacher probabilities are detached). One
// optimizer step per batch on the shared parameter set.
std::vector<MetricsRecord> train_cdtrans(ModelParams& params,
                                         const PairSet& pairs,
                                         const DomainDataset& source,
                                         const DomainDataset& target,
                                         const TrainConfig& cfg);

}  // namespace cdt
