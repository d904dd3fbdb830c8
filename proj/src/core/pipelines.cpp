#include "core/pipelines.hpp"

#include "core/csv.hpp"
#include "core/error.hpp"

namespace cdt {

const char* variant_name(PairVariant v) {
  switch (v) {
    case PairVariant::one_way_source:
      return "one_way_source";
    case PairVariant::one_way_target:
      return "one_way_target";
    case PairVariant::two_way:
      return "two_way";
    case PairVariant::two_way_center_aware:
      return "two_way_center_aware";
  }
  return "unknown";
}

PairSet build_variant(PairVariant v, const FeatureBank& src_bank,
                      const FeatureBank& tgt_bank, Metric metric) {
  switch (v) {
    case PairVariant::one_way_source:
      return build_pairs_source(src_bank, tgt_bank, metric);
    case PairVariant::one_way_target:
      return build_pairs_target(src_bank, tgt_bank, metric);
    case PairVariant::two_way:
      return union_pairs(build_pairs_source(src_bank, tgt_bank, metric),
                         build_pairs_target(src_bank, tgt_bank, metric));
    case PairVariant::two_way_center_aware: {
      const PairSet both =
          union_pairs(build_pairs_source(src_bank, tgt_bank, metric),
                      build_pairs_target(src_bank, tgt_bank, metric));
      const std::vector<int> pseudo = center_aware_labels(tgt_bank, metric);
      return filter_pairs(both, src_bank.labels, pseudo);
    }
  }
  fail(ErrorCode::invalid_argument, "build_variant: bad variant");
}

std::vector<PairVariantResult> pseudolabel_variants(const ModelParams& params,
                                                    const DomainDataset& src,
                                                    const DomainDataset& tgt,
                                                    Metric metric) {
  const FeatureBank src_bank = extract_features(params, src, true);
  const FeatureBank tgt_bank = extract_features(params, tgt, false);
  std::vector<PairVariantResult> out;
  for (const PairVariant v :
       {PairVariant::one_way_source, PairVariant::one_way_target,
        PairVariant::two_way, PairVariant::two_way_center_aware}) {
    PairVariantResult row;
    row.variant = v;
    row.pairs = build_variant(v, src_bank, tgt_bank, metric);
    row.quality = pair_metrics(row.pairs, src.size(), tgt.size(), tgt.labels);
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<AblationRowSpec> ablation_rows() {
  auto row = [](std::string name, bool s, bool st, bool t,
                CrossLossKind kind) {
    AblationRowSpec spec;
    spec.name = std::move(name);
    spec.losses.source = s;
    spec.losses.source_target = st;
    spec.losses.target = t;
    spec.losses.cross_kind = kind;
    return spec;
  };
  return {
      row("source_only", true, false, false, CrossLossKind::cls),
      row("target_only", false, false, true, CrossLossKind::cls),
      row("source_target", true, false, true, CrossLossKind::cls),
      row("source_target_cross_cls", true, true, true, CrossLossKind::cls),
      row("source_target_cross_dtl", true, true, true, CrossLossKind::dtl),
  };
}

std::vector<AblationResult> loss_ablation(const ModelParams& pretrained,
                                          const PairSet& pairs,
                                          const DomainDataset& src,
                                          const DomainDataset& tgt,
                                          const TrainConfig& base_cfg) {
  std::vector<AblationResult> out;
  for (const AblationRowSpec& row : ablation_rows()) {
    ModelParams params = pretrained;
    TrainConfig cfg = base_cfg;
    cfg.losses = row.losses;
    train_cdtrans(params, pairs, src, tgt, cfg);
    const EvalResult eval = evaluate(params, tgt);
    out.push_back({row.name, eval.accuracy, eval.per_class});
  }
  return out;
}

PairSet ground_truth_pairs(const DomainDataset& src, const DomainDataset& tgt,
                           Rng& rng) {
  src.validate();
  tgt.validate();
  std::vector<std::vector<std::uint32_t>> by_class(src.classes);
  for (std::size_t i = 0; i < src.size(); ++i) {
    by_class[static_cast<std::size_t>(src.labels[i])].push_back(
        static_cast<std::uint32_t>(i));
  }
  PairSet out;
  out.pairs.reserve(tgt.size());
  for (std::size_t t = 0; t < tgt.size(); ++t) {
    const auto cls = static_cast<std::size_t>(tgt.labels[t]);
    if (by_class[cls].empty()) {
      fail(ErrorCode::bad_state,
           "ground_truth_pairs: no source sample for class " +
               std::to_string(cls));
    }
    LabeledPair p;
    p.target = static_cast<std::uint32_t>(t);
    p.source = by_class[cls][rng.below(by_class[cls].size())];
    p.label = static_cast<int>(cls);
    p.provenance = kProvenanceTarget;
    out.pairs.push_back(p);
  }
  return out;
}

LossSwitches cross_arm_losses() {
  // Source branch trained with the pair label; the target branch learns
  // only from the source-target branch's soft predictions.
  LossSwitches sw;
  sw.source = true;
  sw.target = false;
  sw.source_target = true;
  sw.cross_kind = CrossLossKind::dtl;
  return sw;
}

LossSwitches direct_arm_losses() {
  // No cross branch: the target branch consumes the pair label directly.
  LossSwitches sw;
  sw.source = true;
  sw.target = true;
  sw.source_target = false;
  return sw;
}

std::vector<NoiseSweepPoint> noise_sweep(const ModelParams& pretrained,
                                         const DomainDataset& src,
                                         const DomainDataset& tgt,
                                         const std::vector<double>& ratios,
                                         const TrainConfig& base_cfg,
                                         Rng& rng) {
  Rng pair_rng = rng.derive(0x67747072);
  const PairSet base = ground_truth_pairs(src, tgt, pair_rng);
  std::vector<NoiseSweepPoint> out;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    const double ratio = ratios[i];
    PairSet corrupted = base;
    Rng corrupt_rng = rng.derive(0xc0000 + i);
    corrupt_pairs(corrupted, tgt.labels, ratio, corrupt_rng);

    PairSet clean;  // corrupted pairs removed
    for (const LabeledPair& p : corrupted.pairs) {
      if (tgt.labels[p.target] == p.label) clean.pairs.push_back(p);
    }

    auto run = [&](const PairSet& pairs, const LossSwitches& sw) {
      ModelParams params = pretrained;
      TrainConfig cfg = base_cfg;
      cfg.losses = sw;
      train_cdtrans(params, pairs, src, tgt, cfg);
      return evaluate(params, tgt).accuracy;
    };

    NoiseSweepPoint point;
    point.ratio = ratio;
    point.cross_accuracy = run(corrupted, cross_arm_losses());
    point.direct_accuracy = run(corrupted, direct_arm_losses());
    point.oracle_accuracy = run(clean, cross_arm_losses());
    out.push_back(point);
  }
  return out;
}

void save_variant_table_csv(const std::vector<PairVariantResult>& rows,
                            const std::string& path) {
  CsvWriter csv(path);
  csv.header({"variant", "recall_source", "recall_target", "precision",
              "kept", "total"});
  for (const PairVariantResult& r : rows) {
    csv.row({variant_name(r.variant), format_double(r.quality.recall_source),
             format_double(r.quality.recall_target),
             r.quality.precision ? format_double(*r.quality.precision) : "",
             std::to_string(r.quality.kept), std::to_string(r.quality.total)});
  }
}

void save_ablation_csv(const std::vector<AblationResult>& rows,
                       const std::string& path) {
  CsvWriter csv(path);
  std::vector<std::string> header = {"row", "target_accuracy"};
  if (!rows.empty()) {
    for (std::size_t k = 0; k < rows.front().per_class.size(); ++k) {
      header.push_back("class_" + std::to_string(k));
    }
  }
  csv.header(header);
  for (const AblationResult& r : rows) {
    std::vector<std::string> cells = {r.name,
                                      format_double(r.target_accuracy)};
    for (const double v : r.per_class) cells.push_back(format_double(v));
    csv.row(cells);
  }
}

void save_noise_sweep_csv(const std::vector<NoiseSweepPoint>& points,
                          const std::string& path) {
  CsvWriter csv(path);
  csv.header({"ratio", "cross_attention", "direct_label", "oracle"});
  for (const NoiseSweepPoint& p : points) {
    csv.row({format_double(p.ratio), format_double(p.cross_accuracy),
             format_double(p.direct_accuracy),
             format_double(p.oracle_accuracy)});
  }
}

}  // namespace cdt
