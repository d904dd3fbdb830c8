#include "core/train.hpp"

#include <cmath>
#include <fstream>

#include "core/csv.hpp"
#include "core/error.hpp"
#include "core/losses.hpp"

#include <nlohmann/json.hpp>

namespace cdt {

void TrainConfig::validate() const {
  sgd().validate();
  if (batch_size == 0) {
    fail(ErrorCode::bad_config, "TrainConfig: batch_size must be >= 1");
  }
}

void write_metrics(const std::vector<MetricsRecord>& records,
                   const std::string& jsonl_path,
                   const std::string& csv_path) {
  std::ofstream os(jsonl_path);
  if (!os) fail(ErrorCode::io, "cannot open " + jsonl_path);
  for (const MetricsRecord& r : records) {
    nlohmann::json j;
    j["epoch"] = r.epoch;
    j["loss_source"] = r.loss_source;
    j["loss_target"] = r.loss_target;
    j["loss_cross"] = r.loss_cross;
    j["loss_total"] = r.loss_total;
    if (r.target_accuracy) j["target_accuracy"] = *r.target_accuracy;
    if (r.source_accuracy) j["source_accuracy"] = *r.source_accuracy;
    if (r.pair_quality) {
      j["pairs"]["recall_source"] = r.pair_quality->recall_source;
      j["pairs"]["recall_target"] = r.pair_quality->recall_target;
      if (r.pair_quality->precision) {
        j["pairs"]["precision"] = *r.pair_quality->precision;
      }
      j["pairs"]["kept"] = r.pair_quality->kept;
      j["pairs"]["total"] = r.pair_quality->total;
    }
    os << j.dump() << '\n';
  }
  if (!os) fail(ErrorCode::io, "failed writing " + jsonl_path);

  CsvWriter csv(csv_path);
  csv.header({"epoch", "loss_source", "loss_target", "loss_cross",
              "loss_total", "source_accuracy", "target_accuracy"});
  for (const MetricsRecord& r : records) {
    csv.row({std::to_string(r.epoch), format_double(r.loss_source),
             format_double(r.loss_target), format_double(r.loss_cross),
             format_double(r.loss_total),
             r.source_accuracy ? format_double(*r.source_accuracy) : "",
             r.target_accuracy ? format_double(*r.target_accuracy) : ""});
  }
}

EvalResult evaluate(const ModelParams& params, const DomainDataset& data) {
  data.validate();
  EvalResult result;
  std::vector<std::size_t> per_class_total(data.classes, 0);
  std::vector<std::size_t> per_class_hit(data.classes, 0);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t pred = predict(params, data.samples.row_vec(i));
    const auto truth = static_cast<std::size_t>(data.labels[i]);
    ++per_class_total[truth];
    if (pred == truth) {
      ++hits;
      ++per_class_hit[truth];
    }
  }
  result.accuracy =
      data.size() ? static_cast<double>(hits) / static_cast<double>(data.size())
                  : 0.0;
  result.per_class.resize(data.classes, 0.0);
  double macro = 0.0;
  std::size_t seen_classes = 0;
  for (std::size_t k = 0; k < data.classes; ++k) {
    if (per_class_total[k] > 0) {
      result.per_class[k] = static_cast<double>(per_class_hit[k]) /
                            static_cast<double>(per_class_total[k]);
      macro += result.per_class[k];
      ++seen_classes;
    }
  }
  result.macro_average =
      seen_classes ? macro / static_cast<double>(seen_classes) : 0.0;
  return result;
}

FeatureBank extract_features(const ModelParams& params,
                             const DomainDataset& data, bool with_labels) {
  data.validate();
  FeatureBank bank;
  bank.features = Matrix(data.size(), params.cfg.width);
  bank.probs = Matrix(data.size(), params.cfg.classes);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const SampleOutput out = forward_sample(params, data.samples.row_vec(i));
    for (std::size_t c = 0; c < params.cfg.width; ++c) {
      bank.features(i, c) = out.feature(0, c);
    }
    const std::vector<double> p = softmax(out.logits.row_vec(0));
    for (std::size_t c = 0; c < params.cfg.classes; ++c) {
      bank.probs(i, c) = p[c];
    }
  }
  if (with_labels) bank.labels = data.labels;
  return bank;
}

namespace {

void check_model_matches(const ModelParams& params, const DomainDataset& ds,
                         const char* op) {
  if (ds.patch_count != params.cfg.patch_count ||
      ds.patch_dim != params.cfg.patch_dim ||
      ds.classes != params.cfg.classes) {
    fail(ErrorCode::dimension_mismatch,
         std::string(op) + ": dataset (" + std::to_string(ds.patch_count) +
             " tokens x " + std::to_string(ds.patch_dim) + ", " +
             std::to_string(ds.classes) + " classes) does not match model");
  }
}

std::vector<Matrix> collect_grads(const Tape& tape, const ModelParamIds& ids) {
  std::vector<Matrix> grads;
  grads.reserve(ids.flat.size());
  for (const ValueId id : ids.flat) grads.push_back(tape.grad(id));
  return grads;
}

void require_finite_loss(double v) {
  if (!std::isfinite(v) || v < 0.0) {
    fail(ErrorCode::internal,
         "training loss became invalid: " + std::to_string(v));
  }
}

}  // namespace

std::vector<MetricsRecord> pretrain_source(ModelParams& params,
                                           const DomainDataset& source,
                                           const DomainDataset* target_eval,
                                           const TrainConfig& cfg) {
  cfg.validate();
  check_model_matches(params, source, "pretrain_source");
  if (source.size() == 0) {
    fail(ErrorCode::invalid_argument, "pretrain_source: empty source dataset");
  }

  // Both training loops draw batch order from the same derived stream, so a
  // pair list reduced to its source samples replays the exact same batches.
  Rng shuffle_rng = Rng(cfg.seed).derive(0x736875666cull);
  SgdState sgd;
  std::vector<MetricsRecord> metrics;

  auto snapshot = [&](std::size_t epoch, double mean_loss) {
    MetricsRecord r;
    r.epoch = epoch;
    r.loss_source = mean_loss;
    r.loss_total = mean_loss;
    const bool eval_now =
        epoch == cfg.epochs ||
        (cfg.eval_every > 0 && epoch % cfg.eval_every == 0);
    if (eval_now) {
      r.source_accuracy = evaluate(params, source).accuracy;
      if (target_eval) {
        r.target_accuracy = evaluate(params, *target_eval).accuracy;
      }
    }
    metrics.push_back(std::move(r));
  };

  snapshot(0, 0.0);
  std::vector<std::size_t> order(source.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size) {
      const std::size_t stop =
          std::min(order.size(), start + cfg.batch_size);
      Tape tape;
      const ModelParamIds ids = register_model(tape, params, true);
      ValueId total{};
      for (std::size_t i = start; i < stop; ++i) {
        const std::size_t idx = order[i];
        const BranchTrace trace = forward_branch(
            tape, patchify(source.samples.row_vec(idx), params.cfg), ids,
            params.cfg);
        const ValueId loss = tape.cross_entropy_logits(
            trace.logits, static_cast<std::size_t>(source.labels[idx]));
        total = total.valid() ? tape.add(total, loss) : loss;
      }
      total = tape.scale(total, 1.0 / static_cast<double>(stop - start));
      const double batch_loss = tape.value(total)(0, 0);
      require_finite_loss(batch_loss);
      epoch_loss += batch_loss * static_cast<double>(stop - start);
      tape.backward(total);
      sgd.step(params, collect_grads(tape, ids), cfg.sgd());
    }
    snapshot(epoch, epoch_loss / static_cast<double>(order.size()));
  }
  return metrics;
}

std::vector<MetricsRecord> train_cdtrans(ModelParams& params,
                                         const PairSet& pairs,
                                         const DomainDataset& source,
                                         const DomainDataset& target,
                                         const TrainConfig& cfg) {
  cfg.validate();
  check_model_matches(params, source, "train_cdtrans");
  check_model_matches(params, target, "train_cdtrans");
  const PairSet kept = pairs.kept_only();
  if (kept.size() == 0) {
    fail(ErrorCode::bad_state,
         "train_cdtrans: no kept pairs to train on; relax the filtering or "
         "rebuild the pair set");
  }
  for (const LabeledPair& p : kept.pairs) {
    if (p.source >= source.size() || p.target >= target.size()) {
      fail(ErrorCode::invalid_argument,
           "train_cdtrans: pair indices exceed dataset sizes");
    }
    if (p.label < 0 || static_cast<std::size_t>(p.label) >= params.cfg.classes) {
      fail(ErrorCode::invalid_argument,
           "train_cdtrans: pair label out of range");
    }
  }
  const LossSwitches& sw = cfg.losses;
  if (!sw.source && !sw.target && !sw.source_target) {
    fail(ErrorCode::bad_config, "train_cdtrans: all losses disabled");
  }

  Rng shuffle_rng = Rng(cfg.seed).derive(0x736875666cull);
  SgdState sgd;
  std::vector<MetricsRecord> metrics;

  auto snapshot = [&](std::size_t epoch, double ls, double lt, double lst) {
    MetricsRecord r;
    r.epoch = epoch;
    r.loss_source = ls;
    r.loss_target = lt;
    r.loss_cross = lst;
    r.loss_total = ls + lt + lst;
    const bool eval_now =
        epoch == cfg.epochs ||
        (cfg.eval_every > 0 && epoch % cfg.eval_every == 0);
    if (eval_now) {
      r.target_accuracy = evaluate(params, target).accuracy;
    }
    metrics.push_back(std::move(r));
  };

  snapshot(0, 0.0, 0.0, 0.0);
  std::vector<std::size_t> order(kept.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double sum_ls = 0.0, sum_lt = 0.0, sum_lst = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size) {
      const std::size_t stop =
          std::min(order.size(), start + cfg.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(stop - start);

      Tape tape;
      const ModelParamIds ids = register_model(tape, params, true);
      ValueId total{};
      auto accumulate = [&](ValueId term) {
        total = total.valid() ? tape.add(total, term) : term;
      };

      for (std::size_t i = start; i < stop; ++i) {
        const LabeledPair& pair = kept.pairs[order[i]];
        const auto label = static_cast<std::size_t>(pair.label);

        // The source and target branches always run: the source-target
        // branch feeds on their per-layer projections.
        const BranchTrace trace_s = forward_branch(
            tape, patchify(source.samples.row_vec(pair.source), params.cfg),
            ids, params.cfg);
        const BranchTrace trace_t = forward_branch(
            tape, patchify(target.samples.row_vec(pair.target), params.cfg),
            ids, params.cfg);

        if (sw.source) {
          const ValueId ls = tape.cross_entropy_logits(trace_s.logits, label);
          sum_ls += tape.value(ls)(0, 0);
          accumulate(ls);
        }
        if (sw.target) {
          const ValueId lt = tape.cross_entropy_logits(trace_t.logits, label);
          sum_lt += tape.value(lt)(0, 0);
          accumulate(lt);
        }
        if (sw.source_target) {
          const ValueId cross_logits =
              forward_cross_branch(tape, trace_s, trace_t, ids, params.cfg);
          ValueId lst{};
          if (sw.cross_kind == CrossLossKind::cls) {
            lst = tape.cross_entropy_logits(cross_logits, label);
          } else {
            // Teacher distribution is taken by value: no gradient reaches
            // the source-target branch through the distillation term.
            const Matrix teacher =
                softmax_rows(tape.value(cross_logits));
            lst = tape.soft_cross_entropy_logits(teacher, trace_t.logits);
          }
          sum_lst += tape.value(lst)(0, 0);
          accumulate(lst);
        }
      }

      total = tape.scale(total, inv_batch);
      require_finite_loss(tape.value(total)(0, 0));
      tape.backward(total);
      sgd.step(params, collect_grads(tape, ids), cfg.sgd());
    }
    const double n = static_cast<double>(order.size());
    snapshot(epoch, sum_ls / n, sum_lt / n, sum_lst / n);
  }
  return metrics;
}

}  // namespace cdt
