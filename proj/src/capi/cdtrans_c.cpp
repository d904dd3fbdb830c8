#include "cdtrans/cdtrans.h"

#include <cstring>
#include <string>

#include "core/config.hpp"
#include "core/csv.hpp"
#include "core/denoise.hpp"
#include "core/error.hpp"
#include "core/model.hpp"
#include "core/pipelines.hpp"
#include "core/pseudolabel.hpp"
#include "core/synthdata.hpp"
#include "core/train.hpp"

struct cdt_dataset {
  cdt::DomainDataset ds;
};
struct cdt_model {
  cdt::ModelParams params;
};
struct cdt_pairset {
  cdt::PairSet pairs;
};
struct cdt_report {
  std::string json;
};

namespace {

thread_local std::string g_last_error;

cdt_status status_from(cdt::ErrorCode code) {
  using cdt::ErrorCode;
  switch (code) {
    case ErrorCode::invalid_argument:
      return CDT_ERR_INVALID_ARGUMENT;
    case ErrorCode::dimension_mismatch:
      return CDT_ERR_DIMENSION;
    case ErrorCode::io:
      return CDT_ERR_IO;
    case ErrorCode::bad_magic:
    case ErrorCode::bad_version:
    case ErrorCode::bad_format:
      return CDT_ERR_FORMAT;
    case ErrorCode::truncated:
      return CDT_ERR_TRUNCATED;
    case ErrorCode::bad_config:
      return CDT_ERR_CONFIG;
    case ErrorCode::bad_state:
      return CDT_ERR_STATE;
    case ErrorCode::conditions_unmet:
      return CDT_ERR_CONDITIONS_UNMET;
    case ErrorCode::assertion_failed:
      return CDT_ERR_ASSERTION;
    case ErrorCode::internal:
      return CDT_ERR_INTERNAL;
  }
  return CDT_ERR_INTERNAL;
}

template <class Fn>
cdt_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const cdt::Error& e) {
    g_last_error = e.what();
    return status_from(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CDT_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return CDT_ERR_INTERNAL;
  }
}

cdt_status invalid(const char* msg) {
  g_last_error = msg;
  return CDT_ERR_INVALID_ARGUMENT;
}

cdt_report* make_report(std::string json) {
  return new cdt_report{std::move(json)};
}

nlohmann::json eval_to_json(const cdt::EvalResult& r) {
  nlohmann::json j;
  j["accuracy"] = r.accuracy;
  j["per_class"] = r.per_class;
  j["macro_average"] = r.macro_average;
  return j;
}

nlohmann::json quality_to_json(const cdt::PairQuality& q) {
  nlohmann::json j;
  j["recall_source"] = q.recall_source;
  j["recall_target"] = q.recall_target;
  if (q.precision) {
    j["precision"] = *q.precision;
  } else {
    j["precision"] = nullptr;
  }
  j["kept"] = q.kept;
  j["total"] = q.total;
  return j;
}

cdt::TrainConfig parse_train_config(const char* json_text) {
  if (!json_text || !*json_text) return cdt::TrainConfig{};
  return cdt::train_config_from_json(
      cdt::parse_json(json_text, "train config"));
}

}  // namespace

extern "C" {

const char* cdt_version(void) { return "1.0.0"; }

const char* cdt_status_name(cdt_status status) {
  switch (status) {
    case CDT_OK:
      return "ok";
    case CDT_ERR_INVALID_ARGUMENT:
      return "invalid_argument";
    case CDT_ERR_CONFIG:
      return "config_error";
    case CDT_ERR_IO:
      return "io_error";
    case CDT_ERR_FORMAT:
      return "format_error";
    case CDT_ERR_TRUNCATED:
      return "truncated";
    case CDT_ERR_DIMENSION:
      return "dimension_mismatch";
    case CDT_ERR_STATE:
      return "bad_state";
    case CDT_ERR_CONDITIONS_UNMET:
      return "conditions_unmet";
    case CDT_ERR_ASSERTION:
      return "assertion_failed";
    case CDT_ERR_INTERNAL:
      return "internal_error";
  }
  return "unknown";
}

const char* cdt_last_error(void) { return g_last_error.c_str(); }

cdt_status cdt_default_config(const char* kind, cdt_report** out) {
  if (!kind || !out) return invalid("null argument");
  return guarded([&] {
    const std::string k = kind;
    nlohmann::json j;
    if (k == "shift") {
      j = cdt::to_json(cdt::ShiftSpec{});
    } else if (k == "model") {
      j = cdt::to_json(cdt::ModelConfig{});
    } else if (k == "train") {
      j = cdt::to_json(cdt::TrainConfig{});
    } else if (k == "gmm") {
      j = cdt::to_json(cdt::GmmSpec{});
    } else {
      cdt::fail(cdt::ErrorCode::bad_config,
                "unknown config kind '" + k + "'");
    }
    *out = make_report(j.dump(2));
    return CDT_OK;
  });
}

/* ---- datasets ---------------------------------------------------------- */

cdt_status cdt_dataset_generate(const char* shift_spec_json, uint64_t seed,
                                cdt_dataset** source_out,
                                cdt_dataset** target_out) {
  if (!source_out || !target_out) return invalid("null output pointer");
  return guarded([&] {
    const cdt::ShiftSpec spec =
        shift_spec_json && *shift_spec_json
            ? cdt::shift_spec_from_json(
                  cdt::parse_json(shift_spec_json, "shift spec"))
            : cdt::ShiftSpec{};
    cdt::Rng rng(seed);
    auto [src, tgt] = cdt::generate_domain_pair(spec, rng);
    *source_out = new cdt_dataset{std::move(src)};
    *target_out = new cdt_dataset{std::move(tgt)};
    return CDT_OK;
  });
}

cdt_status cdt_dataset_load(const char* path, cdt_dataset** out) {
  if (!path || !out) return invalid("null argument");
  return guarded([&] {
    *out = new cdt_dataset{cdt::load_dataset(path)};
    return CDT_OK;
  });
}

cdt_status cdt_dataset_save(const cdt_dataset* ds, const char* path) {
  if (!ds || !path) return invalid("null argument");
  return guarded([&] {
    cdt::save_dataset(ds->ds, path);
    return CDT_OK;
  });
}

cdt_status cdt_dataset_export_csv(const cdt_dataset* ds, const char* path) {
  if (!ds || !path) return invalid("null argument");
  return guarded([&] {
    cdt::export_dataset_csv(ds->ds, path);
    return CDT_OK;
  });
}

void cdt_dataset_free(cdt_dataset* ds) { delete ds; }

size_t cdt_dataset_size(const cdt_dataset* ds) {
  return ds ? ds->ds.size() : 0;
}

size_t cdt_dataset_classes(const cdt_dataset* ds) {
  return ds ? ds->ds.classes : 0;
}

size_t cdt_dataset_sample_dim(const cdt_dataset* ds) {
  return ds ? ds->ds.sample_dim() : 0;
}

cdt_status cdt_dataset_sample(const cdt_dataset* ds, size_t index,
                              double* buffer, size_t buffer_len,
                              int* label_out) {
  if (!ds || !buffer || !label_out) return invalid("null argument");
  return guarded([&] {
    if (index >= ds->ds.size()) {
      cdt::fail(cdt::ErrorCode::invalid_argument,
                "sample index out of range");
    }
    if (buffer_len < ds->ds.sample_dim()) {
      cdt::fail(cdt::ErrorCode::invalid_argument, "buffer too small");
    }
    const std::vector<double> row = ds->ds.samples.row_vec(index);
    std::memcpy(buffer, row.data(), row.size() * sizeof(double));
    *label_out = ds->ds.labels[index];
    return CDT_OK;
  });
}

/* ---- models ------------------------------------------------------------ */

cdt_status cdt_model_create(const char* model_config_json, uint64_t seed,
                            cdt_model** out) {
  if (!out) return invalid("null output pointer");
  return guarded([&] {
    const cdt::ModelConfig cfg =
        model_config_json && *model_config_json
            ? cdt::model_config_from_json(
                  cdt::parse_json(model_config_json, "model config"))
            : cdt::ModelConfig{};
    cdt::Rng rng = cdt::Rng(seed).derive(0x696e6974);
    *out = new cdt_model{cdt::ModelParams::init(cfg, rng)};
    return CDT_OK;
  });
}

cdt_status cdt_model_load(const char* path, cdt_model** out) {
  if (!path || !out) return invalid("null argument");
  return guarded([&] {
    *out = new cdt_model{cdt::load_model(path)};
    return CDT_OK;
  });
}

cdt_status cdt_model_save(const cdt_model* model, const char* path) {
  if (!model || !path) return invalid("null argument");
  return guarded([&] {
    cdt::save_model(model->params, path);
    return CDT_OK;
  });
}

void cdt_model_free(cdt_model* model) { delete model; }

cdt_status cdt_model_predict(const cdt_model* model, const double* sample,
                             size_t sample_len, int* class_out) {
  if (!model || !sample || !class_out) return invalid("null argument");
  return guarded([&] {
    const std::vector<double> x(sample, sample + sample_len);
    *class_out = static_cast<int>(cdt::predict(model->params, x));
    return CDT_OK;
  });
}

cdt_status cdt_model_evaluate(const cdt_model* model, const cdt_dataset* data,
                              cdt_report** report_out) {
  if (!model || !data || !report_out) return invalid("null argument");
  return guarded([&] {
    const cdt::EvalResult r = cdt::evaluate(model->params, data->ds);
    *report_out = make_report(eval_to_json(r).dump(2));
    return CDT_OK;
  });
}

cdt_status cdt_model_pretrain(cdt_model* model, const cdt_dataset* source,
                              const cdt_dataset* target_eval,
                              const char* train_config_json,
                              const char* metrics_jsonl_path,
                              const char* metrics_csv_path,
                              cdt_report** report_out) {
  if (!model || !source) return invalid("null argument");
  return guarded([&] {
    const cdt::TrainConfig cfg = parse_train_config(train_config_json);
    const std::vector<cdt::MetricsRecord> metrics = cdt::pretrain_source(
        model->params, source->ds, target_eval ? &target_eval->ds : nullptr,
        cfg);
    if (metrics_jsonl_path && metrics_csv_path) {
      cdt::write_metrics(metrics, metrics_jsonl_path, metrics_csv_path);
    }
    if (report_out) {
      nlohmann::json j;
      j["epochs"] = cfg.epochs;
      j["final_loss"] = metrics.back().loss_total;
      j["source_accuracy"] =
          cdt::evaluate(model->params, source->ds).accuracy;
      if (target_eval) {
        j["target_accuracy"] =
            cdt::evaluate(model->params, target_eval->ds).accuracy;
      }
      *report_out = make_report(j.dump(2));
    }
    return CDT_OK;
  });
}

cdt_status cdt_model_attention_csv(const cdt_model* model,
                                   const cdt_dataset* source,
                                   size_t source_index,
                                   const cdt_dataset* target,
                                   size_t target_index, size_t layer,
                                   const char* csv_path) {
  if (!model || !source || !target || !csv_path) {
    return invalid("null argument");
  }
  return guarded([&] {
    if (source_index >= source->ds.size() ||
        target_index >= target->ds.size()) {
      cdt::fail(cdt::ErrorCode::invalid_argument,
                "sample index out of range");
    }
    const cdt::Matrix w = cdt::cross_attention_weight_map(
        model->params, source->ds.samples.row_vec(source_index),
        target->ds.samples.row_vec(target_index), layer);
    cdt::CsvWriter csv(csv_path);
    std::vector<std::string> header;
    for (std::size_t c = 0; c < w.cols(); ++c) {
      header.push_back("t" + std::to_string(c));
    }
    csv.header(header);
    for (std::size_t r = 0; r < w.rows(); ++r) {
      std::vector<std::string> cells;
      for (std::size_t c = 0; c < w.cols(); ++c) {
        cells.push_back(cdt::format_double(w(r, c)));
      }
      csv.row(cells);
    }
    return CDT_OK;
  });
}

/* ---- pairs -------------------------------------------------------------- */

cdt_status cdt_pairs_build(const cdt_model* model, const cdt_dataset* source,
                           const cdt_dataset* target, const char* variant,
                           const char* metric, cdt_pairset** out) {
  if (!model || !source || !target || !variant || !out) {
    return invalid("null argument");
  }
  return guarded([&] {
    const cdt::Metric m =
        metric && *metric ? cdt::metric_from_name(metric) : cdt::Metric::cosine;
    const std::string v = variant;
    cdt::PairVariant pv;
    if (v == "one_way_source") {
      pv = cdt::PairVariant::one_way_source;
    } else if (v == "one_way_target") {
      pv = cdt::PairVariant::one_way_target;
    } else if (v == "two_way") {
      pv = cdt::PairVariant::two_way;
    } else if (v == "two_way_center_aware") {
      pv = cdt::PairVariant::two_way_center_aware;
    } else {
      cdt::fail(cdt::ErrorCode::bad_config,
                "unknown pair variant '" + v + "'");
    }
    const cdt::FeatureBank src_bank =
        cdt::extract_features(model->params, source->ds, true);
    const cdt::FeatureBank tgt_bank =
        cdt::extract_features(model->params, target->ds, false);
    *out = new cdt_pairset{cdt::build_variant(pv, src_bank, tgt_bank, m)};
    return CDT_OK;
  });
}

cdt_status cdt_pairs_ground_truth(const cdt_dataset* source,
                                  const cdt_dataset* target, uint64_t seed,
                                  cdt_pairset** out) {
  if (!source || !target || !out) return invalid("null argument");
  return guarded([&] {
    cdt::Rng rng(seed);
    *out = new cdt_pairset{
        cdt::ground_truth_pairs(source->ds, target->ds, rng)};
    return CDT_OK;
  });
}

cdt_status cdt_pairs_corrupt(cdt_pairset* pairs, const cdt_dataset* target,
                             double ratio, uint64_t seed) {
  if (!pairs || !target) return invalid("null argument");
  return guarded([&] {
    cdt::Rng rng(seed);
    cdt::corrupt_pairs(pairs->pairs, target->ds.labels, ratio, rng);
    return CDT_OK;
  });
}

cdt_status cdt_pairs_load_csv(const char* path, cdt_pairset** out) {
  if (!path || !out) return invalid("null argument");
  return guarded([&] {
    *out = new cdt_pairset{cdt::load_pairs_csv(path)};
    return CDT_OK;
  });
}

cdt_status cdt_pairs_save_csv(const cdt_pairset* pairs, const char* path) {
  if (!pairs || !path) return invalid("null argument");
  return guarded([&] {
    cdt::save_pairs_csv(pairs->pairs, path);
    return CDT_OK;
  });
}

void cdt_pairs_free(cdt_pairset* pairs) { delete pairs; }

size_t cdt_pairs_size(const cdt_pairset* pairs) {
  return pairs ? pairs->pairs.size() : 0;
}

size_t cdt_pairs_kept(const cdt_pairset* pairs) {
  return pairs ? pairs->pairs.kept_count() : 0;
}

cdt_status cdt_pairs_metrics(const cdt_pairset* pairs,
                             const cdt_dataset* source,
                             const cdt_dataset* target, cdt_report** out) {
  if (!pairs || !source || !target || !out) return invalid("null argument");
  return guarded([&] {
    const cdt::PairQuality q =
        cdt::pair_metrics(pairs->pairs, source->ds.size(), target->ds.size(),
                          target->ds.labels);
    *out = make_report(quality_to_json(q).dump(2));
    return CDT_OK;
  });
}

/* ---- training and experiments ------------------------------------------ */

cdt_status cdt_train(cdt_model* model, const cdt_pairset* pairs,
                     const cdt_dataset* source, const cdt_dataset* target,
                     const char* train_config_json,
                     const char* metrics_jsonl_path,
                     const char* metrics_csv_path, cdt_report** report_out) {
  if (!model || !pairs || !source || !target) return invalid("null argument");
  return guarded([&] {
    const cdt::TrainConfig cfg = parse_train_config(train_config_json);
    const std::vector<cdt::MetricsRecord> metrics = cdt::train_cdtrans(
        model->params, pairs->pairs, source->ds, target->ds, cfg);
    if (metrics_jsonl_path && metrics_csv_path) {
      cdt::write_metrics(metrics, metrics_jsonl_path, metrics_csv_path);
    }
    if (report_out) {
      nlohmann::json j;
      j["epochs"] = cfg.epochs;
      j["kept_pairs"] = pairs->pairs.kept_count();
      j["final_loss"] = metrics.back().loss_total;
      j["target_accuracy"] =
          cdt::evaluate(model->params, target->ds).accuracy;
      *report_out = make_report(j.dump(2));
    }
    return CDT_OK;
  });
}

cdt_status cdt_run_pseudolabel_table(const cdt_model* model,
                                     const cdt_dataset* source,
                                     const cdt_dataset* target,
                                     const char* metric,
                                     const char* table_csv_path,
                                     cdt_report** out) {
  if (!model || !source || !target) return invalid("null argument");
  return guarded([&] {
    const cdt::Metric m =
        metric && *metric ? cdt::metric_from_name(metric) : cdt::Metric::cosine;
    const std::vector<cdt::PairVariantResult> rows =
        cdt::pseudolabel_variants(model->params, source->ds, target->ds, m);
    if (table_csv_path) cdt::save_variant_table_csv(rows, table_csv_path);
    if (out) {
      nlohmann::json j = nlohmann::json::array();
      for (const cdt::PairVariantResult& r : rows) {
        nlohmann::json row;
        row["variant"] = cdt::variant_name(r.variant);
        row["quality"] = quality_to_json(r.quality);
        j.push_back(row);
      }
      *out = make_report(j.dump(2));
    }
    return CDT_OK;
  });
}

cdt_status cdt_run_loss_ablation(const cdt_model* model,
                                 const cdt_pairset* pairs,
                                 const cdt_dataset* source,
                                 const cdt_dataset* target,
                                 const char* train_config_json,
                                 const char* table_csv_path,
                                 cdt_report** out) {
  if (!model || !pairs || !source || !target) return invalid("null argument");
  return guarded([&] {
    const cdt::TrainConfig cfg = parse_train_config(train_config_json);
    const std::vector<cdt::AblationResult> rows = cdt::loss_ablation(
        model->params, pairs->pairs, source->ds, target->ds, cfg);
    if (table_csv_path) cdt::save_ablation_csv(rows, table_csv_path);
    if (out) {
      nlohmann::json j = nlohmann::json::array();
      for (const cdt::AblationResult& r : rows) {
        nlohmann::json row;
        row["row"] = r.name;
        row["target_accuracy"] = r.target_accuracy;
        row["per_class"] = r.per_class;
        j.push_back(row);
      }
      *out = make_report(j.dump(2));
    }
    return CDT_OK;
  });
}

cdt_status cdt_run_noise_sweep(const cdt_model* model,
                               const cdt_dataset* source,
                               const cdt_dataset* target,
                               const double* ratios, size_t ratio_count,
                               const char* train_config_json, uint64_t seed,
                               const char* curves_csv_path,
                               cdt_report** out) {
  if (!model || !source || !target || (!ratios && ratio_count)) {
    return invalid("null argument");
  }
  return guarded([&] {
    std::vector<double> grid(ratios, ratios + ratio_count);
    if (grid.empty()) {
      grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
    }
    const cdt::TrainConfig cfg = parse_train_config(train_config_json);
    cdt::Rng rng(seed);
    const std::vector<cdt::NoiseSweepPoint> points = cdt::noise_sweep(
        model->params, source->ds, target->ds, grid, cfg, rng);
    if (curves_csv_path) cdt::save_noise_sweep_csv(points, curves_csv_path);
    if (out) {
      nlohmann::json j = nlohmann::json::array();
      for (const cdt::NoiseSweepPoint& p : points) {
        nlohmann::json row;
        row["ratio"] = p.ratio;
        row["cross_attention"] = p.cross_accuracy;
        row["direct_label"] = p.direct_accuracy;
        row["oracle"] = p.oracle_accuracy;
        j.push_back(row);
      }
      *out = make_report(j.dump(2));
    }
    return CDT_OK;
  });
}

/* ---- simulator ----------------------------------------------------------- */

namespace {

cdt_status finish_theorem(const cdt::TheoremReport& report,
                          const char* report_json_path, cdt_report** out) {
  if (report_json_path) cdt::save_report_json(report, report_json_path);
  if (out) *out = make_report(cdt::report_to_json(report));
  if (!report.conditions_met) {
    g_last_error = report.theorem + ": printed preconditions are not met";
    return CDT_ERR_CONDITIONS_UNMET;
  }
  if (!report.passed) {
    g_last_error = report.theorem + ": failure rate " +
                   std::to_string(report.failure_rate) +
                   " exceeds budget " +
                   std::to_string(report.probability_budget);
    return CDT_ERR_ASSERTION;
  }
  return CDT_OK;
}

}  // namespace

cdt_status cdt_verify_theorem1(const char* gmm_spec_json, size_t trials,
                               uint64_t seed, size_t threads,
                               const char* report_json_path,
                               cdt_report** out) {
  return guarded([&] {
    const cdt::GmmSpec spec =
        gmm_spec_json && *gmm_spec_json
            ? cdt::gmm_spec_from_json(
                  cdt::parse_json(gmm_spec_json, "gmm spec"))
            : cdt::GmmSpec{};
    const cdt::TheoremReport report =
        cdt::verify_theorem1(spec, trials, cdt::Rng(seed), threads);
    return finish_theorem(report, report_json_path, out);
  });
}

cdt_status cdt_verify_theorem2(const char* gmm_spec_json, size_t trials,
                               uint64_t seed, size_t threads,
                               const char* report_json_path,
                               cdt_report** out) {
  return guarded([&] {
    const cdt::GmmSpec spec =
        gmm_spec_json && *gmm_spec_json
            ? cdt::gmm_spec_from_json(
                  cdt::parse_json(gmm_spec_json, "gmm spec"))
            : cdt::GmmSpec{};
    const cdt::TheoremReport report =
        cdt::verify_theorem2(spec, trials, cdt::Rng(seed), threads);
    return finish_theorem(report, report_json_path, out);
  });
}

cdt_status cdt_sweep_lambda(const char* gmm_spec_json, const double* lambdas,
                            size_t count, size_t trials, uint64_t seed,
                            const char* csv_path) {
  if (!lambdas || !count || !csv_path) return invalid("null argument");
  return guarded([&] {
    const cdt::GmmSpec spec = cdt::gmm_spec_from_json(
        cdt::parse_json(gmm_spec_json ? gmm_spec_json : "{}", "gmm spec"));
    const std::vector<double> grid(lambdas, lambdas + count);
    const std::vector<cdt::SweepPoint> points =
        cdt::sweep_lambda(spec, grid, trials, cdt::Rng(seed));
    cdt::save_sweep_csv(points, "lambda", csv_path);
    return CDT_OK;
  });
}

cdt_status cdt_sweep_k(const char* gmm_spec_json, const uint64_t* ks,
                       size_t count, size_t trials, uint64_t seed,
                       const char* csv_path) {
  if (!ks || !count || !csv_path) return invalid("null argument");
  return guarded([&] {
    const cdt::GmmSpec spec = cdt::gmm_spec_from_json(
        cdt::parse_json(gmm_spec_json ? gmm_spec_json : "{}", "gmm spec"));
    std::vector<std::size_t> grid(ks, ks + count);
    const std::vector<cdt::SweepPoint> points =
        cdt::sweep_k(spec, grid, trials, cdt::Rng(seed));
    cdt::save_sweep_csv(points, "k", csv_path);
    return CDT_OK;
  });
}

/* ---- reports ------------------------------------------------------------ */

const char* cdt_report_json(const cdt_report* report) {
  return report ? report->json.c_str() : "";
}

void cdt_report_free(cdt_report* report) { delete report; }

}  // extern "C"
