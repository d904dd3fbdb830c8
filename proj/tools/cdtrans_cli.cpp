// Command-line front end. Everything goes through the shared C API; this
// translation unit only parses flags, resolves configuration and maps
// statuses to exit codes.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cdtrans/cdtrans.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Exit codes: 0 ok, 2 bad config, 3 missing/bad input file, 4 statistical
// assertion failed, 5 theorem preconditions unmet, 1 anything else.
int exit_code_for(cdt_status status) {
  switch (status) {
    case CDT_OK:
      return 0;
    case CDT_ERR_CONFIG:
    case CDT_ERR_INVALID_ARGUMENT:
      return 2;
    case CDT_ERR_IO:
    case CDT_ERR_FORMAT:
    case CDT_ERR_TRUNCATED:
      return 3;
    case CDT_ERR_ASSERTION:
      return 4;
    case CDT_ERR_CONDITIONS_UNMET:
      return 5;
    default:
      return 1;
  }
}

struct CliError {
  int code;
  std::string message;
};

[[noreturn]] void bail(cdt_status status, const std::string& context) {
  throw CliError{exit_code_for(status),
                 context + ": " + cdt_status_name(status) + ": " +
                     cdt_last_error()};
}

void check(cdt_status status, const std::string& context) {
  if (status != CDT_OK) bail(status, context);
}

struct ReportPtr {
  cdt_report* ptr = nullptr;
  ~ReportPtr() { cdt_report_free(ptr); }
  cdt_report** out() { return &ptr; }
  std::string str() const { return ptr ? cdt_report_json(ptr) : ""; }
  json parsed() const { return json::parse(str()); }
};

struct DatasetPtr {
  cdt_dataset* ptr = nullptr;
  ~DatasetPtr() { cdt_dataset_free(ptr); }
};
struct ModelPtr {
  cdt_model* ptr = nullptr;
  ~ModelPtr() { cdt_model_free(ptr); }
};
struct PairsPtr {
  cdt_pairset* ptr = nullptr;
  ~PairsPtr() { cdt_pairs_free(ptr); }
};

json default_section(const char* kind) {
  ReportPtr r;
  check(cdt_default_config(kind, r.out()), "defaults");
  return r.parsed();
}

void deep_merge(json& base, const json& patch) {
  if (!patch.is_object() || !base.is_object()) {
    base = patch;
    return;
  }
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (base.contains(it.key())) {
      deep_merge(base[it.key()], it.value());
    } else {
      base[it.key()] = it.value();
    }
  }
}

// Shared options: config file, output directory, seed, key=value overrides.
struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "JSON config file");
  cmd->add_option("--out", opts.out_dir, "output directory");
  cmd->add_option("--seed", opts.seed, "seed override")
      ->each([&](const std::string&) { opts.seed_given = true; });
  cmd->add_option("--set", opts.overrides,
                  "config override as dotted.key=value (repeatable)");
}

void apply_set(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw CliError{2, "--set expects key=value, got '" + assignment + "'"};
  }
  std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  json* cursor = &cfg;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(
        start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw CliError{2, "--set has an empty key segment"};
    if (dot == std::string::npos) {
      (*cursor)[key] = value;
      return;
    }
    cursor = &(*cursor)[key];
    start = dot + 1;
  }
}

// Builds the resolved config: defaults <- file <- --set <- --seed.
json resolve_config(const CommonOpts& opts,
                    const std::vector<const char*>& sections) {
  json cfg;
  cfg["seed"] = 0;
  for (const char* s : sections) cfg[s] = default_section(s);
  if (!opts.config_path.empty()) {
    std::ifstream is(opts.config_path);
    if (!is) {
      throw CliError{3, "cannot open config file " + opts.config_path};
    }
    json file_cfg;
    try {
      is >> file_cfg;
    } catch (const json::exception& e) {
      throw CliError{2, std::string("config file is not valid JSON: ") +
                            e.what()};
    }
    deep_merge(cfg, file_cfg);
  }
  for (const std::string& o : opts.overrides) apply_set(cfg, o);
  if (opts.seed_given) cfg["seed"] = opts.seed;
  return cfg;
}

fs::path prepare_out_dir(const CommonOpts& opts, const char* command,
                         const json& resolved) {
  fs::path dir;
  if (!opts.out_dir.empty()) {
    dir = opts.out_dir;
  } else if (const char* root = std::getenv("CDTRANS_OUT")) {
    dir = fs::path(root) / command;
  } else {
    dir = fs::path("out") / command;
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec && !fs::exists(dir)) {
    throw CliError{3, "cannot create output directory " + dir.string()};
  }
  std::ofstream os(dir / "config.json");
  os << resolved.dump(2) << '\n';
  if (!os) throw CliError{3, "cannot write resolved config"};
  return dir;
}

std::uint64_t seed_of(const json& cfg) {
  return cfg.at("seed").get<std::uint64_t>();
}

std::string section(const json& cfg, const char* name) {
  return cfg.at(name).dump();
}

// Paths of input artifacts, overridable via config "inputs" or flags.
struct InputPaths {
  std::string source, target, checkpoint, pairs;
};

void add_input_flags(CLI::App* cmd, InputPaths& in, bool model_too,
                     bool pairs_too) {
  cmd->add_option("--source", in.source, "source dataset file");
  cmd->add_option("--target", in.target, "target dataset file");
  if (model_too) {
    cmd->add_option("--checkpoint", in.checkpoint, "model checkpoint file");
  }
  if (pairs_too) {
    cmd->add_option("--pairs", in.pairs, "pair csv file");
  }
}

void require_path(const std::string& p, const char* what) {
  if (p.empty()) {
    throw CliError{2, std::string("missing required --") + what};
  }
  if (!fs::exists(p)) {
    throw CliError{3, std::string(what) + " file not found: " + p};
  }
}

void load_dataset_pair(const InputPaths& in, DatasetPtr& src,
                       DatasetPtr& tgt) {
  require_path(in.source, "source");
  require_path(in.target, "target");
  check(cdt_dataset_load(in.source.c_str(), &src.ptr), "load source");
  check(cdt_dataset_load(in.target.c_str(), &tgt.ptr), "load target");
}

void summarize(const std::string& title, const ReportPtr& report) {
  std::cout << title << "\n" << report.str() << "\n";
}

/* ---- commands ----------------------------------------------------------- */

int cmd_gen_data(const CommonOpts& opts) {
  const json cfg = resolve_config(opts, {"shift"});
  const fs::path dir = prepare_out_dir(opts, "gen-data", cfg);
  DatasetPtr src, tgt;
  check(cdt_dataset_generate(section(cfg, "shift").c_str(), seed_of(cfg),
                             &src.ptr, &tgt.ptr),
        "gen-data");
  check(cdt_dataset_save(src.ptr, (dir / "source.ds").string().c_str()),
        "save source");
  check(cdt_dataset_save(tgt.ptr, (dir / "target.ds").string().c_str()),
        "save target");
  std::cout << "gen-data: wrote " << (dir / "source.ds").string() << " ("
            << cdt_dataset_size(src.ptr) << " samples) and "
            << (dir / "target.ds").string() << " ("
            << cdt_dataset_size(tgt.ptr) << " samples)\n";
  return 0;
}

int cmd_pretrain(const CommonOpts& opts, const InputPaths& in) {
  const json cfg = resolve_config(opts, {"model", "train"});
  const fs::path dir = prepare_out_dir(opts, "pretrain", cfg);
  DatasetPtr src, tgt;
  load_dataset_pair(in, src, tgt);

  ModelPtr model;
  check(cdt_model_create(section(cfg, "model").c_str(), seed_of(cfg),
                         &model.ptr),
        "create model");
  json train_cfg = cfg.at("train");
  train_cfg["seed"] = seed_of(cfg);
  ReportPtr report;
  check(cdt_model_pretrain(model.ptr, src.ptr, tgt.ptr,
                           train_cfg.dump().c_str(),
                           (dir / "metrics.jsonl").string().c_str(),
                           (dir / "metrics.csv").string().c_str(),
                           report.out()),
        "pretrain");
  check(cdt_model_save(model.ptr, (dir / "checkpoint.ckpt").string().c_str()),
        "save checkpoint");
  summarize("pretrain:", report);
  return 0;
}

int cmd_pseudolabel(const CommonOpts& opts, const InputPaths& in,
                    const std::string& variant, const std::string& metric) {
  json cfg = resolve_config(opts, {});
  cfg["variant"] = variant;
  cfg["metric"] = metric;
  const fs::path dir = prepare_out_dir(opts, "pseudolabel", cfg);
  DatasetPtr src, tgt;
  load_dataset_pair(in, src, tgt);
  require_path(in.checkpoint, "checkpoint");
  ModelPtr model;
  check(cdt_model_load(in.checkpoint.c_str(), &model.ptr), "load checkpoint");

  ReportPtr table;
  check(cdt_run_pseudolabel_table(model.ptr, src.ptr, tgt.ptr, metric.c_str(),
                                  (dir / "variants.csv").string().c_str(),
                                  table.out()),
        "pseudolabel table");
  PairsPtr pairs;
  check(cdt_pairs_build(model.ptr, src.ptr, tgt.ptr, variant.c_str(),
                        metric.c_str(), &pairs.ptr),
        "build pairs");
  check(cdt_pairs_save_csv(pairs.ptr, (dir / "pairs.csv").string().c_str()),
        "save pairs");
  summarize("pseudolabel variants:", table);
  std::cout << "selected variant: " << variant << " ("
            << cdt_pairs_kept(pairs.ptr) << "/" << cdt_pairs_size(pairs.ptr)
            << " pairs kept)\n";
  return 0;
}

int cmd_train(const CommonOpts& opts, const InputPaths& in, bool ablation) {
  const json cfg = resolve_config(opts, {"train"});
  const fs::path dir = prepare_out_dir(opts, "train", cfg);
  DatasetPtr src, tgt;
  load_dataset_pair(in, src, tgt);
  require_path(in.checkpoint, "checkpoint");
  require_path(in.pairs, "pairs");
  ModelPtr model;
  check(cdt_model_load(in.checkpoint.c_str(), &model.ptr), "load checkpoint");
  PairsPtr pairs;
  check(cdt_pairs_load_csv(in.pairs.c_str(), &pairs.ptr), "load pairs");

  json train_cfg = cfg.at("train");
  train_cfg["seed"] = seed_of(cfg);

  if (ablation) {
    ReportPtr report;
    check(cdt_run_loss_ablation(model.ptr, pairs.ptr, src.ptr, tgt.ptr,
                                train_cfg.dump().c_str(),
                                (dir / "ablation.csv").string().c_str(),
                                report.out()),
          "loss ablation");
    summarize("loss ablation:", report);
    return 0;
  }

  ReportPtr report;
  check(cdt_train(model.ptr, pairs.ptr, src.ptr, tgt.ptr,
                  train_cfg.dump().c_str(),
                  (dir / "metrics.jsonl").string().c_str(),
                  (dir / "metrics.csv").string().c_str(), report.out()),
        "train");
  check(cdt_model_save(model.ptr, (dir / "checkpoint.ckpt").string().c_str()),
        "save checkpoint");
  summarize("train:", report);
  return 0;
}

int cmd_noise_sweep(const CommonOpts& opts, const InputPaths& in) {
  json cfg = resolve_config(opts, {"train"});
  if (!cfg.contains("ratios")) {
    cfg["ratios"] = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  }
  const fs::path dir = prepare_out_dir(opts, "noise-sweep", cfg);
  DatasetPtr src, tgt;
  load_dataset_pair(in, src, tgt);
  require_path(in.checkpoint, "checkpoint");
  ModelPtr model;
  check(cdt_model_load(in.checkpoint.c_str(), &model.ptr), "load checkpoint");

  const std::vector<double> ratios =
      cfg.at("ratios").get<std::vector<double>>();
  json train_cfg = cfg.at("train");
  train_cfg["seed"] = seed_of(cfg);
  ReportPtr report;
  check(cdt_run_noise_sweep(model.ptr, src.ptr, tgt.ptr, ratios.data(),
                            ratios.size(), train_cfg.dump().c_str(),
                            seed_of(cfg),
                            (dir / "curves.csv").string().c_str(),
                            report.out()),
        "noise sweep");
  summarize("noise sweep:", report);
  return 0;
}

int cmd_denoise(const CommonOpts& opts) {
  json cfg = resolve_config(opts, {"gmm"});
  if (!cfg.contains("trials")) cfg["trials"] = 400;
  if (!cfg.contains("threads")) cfg["threads"] = 0;
  const fs::path dir = prepare_out_dir(opts, "denoise", cfg);
  const auto trials = cfg.at("trials").get<std::size_t>();
  const auto threads = cfg.at("threads").get<std::size_t>();
  const std::string spec = section(cfg, "gmm");

  ReportPtr r1, r2;
  const cdt_status s1 = cdt_verify_theorem1(
      spec.c_str(), trials, seed_of(cfg), threads,
      (dir / "theorem1.json").string().c_str(), r1.out());
  if (s1 != CDT_OK && s1 != CDT_ERR_CONDITIONS_UNMET &&
      s1 != CDT_ERR_ASSERTION) {
    bail(s1, "theorem1");
  }
  summarize("theorem1:", r1);

  const cdt_status s2 = cdt_verify_theorem2(
      spec.c_str(), trials, seed_of(cfg), threads,
      (dir / "theorem2.json").string().c_str(), r2.out());
  if (s2 != CDT_OK && s2 != CDT_ERR_CONDITIONS_UNMET &&
      s2 != CDT_ERR_ASSERTION) {
    bail(s2, "theorem2");
  }
  summarize("theorem2:", r2);

  if (cfg.contains("lambda_grid")) {
    const auto grid = cfg.at("lambda_grid").get<std::vector<double>>();
    const auto sweep_trials =
        cfg.contains("sweep_trials")
            ? cfg.at("sweep_trials").get<std::size_t>()
            : std::size_t{20};
    check(cdt_sweep_lambda(spec.c_str(), grid.data(), grid.size(),
                           sweep_trials, seed_of(cfg),
                           (dir / "lambda_sweep.csv").string().c_str()),
          "lambda sweep");
  }
  if (cfg.contains("k_grid")) {
    const auto grid = cfg.at("k_grid").get<std::vector<std::uint64_t>>();
    const auto sweep_trials =
        cfg.contains("sweep_trials")
            ? cfg.at("sweep_trials").get<std::size_t>()
            : std::size_t{20};
    check(cdt_sweep_k(spec.c_str(), grid.data(), grid.size(), sweep_trials,
                      seed_of(cfg),
                      (dir / "k_sweep.csv").string().c_str()),
          "k sweep");
  }

  // Conditions-unmet outranks assertion failure for the exit code so a
  // misconfigured spec is never mistaken for a falsified bound.
  if (s1 == CDT_ERR_CONDITIONS_UNMET || s2 == CDT_ERR_CONDITIONS_UNMET) {
    return 5;
  }
  if (s1 == CDT_ERR_ASSERTION || s2 == CDT_ERR_ASSERTION) return 4;
  return 0;
}

int cmd_eval(const CommonOpts& opts, const InputPaths& in,
             long attn_source, long attn_target, long attn_layer) {
  const json cfg = resolve_config(opts, {});
  const fs::path dir = prepare_out_dir(opts, "eval", cfg);
  require_path(in.checkpoint, "checkpoint");
  require_path(in.target, "target");
  ModelPtr model;
  check(cdt_model_load(in.checkpoint.c_str(), &model.ptr), "load checkpoint");
  DatasetPtr tgt;
  check(cdt_dataset_load(in.target.c_str(), &tgt.ptr), "load target");

  ReportPtr report;
  check(cdt_model_evaluate(model.ptr, tgt.ptr, report.out()), "evaluate");
  summarize("eval:", report);
  {
    std::ofstream os(dir / "eval.json");
    os << report.str() << '\n';
  }

  if (attn_source >= 0 && attn_target >= 0) {
    require_path(in.source, "source");
    DatasetPtr src;
    check(cdt_dataset_load(in.source.c_str(), &src.ptr), "load source");
    const fs::path csv = dir / "attention.csv";
    check(cdt_model_attention_csv(
              model.ptr, src.ptr, static_cast<std::size_t>(attn_source),
              tgt.ptr, static_cast<std::size_t>(attn_target),
              static_cast<std::size_t>(attn_layer < 0 ? 0 : attn_layer),
              csv.string().c_str()),
          "attention export");
    std::cout << "attention weights written to " << csv.string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-domain transformer toolkit"};
  app.require_subcommand(1);

  CommonOpts gen_opts, pre_opts, pl_opts, train_opts, sweep_opts, den_opts,
      eval_opts;
  InputPaths pre_in, pl_in, train_in, sweep_in, eval_in;
  std::string pl_variant = "two_way_center_aware";
  std::string pl_metric = "cosine";
  bool ablation = false;
  long attn_source = -1, attn_target = -1, attn_layer = -1;

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic source/target pair");
  add_common(gen, gen_opts);

  CLI::App* pre = app.add_subcommand("pretrain", "source-only baseline training");
  add_common(pre, pre_opts);
  add_input_flags(pre, pre_in, false, false);

  CLI::App* pl = app.add_subcommand("pseudolabel", "two-way center-aware pair construction");
  add_common(pl, pl_opts);
  add_input_flags(pl, pl_in, true, false);
  pl->add_option("--variant", pl_variant,
                 "one_way_source|one_way_target|two_way|two_way_center_aware");
  pl->add_option("--metric", pl_metric, "cosine|euclidean");

  CLI::App* tr = app.add_subcommand("train", "triple-branch training on pairs");
  add_common(tr, train_opts);
  add_input_flags(tr, train_in, true, true);
  tr->add_flag("--ablation", ablation, "run the loss-ablation matrix instead");

  CLI::App* sw = app.add_subcommand("noise-sweep", "corruption-robustness curves");
  add_common(sw, sweep_opts);
  add_input_flags(sw, sweep_in, true, false);

  CLI::App* dn = app.add_subcommand("denoise", "Gaussian-mixture smoothing checks");
  add_common(dn, den_opts);

  CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  add_common(ev, eval_opts);
  add_input_flags(ev, eval_in, true, false);
  ev->add_option("--attn-source", attn_source, "source sample for weight export");
  ev->add_option("--attn-target", attn_target, "target sample for weight export");
  ev->add_option("--attn-layer", attn_layer, "layer for weight export");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(gen_opts);
    if (pre->parsed()) return cmd_pretrain(pre_opts, pre_in);
    if (pl->parsed()) {
      return cmd_pseudolabel(pl_opts, pl_in, pl_variant, pl_metric);
    }
    if (tr->parsed()) return cmd_train(train_opts, train_in, ablation);
    if (sw->parsed()) return cmd_noise_sweep(sweep_opts, sweep_in);
    if (dn->parsed()) return cmd_denoise(den_opts);
    if (ev->parsed()) {
      return cmd_eval(eval_opts, eval_in, attn_source, attn_target,
                      attn_layer);
    }
  } catch (const CliError& e) {
    std::cerr << "error: " << e.message << "\n";
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
