#include "core/config.hpp"

#include <fstream>
#include <set>

#include "core/error.hpp"

namespace cdt {

namespace {

void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                const std::string& what) {
  if (!j.is_object()) {
    fail(ErrorCode::bad_config, what + ": expected a JSON object");
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) {
      fail(ErrorCode::bad_config,
           what + ": unknown key '" + it.key() + "'");
    }
  }
}

template <class T>
void get_if(const nlohmann::json& j, const char* key, T& out,
            const std::string& what) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::bad_config,
         what + ": bad value for '" + key + "': " + e.what());
  }
}

}  // namespace

nlohmann::json to_json(const ShiftSpec& spec) {
  nlohmann::json j;
  j["class_count"] = spec.class_count;
  j["tokens"] = spec.tokens;
  j["patch_dim"] = spec.patch_dim;
  j["samples_per_class"] = spec.samples_per_class;
  j["rotation_angle"] = spec.rotation_angle;
  j["translation"] = spec.translation;
  j["scale"] = spec.scale;
  j["noise_sigma"] = spec.noise_sigma;
  j["label_noise_ratio"] = spec.label_noise_ratio;
  j["mean_scale"] = spec.mean_scale;
  if (!spec.class_means.empty()) {
    nlohmann::json means = nlohmann::json::array();
    for (std::size_t k = 0; k < spec.class_means.rows(); ++k) {
      means.push_back(spec.class_means.row_vec(k));
    }
    j["class_means"] = means;
  }
  return j;
}

ShiftSpec shift_spec_from_json(const nlohmann::json& j) {
  const std::string what = "shift spec";
  check_keys(j,
             {"class_count", "tokens", "patch_dim", "samples_per_class",
              "rotation_angle", "translation", "scale", "noise_sigma",
              "label_noise_ratio", "mean_scale", "class_means"},
             what);
  ShiftSpec spec;
  get_if(j, "class_count", spec.class_count, what);
  get_if(j, "tokens", spec.tokens, what);
  get_if(j, "patch_dim", spec.patch_dim, what);
  get_if(j, "samples_per_class", spec.samples_per_class, what);
  get_if(j, "rotation_angle", spec.rotation_angle, what);
  get_if(j, "translation", spec.translation, what);
  get_if(j, "scale", spec.scale, what);
  get_if(j, "noise_sigma", spec.noise_sigma, what);
  get_if(j, "label_noise_ratio", spec.label_noise_ratio, what);
  get_if(j, "mean_scale", spec.mean_scale, what);
  if (j.contains("class_means")) {
    const auto& means = j.at("class_means");
    if (!means.is_array() || means.empty()) {
      fail(ErrorCode::bad_config, what + ": class_means must be a 2d array");
    }
    const std::size_t rows = means.size();
    const std::size_t cols = means.at(0).size();
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      const auto row = means.at(r).get<std::vector<double>>();
      if (row.size() != cols) {
        fail(ErrorCode::bad_config, what + ": ragged class_means");
      }
      for (std::size_t c = 0; c < cols; ++c) m(r, c) = row[c];
    }
    spec.class_means = std::move(m);
  }
  spec.validate();
  return spec;
}

nlohmann::json to_json(const ModelConfig& cfg) {
  nlohmann::json j;
  j["patch_count"] = cfg.patch_count;
  j["patch_dim"] = cfg.patch_dim;
  j["width"] = cfg.width;
  j["layers"] = cfg.layers;
  j["heads"] = cfg.heads;
  j["classes"] = cfg.classes;
  j["mlp_hidden"] = cfg.mlp_hidden;
  j["use_cls_token"] = cfg.use_cls_token;
  j["layernorm_eps"] = cfg.layernorm_eps;
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  const std::string what = "model config";
  check_keys(j,
             {"patch_count", "patch_dim", "width", "layers", "heads",
              "classes", "mlp_hidden", "use_cls_token", "layernorm_eps"},
             what);
  ModelConfig cfg;
  get_if(j, "patch_count", cfg.patch_count, what);
  get_if(j, "patch_dim", cfg.patch_dim, what);
  get_if(j, "width", cfg.width, what);
  get_if(j, "layers", cfg.layers, what);
  get_if(j, "heads", cfg.heads, what);
  get_if(j, "classes", cfg.classes, what);
  get_if(j, "mlp_hidden", cfg.mlp_hidden, what);
  get_if(j, "use_cls_token", cfg.use_cls_token, what);
  get_if(j, "layernorm_eps", cfg.layernorm_eps, what);
  cfg.validate();
  return cfg;
}

nlohmann::json to_json(const TrainConfig& cfg) {
  nlohmann::json j;
  j["learning_rate"] = cfg.learning_rate;
  j["momentum"] = cfg.momentum;
  j["weight_decay"] = cfg.weight_decay;
  j["batch_size"] = cfg.batch_size;
  j["epochs"] = cfg.epochs;
  j["seed"] = cfg.seed;
  j["eval_every"] = cfg.eval_every;
  j["loss_source"] = cfg.losses.source;
  j["loss_target"] = cfg.losses.target;
  j["loss_source_target"] = cfg.losses.source_target;
  j["cross_loss"] =
      cfg.losses.cross_kind == CrossLossKind::cls ? "cls" : "dtl";
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  const std::string what = "train config";
  check_keys(j,
             {"learning_rate", "momentum", "weight_decay", "batch_size",
              "epochs", "seed", "eval_every", "loss_source", "loss_target",
              "loss_source_target", "cross_loss"},
             what);
  TrainConfig cfg;
  get_if(j, "learning_rate", cfg.learning_rate, what);
  get_if(j, "momentum", cfg.momentum, what);
  get_if(j, "weight_decay", cfg.weight_decay, what);
  get_if(j, "batch_size", cfg.batch_size, what);
  get_if(j, "epochs", cfg.epochs, what);
  get_if(j, "seed", cfg.seed, what);
  get_if(j, "eval_every", cfg.eval_every, what);
  get_if(j, "loss_source", cfg.losses.source, what);
  get_if(j, "loss_target", cfg.losses.target, what);
  get_if(j, "loss_source_target", cfg.losses.source_target, what);
  if (j.contains("cross_loss")) {
    const std::string kind = j.at("cross_loss").get<std::string>();
    if (kind == "cls") {
      cfg.losses.cross_kind = CrossLossKind::cls;
    } else if (kind == "dtl") {
      cfg.losses.cross_kind = CrossLossKind::dtl;
    } else {
      fail(ErrorCode::bad_config,
           what + ": cross_loss must be 'cls' or 'dtl', got '" + kind + "'");
    }
  }
  cfg.validate();
  return cfg;
}

nlohmann::json to_json(const GmmSpec& spec) {
  nlohmann::json j;
  j["dim"] = spec.dim;
  j["samples"] = spec.samples;
  j["clusters"] = spec.clusters;
  j["sigma"] = spec.sigma;
  j["r_lower"] = spec.r_lower;
  j["r_upper"] = spec.r_upper;
  j["delta"] = spec.delta;
  j["k_neighbors"] = spec.k_neighbors;
  j["lambda"] = spec.lambda;
  j["k_constant"] = spec.k_constant;
  j["center_retry_cap"] = spec.center_retry_cap;
  return j;
}

GmmSpec gmm_spec_from_json(const nlohmann::json& j) {
  const std::string what = "gmm spec";
  check_keys(j,
             {"dim", "samples", "clusters", "sigma", "r_lower", "r_upper",
              "delta", "k_neighbors", "lambda", "k_constant",
              "center_retry_cap"},
             what);
  GmmSpec spec;
  get_if(j, "dim", spec.dim, what);
  get_if(j, "samples", spec.samples, what);
  get_if(j, "clusters", spec.clusters, what);
  get_if(j, "sigma", spec.sigma, what);
  get_if(j, "r_lower", spec.r_lower, what);
  get_if(j, "r_upper", spec.r_upper, what);
  get_if(j, "delta", spec.delta, what);
  get_if(j, "k_neighbors", spec.k_neighbors, what);
  get_if(j, "lambda", spec.lambda, what);
  get_if(j, "k_constant", spec.k_constant, what);
  get_if(j, "center_retry_cap", spec.center_retry_cap, what);
  spec.validate();
  return spec;
}

nlohmann::json parse_json(const std::string& text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::bad_config, what + ": invalid JSON: " + e.what());
  }
}

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::io, "cannot open config file " + path);
  std::string text((std::istreambuf_iterator<char>(is)),
                   std::istreambuf_iterator<char>());
  return parse_json(text, path);
}

void save_json_file(const nlohmann::json& j, const std::string& path) {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::io, "cannot open " + path);
  os << j.dump(2) << '\n';
  if (!os) fail(ErrorCode::io, "failed writing " + path);
}

void apply_override(nlohmann::json& j, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    fail(ErrorCode::bad_config,
         "override must look like key=value, got '" + assignment + "'");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  nlohmann::json* cursor = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(
        start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) {
      fail(ErrorCode::bad_config, "override has an empty key segment");
    }
    if (dot == std::string::npos) {
      nlohmann::json value;
      try {
        value = nlohmann::json::parse(raw);
      } catch (const nlohmann::json::exception&) {
        value = raw;  // plain string value
      }
      (*cursor)[key] = value;
      return;
    }
    cursor = &(*cursor)[key];
    start = dot + 1;
  }
}

}  // namespace cdt
