#include "core/model.hpp"

#include <cmath>

#include "core/error.hpp"

namespace cdt {

void ModelConfig::validate() const {
  if (patch_count == 0 || patch_dim == 0 || width == 0 || heads == 0 ||
      classes == 0) {
    fail(ErrorCode::bad_config, "ModelConfig: all counts must be >= 1");
  }
  if (width % heads != 0) {
    fail(ErrorCode::bad_config,
         "ModelConfig: width " + std::to_string(width) +
             " must be divisible by heads " + std::to_string(heads));
  }
  if (layernorm_eps <= 0.0) {
    fail(ErrorCode::bad_config, "ModelConfig: layernorm_eps must be > 0");
  }
}

ModelParams ModelParams::init(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  constexpr double kInitStd = 0.02;
  ModelParams p;
  p.cfg = cfg;

  auto gauss = [&](std::size_t r, std::size_t c) {
    Matrix m(r, c);
    rng.fill_gaussian(m, kInitStd);
    return m;
  };

  p.patch_proj = gauss(cfg.patch_dim, cfg.width);
  p.patch_bias = Matrix(1, cfg.width);
  p.cls_token = cfg.use_cls_token ? gauss(1, cfg.width) : Matrix(1, cfg.width);
  p.pos_embed = gauss(cfg.token_rows(), cfg.width);

  p.layers.resize(cfg.layers);
  for (LayerParams& l : p.layers) {
    l.ln1_gain = Matrix::filled(1, cfg.width, 1.0);
    l.ln1_bias = Matrix(1, cfg.width);
    l.attn.w_q = gauss(cfg.width, cfg.width);
    l.attn.w_k = gauss(cfg.width, cfg.width);
    l.attn.w_v = gauss(cfg.width, cfg.width);
    l.attn.w_o = gauss(cfg.width, cfg.width);
    l.attn.heads = cfg.heads;
    l.ln2_gain = Matrix::filled(1, cfg.width, 1.0);
    l.ln2_bias = Matrix(1, cfg.width);
    l.mlp_w1 = gauss(cfg.width, cfg.hidden());
    l.mlp_b1 = Matrix(1, cfg.hidden());
    l.mlp_w2 = gauss(cfg.hidden(), cfg.width);
    l.mlp_b2 = Matrix(1, cfg.width);
  }

  p.final_ln_gain = Matrix::filled(1, cfg.width, 1.0);
  p.final_ln_bias = Matrix(1, cfg.width);
  p.classifier_w = gauss(cfg.width, cfg.classes);
  p.classifier_b = Matrix(1, cfg.classes);
  return p;
}

void ModelParams::for_each(const std::function<void(Matrix&)>& fn) {
  fn(patch_proj);
  fn(patch_bias);
  fn(cls_token);
  fn(pos_embed);
  for (LayerParams& l : layers) {
    fn(l.ln1_gain);
    fn(l.ln1_bias);
    fn(l.attn.w_q);
    fn(l.attn.w_k);
    fn(l.attn.w_v);
    fn(l.attn.w_o);
    fn(l.ln2_gain);
    fn(l.ln2_bias);
    fn(l.mlp_w1);
    fn(l.mlp_b1);
    fn(l.mlp_w2);
    fn(l.mlp_b2);
  }
  fn(final_ln_gain);
  fn(final_ln_bias);
  fn(classifier_w);
  fn(classifier_b);
}

void ModelParams::for_each_const(
    const std::function<void(const Matrix&)>& fn) const {
  auto& self = const_cast<ModelParams&>(*this);
  self.for_each([&](Matrix& m) { fn(m); });
}

std::size_t ModelParams::tensor_count() const {
  std::size_t n = 0;
  for_each_const([&](const Matrix&) { ++n; });
  return n;
}

bool ModelParams::same_values(const ModelParams& other) const {
  if (!(cfg == other.cfg)) return false;
  std::vector<const Matrix*> a, b;
  for_each_const([&](const Matrix& m) { a.push_back(&m); });
  other.for_each_const([&](const Matrix& m) { b.push_back(&m); });
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(*a[i] == *b[i])) return false;
  }
  return true;
}

Matrix patchify(const std::vector<double>& sample, const ModelConfig& cfg) {
  if (sample.size() != cfg.sample_dim()) {
    fail(ErrorCode::dimension_mismatch,
         "patchify: sample length " + std::to_string(sample.size()) +
             " does not equal patch_count*patch_dim = " +
             std::to_string(cfg.sample_dim()));
  }
  return Matrix(cfg.patch_count, cfg.patch_dim, sample);
}

Matrix patchify(const Matrix& dataset_row, const ModelConfig& cfg) {
  if (dataset_row.rows() != 1) {
    fail(ErrorCode::invalid_argument, "patchify: expected a single row");
  }
  return patchify(dataset_row.row_vec(0), cfg);
}

std::vector<double> flatten(const Matrix& tokens) {
  std::vector<double> out(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) out[i] = tokens[i];
  return out;
}

ModelParamIds register_model(Tape& tape, const ModelParams& params,
                             bool trainable) {
  ModelParamIds ids;
  auto reg = [&](const Matrix& m) {
    const ValueId id = trainable ? tape.param(m) : tape.constant(m);
    ids.flat.push_back(id);
    return id;
  };
  ids.patch_proj = reg(params.patch_proj);
  ids.patch_bias = reg(params.patch_bias);
  ids.cls_token = reg(params.cls_token);
  ids.pos_embed = reg(params.pos_embed);
  for (const LayerParams& l : params.layers) {
    LayerParamIds lid;
    lid.ln1_gain = reg(l.ln1_gain);
    lid.ln1_bias = reg(l.ln1_bias);
    lid.attn.w_q = reg(l.attn.w_q);
    lid.attn.w_k = reg(l.attn.w_k);
    lid.attn.w_v = reg(l.attn.w_v);
    lid.attn.w_o = reg(l.attn.w_o);
    lid.attn.heads = l.attn.heads;
    lid.ln2_gain = reg(l.ln2_gain);
    lid.ln2_bias = reg(l.ln2_bias);
    lid.mlp_w1 = reg(l.mlp_w1);
    lid.mlp_b1 = reg(l.mlp_b1);
    lid.mlp_w2 = reg(l.mlp_w2);
    lid.mlp_b2 = reg(l.mlp_b2);
    ids.layers.push_back(lid);
  }
  ids.final_ln_gain = reg(params.final_ln_gain);
  ids.final_ln_bias = reg(params.final_ln_bias);
  ids.classifier_w = reg(params.classifier_w);
  ids.classifier_b = reg(params.classifier_b);
  return ids;
}

namespace {

ValueId mlp_block(Tape& tape, ValueId x, const LayerParamIds& l,
                  const ModelConfig& cfg) {
  // Pre-norm MLP sub-block with residual.
  ValueId h = tape.layernorm(x, l.ln2_gain, l.ln2_bias, cfg.layernorm_eps);
  h = tape.add_row_broadcast(tape.matmul(h, l.mlp_w1), l.mlp_b1);
  h = tape.gelu(h);
  h = tape.add_row_broadcast(tape.matmul(h, l.mlp_w2), l.mlp_b2);
  return tape.add(x, h);
}

ValueId pooled_feature(Tape& tape, ValueId tokens, const ModelParamIds& ids,
                       const ModelConfig& cfg) {
  const ValueId normed = tape.layernorm(tokens, ids.final_ln_gain,
                                        ids.final_ln_bias, cfg.layernorm_eps);
  return cfg.use_cls_token ? tape.take_row(normed, 0)
                           : tape.mean_rows(normed);
}

ValueId classify(Tape& tape, ValueId feature, const ModelParamIds& ids) {
  return tape.add_row_broadcast(tape.matmul(feature, ids.classifier_w),
                                ids.classifier_b);
}

}  // namespace

BranchTrace forward_branch(Tape& tape, const Matrix& tokens,
                           const ModelParamIds& ids, const ModelConfig& cfg) {
  if (tokens.rows() != cfg.patch_count || tokens.cols() != cfg.patch_dim) {
    fail(ErrorCode::dimension_mismatch,
         "forward_branch: tokens " + tokens.shape_str() + ", expected " +
             std::to_string(cfg.patch_count) + "x" +
             std::to_string(cfg.patch_dim));
  }
  BranchTrace trace;

  ValueId x = tape.add_row_broadcast(
      tape.matmul(tape.constant(tokens), ids.patch_proj), ids.patch_bias);
  if (cfg.use_cls_token) {
    x = tape.concat_rows(ids.cls_token, x);
  }
  x = tape.add(x, ids.pos_embed);
  trace.tokens.push_back(x);

  for (std::size_t n = 0; n < cfg.layers; ++n) {
    const LayerParamIds& l = ids.layers[n];
    const ValueId normed =
        tape.layernorm(x, l.ln1_gain, l.ln1_bias, cfg.layernorm_eps);
    const ValueId q = tape.matmul(normed, l.attn.w_q);
    const ValueId k = tape.matmul(normed, l.attn.w_k);
    const ValueId v = tape.matmul(normed, l.attn.w_v);
    trace.q.push_back(q);
    trace.k.push_back(k);
    trace.v.push_back(v);

    const AttentionNodes attn =
        attend(tape, q, k, v, l.attn.heads, l.attn.w_o);
    x = tape.add(x, attn.output);
    x = mlp_block(tape, x, l, cfg);
    trace.tokens.push_back(x);
  }

  trace.feature = pooled_feature(tape, x, ids, cfg);
  trace.logits = classify(tape, trace.feature, ids);
  return trace;
}

ValueId forward_cross_branch(Tape& tape, const BranchTrace& trace_s,
                             const BranchTrace& trace_t,
                             const ModelParamIds& ids,
                             const ModelConfig& cfg) {
  if (trace_s.q.size() != cfg.layers || trace_t.k.size() != cfg.layers) {
    fail(ErrorCode::dimension_mismatch,
         "forward_cross_branch: trace length mismatch (" +
             std::to_string(trace_s.q.size()) + ", " +
             std::to_string(trace_t.k.size()) + ") for " +
             std::to_string(cfg.layers) + " layers");
  }
  if (cfg.layers == 0) {
    // Without encoder layers there is no cross-attention path; the branch
    // degenerates to the source embedding.
    return classify(tape,
                    pooled_feature(tape, trace_s.tokens[0], ids, cfg), ids);
  }

  ValueId x{};  // source-target stream; undefined before layer 1
  for (std::size_t n = 0; n < cfg.layers; ++n) {
    const LayerParamIds& l = ids.layers[n];
    const AttentionNodes attn = attend(tape, trace_s.q[n], trace_t.k[n],
                                       trace_t.v[n], l.attn.heads, l.attn.w_o);
    // The branch has no own layer-0 output, so the residual addition only
    // starts at layer 2.
    x = (n == 0) ? attn.output : tape.add(x, attn.output);
    x = mlp_block(tape, x, l, cfg);
  }
  return classify(tape, pooled_feature(tape, x, ids, cfg), ids);
}

Matrix branch_logits(const ModelParams& params, const Matrix& tokens) {
  Tape tape;
  const ModelParamIds ids = register_model(tape, params, false);
  const BranchTrace trace = forward_branch(tape, tokens, ids, params.cfg);
  return tape.value(trace.logits);
}

SampleOutput forward_sample(const ModelParams& params,
                            const std::vector<double>& sample) {
  Tape tape;
  const ModelParamIds ids = register_model(tape, params, false);
  const BranchTrace trace =
      forward_branch(tape, patchify(sample, params.cfg), ids, params.cfg);
  return SampleOutput{tape.value(trace.feature), tape.value(trace.logits)};
}

std::size_t predict(const ModelParams& params,
                    const std::vector<double>& sample) {
  return argmax_row(forward_sample(params, sample).logits);
}

Matrix cross_attention_weight_map(const ModelParams& params,
                                  const std::vector<double>& sample_s,
                                  const std::vector<double>& sample_t,
                                  std::size_t layer) {
  const ModelConfig& cfg = params.cfg;
  if (layer >= cfg.layers) {
    fail(ErrorCode::invalid_argument,
         "cross_attention_weight_map: layer " + std::to_string(layer) +
             " out of range for " + std::to_string(cfg.layers) + " layers");
  }
  Tape tape;
  const ModelParamIds ids = register_model(tape, params, false);
  const BranchTrace ts = forward_branch(tape, patchify(sample_s, cfg), ids, cfg);
  const BranchTrace tt = forward_branch(tape, patchify(sample_t, cfg), ids, cfg);
  const AttentionNodes attn =
      attend(tape, ts.q[layer], tt.k[layer], tt.v[layer],
             cfg.heads, ids.layers[layer].attn.w_o);
  Matrix mean(tape.value(attn.head_weights[0]).rows(),
              tape.value(attn.head_weights[0]).cols());
  for (const ValueId w : attn.head_weights) {
    mean = add(mean, tape.value(w));
  }
  return scale(mean, 1.0 / static_cast<double>(cfg.heads));
}

}  // namespace cdt
