#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "core/attention.hpp"
#include "core/matrix.hpp"
#include "core/rng.hpp"
#include "core/tape.hpp"

namespace cdt {

struct ModelConfig {
  std::size_t patch_count = 16;  // tokens per sample
  std::size_t patch_dim = 12;    // values per token
  std::size_t width = 64;
  std::size_t layers = 4;
  std::size_t heads = 4;
  std::size_t classes = 4;
  std::size_t mlp_hidden = 0;  // 0 means 4 * width
  bool use_cls_token = true;
  double layernorm_eps = 1e-6;

  std::size_t sample_dim() const { return patch_count * patch_dim; }
  std::size_t token_rows() const {
    return patch_count + (use_cls_token ? 1 : 0);
  }
  std::size_t hidden() const { return mlp_hidden ? mlp_hidden : 4 * width; }
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

struct LayerParams {
  Matrix ln1_gain, ln1_bias;
  AttentionParams attn;
  Matrix ln2_gain, ln2_bias;
  Matrix mlp_w1, mlp_b1;  // width -> hidden
  Matrix mlp_w2, mlp_b2;  // hidden -> width
};

// One parameter set shared by the source, target and source-target branches.
struct ModelParams {
  ModelConfig cfg;
  Matrix patch_proj;  // patch_dim x width
  Matrix patch_bias;  // 1 x width
  Matrix cls_token;   // 1 x width when use_cls_token
  Matrix pos_embed;   // token_rows x width
  std::vector<LayerParams> layers;
  Matrix final_ln_gain, final_ln_bias;
  Matrix classifier_w;  // width x classes
  Matrix classifier_b;  // 1 x classes

  static ModelParams init(const ModelConfig& cfg, Rng& rng);

  // Fixed traversal order shared by the optimizer, the gradient table and
  // the checkpoint format.
  void for_each(const std::function<void(Matrix&)>& fn);
  void for_each_const(const std::function<void(const Matrix&)>& fn) const;
  std::size_t tensor_count() const;
  bool same_values(const ModelParams& other) const;
};

// Deterministic reshape of a flat sample into patch_count x patch_dim rows.
Matrix patchify(const std::vector<double>& sample, const ModelConfig& cfg);
Matrix patchify(const Matrix& dataset_row, const ModelConfig& cfg);
std::vector<double> flatten(const Matrix& tokens);

// Tape-side handles to one registered parameter set.
struct LayerParamIds {
  ValueId ln1_gain, ln1_bias;
  AttentionParamIds attn;
  ValueId ln2_gain, ln2_bias;
  ValueId mlp_w1, mlp_b1, mlp_w2, mlp_b2;
};

struct ModelParamIds {
  ValueId patch_proj, patch_bias, cls_token, pos_embed;
  std::vector<LayerParamIds> layers;
  ValueId final_ln_gain, final_ln_bias;
  ValueId classifier_w, classifier_b;
  std::vector<ValueId> flat;  // same order as ModelParams::for_each
};

ModelParamIds register_model(Tape& tape, const ModelParams& params,
                             bool trainable);

// Forward pass of one self-attention branch. Records the per-layer token
// sequences and the per-layer Q/K/V projections so a source-target branch
// can be driven from two traces.
struct BranchTrace {
  std::vector<ValueId> tokens;  // layers + 1 entries, first is the embedding
  std::vector<ValueId> q, k, v;  // layers entries each
  ValueId feature;               // pooled, after the final norm
  ValueId logits;                // 1 x classes
};

BranchTrace forward_branch(Tape& tape, const Matrix& tokens,
                           const ModelParamIds& ids, const ModelConfig& cfg);

// Source-target branch: layer n attends with queries from the source trace
// and keys/values from the target trace, adds its own previous output
// (skipped in layer 1) and runs the shared MLP sub-block.
ValueId forward_cross_branch(Tape& tape, const BranchTrace& trace_s,
                             const BranchTrace& trace_t,
                             const ModelParamIds& ids,
                             const ModelConfig& cfg);

// Inference helpers (target branch only).
Matrix branch_logits(const ModelParams& params, const Matrix& tokens);
std::size_t predict(const ModelParams& params,
                    const std::vector<double>& sample);

struct SampleOutput {
  Matrix feature;  // 1 x width
  Matrix logits;   // 1 x classes
};
SampleOutput forward_sample(const ModelParams& params,
                            const std::vector<double>& sample);

// Head-averaged cross-attention weight map between two samples at a layer,
// feeding the heatmap CSV export.
Matrix cross_attention_weight_map(const ModelParams& params,
                                  const std::vector<double>& sample_s,
                                  const std::vector<double>& sample_t,
                                  std::size_t layer);

// Versioned binary checkpoint with a bit-exact round trip.
void save_model(const ModelParams& params, const std::string& path);
ModelParams load_model(const std::string& path);

}  // namespace cdt
