#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gic/data.hpp"
#include "gic/tape.hpp"
#include "gic/tensor.hpp"
#include "gic/tokenizer.hpp"

namespace gic {

enum class Setting { kTaskSpecific, kTaskAgnosticHeads, kTaskAgnosticGenerative };

const char* setting_name(Setting s);
Setting parse_setting(const std::string& name); // throws ConfigError
bool is_generative(Setting s);

// Patchify-stem convolutional extractor built from inverted-bottleneck blocks
// with a large depthwise kernel, stage-wise downsampling and global pooling.
struct ExtractorConfig {
  std::vector<int> depths{2, 2};
  std::vector<int> widths{32, 64};
  int kernel_size = 7;
  int stem_stride = 4;
  int in_channels = 3;

  int feature_dim() const { return widths.empty() ? 0 : widths.back(); }
  void validate() const; // throws ConfigError
};

// Decoder-only transformer with learned absolute positions.
struct DecoderConfig {
  int layers = 2;
  int heads = 4;
  int d_model = 128;
  int vocab_size = 0;    // filled from the vocabulary at init
  int max_positions = 0; // filled as seq_len + n_prefix at init

  int ffn_width() const { return 4 * d_model; }
  int head_dim() const { return d_model / heads; }
  void validate() const; // throws ConfigError
};

template <class S>
struct BlockWeights {
  Tensor<S> dw_kernel;         // [C,1,k,k]
  Tensor<S> norm_gain, norm_shift;
  Tensor<S> expand_w, expand_b;    // C -> 4C pointwise, as linear
  Tensor<S> contract_w, contract_b; // 4C -> C
};

template <class S>
struct StageWeights {
  std::vector<BlockWeights<S>> blocks;
  // Downsample to the next stage: channels-last norm + 2x2 stride-2 conv.
  bool has_downsample = false;
  Tensor<S> down_norm_gain, down_norm_shift;
  Tensor<S> down_kernel, down_bias; // [C_next, C, 2, 2]
};

template <class S>
struct ExtractorWeights {
  Tensor<S> stem_kernel, stem_bias; // [C0, in, s, s] stride s
  Tensor<S> stem_norm_gain, stem_norm_shift;
  std::vector<StageWeights<S>> stages;
  Tensor<S> final_norm_gain, final_norm_shift; // over pooled features
};

template <class S>
struct ProjectorWeights {
  Tensor<S> w1, b1, w2, b2, w3, b3; // linear-gelu-linear-gelu-linear
};

template <class S>
struct DecoderLayerWeights {
  Tensor<S> ln1_gain, ln1_shift;
  Tensor<S> wq, bq, wk, bk, wv, bv, wo, bo;
  Tensor<S> ln2_gain, ln2_shift;
  Tensor<S> ff1_w, ff1_b, ff2_w, ff2_b;
};

template <class S>
struct DecoderWeights {
  Tensor<S> token_embedding;    // [V, d]
  Tensor<S> position_embedding; // [n_prefix + T, d]
  std::vector<DecoderLayerWeights<S>> layers;
  Tensor<S> final_norm_gain, final_norm_shift;
  Tensor<S> output_w; // [V, d], no bias, untied from the embedding
};

template <class S>
struct HeadWeights {
  int task_id = -1;
  Tensor<S> w, b; // [K, d_feat], [K]
};

// Everything one experiment needs: weights, configs, vocabulary and the task
// registry slice it was built for. params lists every tensor in a fixed
// order; the structured fields alias the same storage.
template <class S>
struct ModelBundle {
  Setting setting = Setting::kTaskAgnosticGenerative;
  int n_prefix = 1;
  int seq_len = 0; // T
  ExtractorConfig extractor_cfg;
  DecoderConfig decoder_cfg;
  Vocabulary vocab;
  std::vector<TaskSpec> tasks;

  ExtractorWeights<S> extractor;
  std::optional<ProjectorWeights<S>> projector;
  std::optional<DecoderWeights<S>> decoder;
  std::vector<HeadWeights<S>> heads;

  std::vector<std::pair<std::string, Tensor<S>>> params;

  Tensor<S>* find_param(const std::string& name);
  const Tensor<S>* find_param(const std::string& name) const;
  void set_requires_grad(bool v);
  void zero_grad();
};

using ModelBundleF = ModelBundle<float>;
using ModelBundleD = ModelBundle<double>;

// Deterministic initialization: truncated normal (sigma 0.02) for every
// weight/embedding, zeros for biases and norm shifts, ones for norm gains.
// Each tensor draws from its own stream keyed by (seed, tensor name).
template <class S>
ModelBundle<S> init_weights(const ExtractorConfig& extractor_cfg, const DecoderConfig& decoder_cfg,
                            const std::vector<TaskSpec>& tasks, Setting setting, int n_prefix, std::uint64_t seed);

template <class S>
ModelBundle<S> clone_bundle(const ModelBundle<S>& bundle);

// Casts weights elementwise (used to lift a float model into double for
// finite-difference checks).
ModelBundleD bundle_to_double(const ModelBundleF& bundle);

template <class S>
std::size_t parameter_count(const ModelBundle<S>& bundle);

// [N,3,H,W] -> [N,d_feat]: stem, stages with downsampling, global mean pool.
template <class S>
Tensor<S> extract_features(Tape<S>& tape, const ModelBundle<S>& bundle, const Tensor<S>& images);

// [N,d_feat] -> [N,n_prefix,d_model] prefix embeddings.
template <class S>
Tensor<S> project(Tape<S>& tape, const ModelBundle<S>& bundle, const Tensor<S>& features);

// Teacher-forced pass. tokens holds N token sequences of length T (row-major).
// Output [N,T,V]: row m holds the logits that predict token m; row 0 is
// conditioned on the prefix alone.
template <class S>
Tensor<S> forward_teacher_forced(Tape<S>& tape, const ModelBundle<S>& bundle, const Tensor<S>& images,
                                 const std::vector<int>& tokens);

// Next-token logits [V] given prefix [1,n_prefix,d_model] and the ids
// generated so far (BOS is implicit and always prepended).
template <class S>
Tensor<S> decode_step(Tape<S>& tape, const ModelBundle<S>& bundle, const Tensor<S>& prefix,
                      const std::vector<int>& generated);

// Single linear head over pooled features; only in head-based bundles.
template <class S>
Tensor<S> classify_head(Tape<S>& tape, const ModelBundle<S>& bundle, const Tensor<S>& features, int task_id);

extern template struct ModelBundle<float>;
extern template struct ModelBundle<double>;

} // namespace gic
