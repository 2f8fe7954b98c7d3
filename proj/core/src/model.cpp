#include "gic/model.hpp"

#include <algorithm>

#include "gic/hash.hpp"
#include "gic/ops.hpp"
#include "gic/rng.hpp"

namespace gic {

const char* setting_name(Setting s) {
  switch (s) {
    case Setting::kTaskSpecific: return "task_specific";
    case Setting::kTaskAgnosticHeads: return "task_agnostic_heads";
    default: return "task_agnostic_generative";
  }
}

Setting parse_setting(const std::string& name) {
  if (name == "task_specific") return Setting::kTaskSpecific;
  if (name == "task_agnostic_heads") return Setting::kTaskAgnosticHeads;
  if (name == "task_agnostic_generative") return Setting::kTaskAgnosticGenerative;
  throw ConfigError("unknown setting \"" + name + "\"");
}

bool is_generative(Setting s) { return s == Setting::kTaskAgnosticGenerative; }

void ExtractorConfig::validate() const {
  if (depths.empty() || depths.size() != widths.size()) {
    throw ConfigError("extractor: depths and widths must be non-empty and the same length");
  }
  for (int d : depths)
    if (d < 1) throw ConfigError("extractor: stage depth must be >= 1");
  for (int w : widths)
    if (w < 1) throw ConfigError("extractor: stage width must be >= 1");
  if (kernel_size < 1 || kernel_size % 2 == 0) throw ConfigError("extractor: kernel_size must be odd and positive");
  if (stem_stride < 1) throw ConfigError("extractor: stem_stride must be >= 1");
  if (in_channels < 1) throw ConfigError("extractor: in_channels must be >= 1");
}

void DecoderConfig::validate() const {
  if (layers < 1) throw ConfigError("decoder: layers must be >= 1");
  if (heads < 1) throw ConfigError("decoder: heads must be >= 1");
  if (d_model < 1 || d_model % heads != 0) throw ConfigError("decoder: d_model must be divisible by heads");
}

template <class S>
Tensor<S>* ModelBundle<S>::find_param(const std::string& name) {
  for (auto& [n, t] : params)
    if (n == name) return &t;
  return nullptr;
}

template <class S>
const Tensor<S>* ModelBundle<S>::find_param(const std::string& name) const {
  for (const auto& [n, t] : params)
    if (n == name) return &t;
  return nullptr;
}

template <class S>
void ModelBundle<S>::set_requires_grad(bool v) {
  for (auto& [n, t] : params) t.set_requires_grad(v);
}

template <class S>
void ModelBundle<S>::zero_grad() {
  for (auto& [n, t] : params) t.zero_grad();
}

namespace {

enum class Init { kTruncNormal, kZeros, kOnes };

template <class S>
class ParamBuilder {
public:
  ParamBuilder(std::vector<std::pair<std::string, Tensor<S>>>& params, std::uint64_t seed)
      : params_(params), seed_(seed) {}

  Tensor<S> operator()(const std::string& name, Shape shape, Init kind) {
    Tensor<S> t = Tensor<S>::zeros(std::move(shape));
    if (kind == Init::kOnes) {
      std::fill(t.values().begin(), t.values().end(), S(1));
    } else if (kind == Init::kTruncNormal) {
      Rng rng(Rng::fold(seed_, fnv1a64(name)));
      for (auto& v : t.values()) v = static_cast<S>(rng.truncated_normal(0.02));
    }
    params_.emplace_back(name, t);
    return t;
  }

private:
  std::vector<std::pair<std::string, Tensor<S>>>& params_;
  std::uint64_t seed_;
};

} // namespace

template <class S>
ModelBundle<S> init_weights(const ExtractorConfig& extractor_cfg, const DecoderConfig& decoder_cfg,
                            const std::vector<TaskSpec>& tasks, Setting setting, int n_prefix, std::uint64_t seed) {
  extractor_cfg.validate();
  if (tasks.empty()) throw ConfigError("init_weights: no tasks registered");
  if (n_prefix < 1) throw ConfigError("init_weights: n_prefix must be >= 1");

  ModelBundle<S> b;
  b.setting = setting;
  b.n_prefix = n_prefix;
  b.extractor_cfg = extractor_cfg;
  b.tasks = tasks;

  std::vector<std::string> labels;
  for (const auto& t : tasks)
    for (const auto& l : t.labels) labels.push_back(l);
  b.vocab = build_vocabulary(labels);
  b.seq_len = max_sequence_length(labels);

  b.decoder_cfg = decoder_cfg;
  b.decoder_cfg.vocab_size = b.vocab.size();
  b.decoder_cfg.max_positions = b.seq_len + n_prefix;
  b.decoder_cfg.validate();

  ParamBuilder<S> make(b.params, seed);
  const auto& ec = extractor_cfg;
  std::size_t stem = static_cast<std::size_t>(ec.stem_stride);
  std::size_t c0 = static_cast<std::size_t>(ec.widths[0]);

  b.extractor.stem_kernel = make("extractor.stem.kernel", {c0, static_cast<std::size_t>(ec.in_channels), stem, stem},
                                 Init::kTruncNormal);
  b.extractor.stem_bias = make("extractor.stem.bias", {c0}, Init::kZeros);
  b.extractor.stem_norm_gain = make("extractor.stem_norm.gain", {c0}, Init::kOnes);
  b.extractor.stem_norm_shift = make("extractor.stem_norm.shift", {c0}, Init::kZeros);

  std::size_t k = static_cast<std::size_t>(ec.kernel_size);
  for (std::size_t s = 0; s < ec.depths.size(); ++s) {
    StageWeights<S> stage;
    std::size_t c = static_cast<std::size_t>(ec.widths[s]);
    for (int blk = 0; blk < ec.depths[s]; ++blk) {
      std::string p = "extractor.stage" + std::to_string(s) + ".block" + std::to_string(blk) + ".";
      BlockWeights<S> bw;
      bw.dw_kernel = make(p + "dw_kernel", {c, 1, k, k}, Init::kTruncNormal);
      bw.norm_gain = make(p + "norm.gain", {c}, Init::kOnes);
      bw.norm_shift = make(p + "norm.shift", {c}, Init::kZeros);
      bw.expand_w = make(p + "expand.w", {4 * c, c}, Init::kTruncNormal);
      bw.expand_b = make(p + "expand.b", {4 * c}, Init::kZeros);
      bw.contract_w = make(p + "contract.w", {c, 4 * c}, Init::kTruncNormal);
      bw.contract_b = make(p + "contract.b", {c}, Init::kZeros);
      stage.blocks.push_back(std::move(bw));
    }
    if (s + 1 < ec.depths.size()) {
      std::string p = "extractor.stage" + std::to_string(s) + ".";
      std::size_t cn = static_cast<std::size_t>(ec.widths[s + 1]);
      stage.has_downsample = true;
      stage.down_norm_gain = make(p + "down_norm.gain", {c}, Init::kOnes);
      stage.down_norm_shift = make(p + "down_norm.shift", {c}, Init::kZeros);
      stage.down_kernel = make(p + "down.kernel", {cn, c, 2, 2}, Init::kTruncNormal);
      stage.down_bias = make(p + "down.bias", {cn}, Init::kZeros);
    }
    b.extractor.stages.push_back(std::move(stage));
  }
  std::size_t d_feat = static_cast<std::size_t>(ec.feature_dim());
  b.extractor.final_norm_gain = make("extractor.final_norm.gain", {d_feat}, Init::kOnes);
  b.extractor.final_norm_shift = make("extractor.final_norm.shift", {d_feat}, Init::kZeros);

  if (is_generative(setting)) {
    std::size_t d = static_cast<std::size_t>(b.decoder_cfg.d_model);
    std::size_t v = static_cast<std::size_t>(b.decoder_cfg.vocab_size);
    ProjectorWeights<S> pr;
    pr.w1 = make("projector.fc1.w", {d, d_feat}, Init::kTruncNormal);
    pr.b1 = make("projector.fc1.b", {d}, Init::kZeros);
    pr.w2 = make("projector.fc2.w", {d, d}, Init::kTruncNormal);
    pr.b2 = make("projector.fc2.b", {d}, Init::kZeros);
    pr.w3 = make("projector.fc3.w", {static_cast<std::size_t>(n_prefix) * d, d}, Init::kTruncNormal);
    pr.b3 = make("projector.fc3.b", {static_cast<std::size_t>(n_prefix) * d}, Init::kZeros);
    b.projector = std::move(pr);

    DecoderWeights<S> dec;
    dec.token_embedding = make("decoder.token_embedding", {v, d}, Init::kTruncNormal);
    dec.position_embedding =
        make("decoder.position_embedding", {static_cast<std::size_t>(b.decoder_cfg.max_positions), d},
             Init::kTruncNormal);
    for (int l = 0; l < b.decoder_cfg.layers; ++l) {
      std::string p = "decoder.layer" + std::to_string(l) + ".";
      DecoderLayerWeights<S> lw;
      lw.ln1_gain = make(p + "ln1.gain", {d}, Init::kOnes);
      lw.ln1_shift = make(p + "ln1.shift", {d}, Init::kZeros);
      lw.wq = make(p + "attn.wq", {d, d}, Init::kTruncNormal);
      lw.bq = make(p + "attn.bq", {d}, Init::kZeros);
      lw.wk = make(p + "attn.wk", {d, d}, Init::kTruncNormal);
      lw.bk = make(p + "attn.bk", {d}, Init::kZeros);
      lw.wv = make(p + "attn.wv", {d, d}, Init::kTruncNormal);
      lw.bv = make(p + "attn.bv", {d}, Init::kZeros);
      lw.wo = make(p + "attn.wo", {d, d}, Init::kTruncNormal);
      lw.bo = make(p + "attn.bo", {d}, Init::kZeros);
      lw.ln2_gain = make(p + "ln2.gain", {d}, Init::kOnes);
      lw.ln2_shift = make(p + "ln2.shift", {d}, Init::kZeros);
      std::size_t f = static_cast<std::size_t>(b.decoder_cfg.ffn_width());
      lw.ff1_w = make(p + "ffn.fc1.w", {f, d}, Init::kTruncNormal);
      lw.ff1_b = make(p + "ffn.fc1.b", {f}, Init::kZeros);
      lw.ff2_w = make(p + "ffn.fc2.w", {d, f}, Init::kTruncNormal);
      lw.ff2_b = make(p + "ffn.fc2.b", {d}, Init::kZeros);
      dec.layers.push_back(std::move(lw));
    }
    dec.final_norm_gain = make("decoder.final_norm.gain", {d}, Init::kOnes);
    dec.final_norm_shift = make("decoder.final_norm.shift", {d}, Init::kZeros);
    dec.output_w = make("decoder.output.w", {v, d}, Init::kTruncNormal);
    b.decoder = std::move(dec);
  } else {
    for (const auto& t : tasks) {
      HeadWeights<S> hw;
      hw.task_id = t.id;
      std::string p = "head." + t.name + ".";
      hw.w = make(p + "w", {static_cast<std::size_t>(t.num_classes()), d_feat}, Init::kTruncNormal);
      hw.b = make(p + "b", {static_cast<std::size_t>(t.num_classes())}, Init::kZeros);
      b.heads.push_back(std::move(hw));
    }
  }
  return b;
}

template <class S>
ModelBundle<S> clone_bundle(const ModelBundle<S>& bundle) {
  ModelBundle<S> out =
      init_weights<S>(bundle.extractor_cfg, bundle.decoder_cfg, bundle.tasks, bundle.setting, bundle.n_prefix, 0);
  for (std::size_t i = 0; i < out.params.size(); ++i) {
    auto src = bundle.params[i].second.values();
    std::copy(src.begin(), src.end(), out.params[i].second.values().begin());
  }
  return out;
}

ModelBundleD bundle_to_double(const ModelBundleF& bundle) {
  ModelBundleD out = init_weights<double>(bundle.extractor_cfg, bundle.decoder_cfg, bundle.tasks, bundle.setting,
                                          bundle.n_prefix, 0);
  for (std::size_t i = 0; i < out.params.size(); ++i) {
    auto src = bundle.params[i].second.values();
    auto dst = out.params[i].second.values();
    for (std::size_t j = 0; j < src.size(); ++j) dst[j] = static_cast<double>(src[j]);
  }
  return out;
}

template <class S>
std::size_t parameter_count(const ModelBundle<S>& bundle) {
  std::size_t n = 0;
  for (const auto& [name, t] : bundle.params) n += t.size();
  return n;
}

namespace {

// Channel-last layer norm over an NCHW tensor.
template <class S>
Tensor<S> norm_channels(Tape<S>& tape, const Tensor<S>& x, const Tensor<S>& gain, const Tensor<S>& shift) {
  Tensor<S> cl = permute(tape, x, {0, 2, 3, 1});
  cl = layer_norm(tape, cl, gain, shift, S(1e-5));
  return permute(tape, cl, {0, 3, 1, 2});
}

} // namespace

template <class S>
Tensor<S> extract_features(Tape<S>& tape, const ModelBundle<S>& bundle, const Tensor<S>& images) {
  const auto& ec = bundle.extractor_cfg;
  if (images.rank() != 4 || images.dim(1) != static_cast<std::size_t>(ec.in_channels)) {
    throw ShapeError("extract_features: images must be [N," + std::to_string(ec.in_channels) + ",H,W], got " +
                     shape_str(images.shape()));
  }
  if (images.dim(2) < static_cast<std::size_t>(ec.stem_stride) ||
      images.dim(3) < static_cast<std::size_t>(ec.stem_stride)) {
    throw ShapeError("extract_features: image " + shape_str(images.shape()) + " smaller than stem stride " +
                     std::to_string(ec.stem_stride));
  }
  const auto& w = bundle.extractor;
  Tensor<S> x = conv2d(tape, images, w.stem_kernel, w.stem_bias, ec.stem_stride, 0);
  x = norm_channels(tape, x, w.stem_norm_gain, w.stem_norm_shift);

  int pad = ec.kernel_size / 2;
  for (const auto& stage : w.stages) {
    for (const auto& blk : stage.blocks) {
      Tensor<S> y = depthwise_conv2d(tape, x, blk.dw_kernel, 1, pad);
      Tensor<S> cl = permute(tape, y, {0, 2, 3, 1});
      cl = layer_norm(tape, cl, blk.norm_gain, blk.norm_shift, S(1e-5));
      cl = linear(tape, cl, blk.expand_w, blk.expand_b);
      cl = gelu(tape, cl);
      cl = linear(tape, cl, blk.contract_w, blk.contract_b);
      Tensor<S> y2 = permute(tape, cl, {0, 3, 1, 2});
      x = add(tape, x, y2);
    }
    if (stage.has_downsample) {
      x = norm_channels(tape, x, stage.down_norm_gain, stage.down_norm_shift);
      x = conv2d(tape, x, stage.down_kernel, stage.down_bias, 2, 0);
    }
  }
  Tensor<S> feats = global_avg_pool(tape, x);
  return layer_norm(tape, feats, w.final_norm_gain, w.final_norm_shift, S(1e-5));
}

template <class S>
Tensor<S> project(Tape<S>& tape, const ModelBundle<S>& bundle, const Tensor<S>& features) {
  if (!bundle.projector) throw Error("project: bundle has no projector (head-based setting)");
  const auto& p = *bundle.projector;
  Tensor<S> h = linear(tape, features, p.w1, p.b1);
  h = gelu(tape, h);
  h = linear(tape, h, p.w2, p.b2);
  h = gelu(tape, h);
  h = linear(tape, h, p.w3, p.b3);
  std::size_t n = features.dim(0);
  return reshape(tape, h,
                 {n, static_cast<std::size_t>(bundle.n_prefix), static_cast<std::size_t>(bundle.decoder_cfg.d_model)});
}

namespace {

// Pre-norm transformer stack plus final norm; x is [N,S,d].
template <class S>
Tensor<S> decoder_hidden(Tape<S>& tape, const ModelBundle<S>& bundle, Tensor<S> x) {
  const auto& dec = *bundle.decoder;
  const auto& cfg = bundle.decoder_cfg;
  std::size_t n = x.dim(0), s = x.dim(1);
  std::size_t heads = static_cast<std::size_t>(cfg.heads);
  std::size_t dh = static_cast<std::size_t>(cfg.head_dim());
  std::size_t d = static_cast<std::size_t>(cfg.d_model);
  for (const auto& lw : dec.layers) {
    Tensor<S> h = layer_norm(tape, x, lw.ln1_gain, lw.ln1_shift, S(1e-5));
    Tensor<S> q = linear(tape, h, lw.wq, lw.bq);
    Tensor<S> k = linear(tape, h, lw.wk, lw.bk);
    Tensor<S> v = linear(tape, h, lw.wv, lw.bv);
    q = permute(tape, reshape(tape, q, {n, s, heads, dh}), {0, 2, 1, 3});
    k = permute(tape, reshape(tape, k, {n, s, heads, dh}), {0, 2, 1, 3});
    v = permute(tape, reshape(tape, v, {n, s, heads, dh}), {0, 2, 1, 3});
    Tensor<S> att = attention(tape, q, k, v, /*causal=*/true);
    att = reshape(tape, permute(tape, att, {0, 2, 1, 3}), {n, s, d});
    Tensor<S> o = linear(tape, att, lw.wo, lw.bo);
    x = add(tape, x, o);
    Tensor<S> h2 = layer_norm(tape, x, lw.ln2_gain, lw.ln2_shift, S(1e-5));
    Tensor<S> f = linear(tape, h2, lw.ff1_w, lw.ff1_b);
    f = gelu(tape, f);
    f = linear(tape, f, lw.ff2_w, lw.ff2_b);
    x = add(tape, x, f);
  }
  return layer_norm(tape, x, dec.final_norm_gain, dec.final_norm_shift, S(1e-5));
}

template <class S>
void check_token_ids(const std::vector<int>& ids, int vocab_size) {
  for (int id : ids) {
    if (id < 0 || id >= vocab_size) {
      throw ShapeError("token id " + std::to_string(id) + " >= vocabulary size " + std::to_string(vocab_size));
    }
  }
}

} // namespace

template <class S>
Tensor<S> forward_teacher_forced(Tape<S>& tape, const ModelBundle<S>& bundle, const Tensor<S>& images,
                                 const std::vector<int>& tokens) {
  if (!bundle.decoder) throw Error("forward_teacher_forced: bundle has no decoder");
  std::size_t n = images.dim(0);
  std::size_t t = static_cast<std::size_t>(bundle.seq_len);
  if (tokens.size() != n * t) {
    throw ShapeError("forward_teacher_forced: expected " + std::to_string(n * t) + " token ids, got " +
                     std::to_string(tokens.size()));
  }
  check_token_ids<S>(tokens, bundle.decoder_cfg.vocab_size);

  Tensor<S> feats = extract_features(tape, bundle, images);
  Tensor<S> prefix = project(tape, bundle, feats);

  // Shift right: positions 0..T-2 feed the decoder after the prefix.
  std::vector<int> input_ids;
  input_ids.reserve(n * (t - 1));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t m = 0; m + 1 < t; ++m) input_ids.push_back(tokens[i * t + m]);

  const auto& dec = *bundle.decoder;
  Tensor<S> emb = embedding(tape, dec.token_embedding, input_ids, {n, t - 1});
  Tensor<S> x = concat_dim1(tape, prefix, emb);
  x = add_positions(tape, x, dec.position_embedding);
  x = decoder_hidden(tape, bundle, x);
  Tensor<S> logits_all = linear_nobias(tape, x, dec.output_w); // [N, P+T-1, V]
  std::size_t p = static_cast<std::size_t>(bundle.n_prefix);
  return slice_dim1(tape, logits_all, p - 1, t); // row m predicts token m
}

template <class S>
Tensor<S> decode_step(Tape<S>& tape, const ModelBundle<S>& bundle, const Tensor<S>& prefix,
                      const std::vector<int>& generated) {
  if (!bundle.decoder) throw Error("decode_step: bundle has no decoder");
  std::size_t p = static_cast<std::size_t>(bundle.n_prefix);
  std::size_t d = static_cast<std::size_t>(bundle.decoder_cfg.d_model);
  if (prefix.rank() != 3 || prefix.dim(0) != 1 || prefix.dim(1) != p || prefix.dim(2) != d) {
    throw ShapeError("decode_step: prefix must be [1," + std::to_string(p) + "," + std::to_string(d) + "]");
  }
  check_token_ids<S>(generated, bundle.decoder_cfg.vocab_size);
  std::vector<int> context;
  context.reserve(generated.size() + 1);
  context.push_back(Vocabulary::kBos);
  context.insert(context.end(), generated.begin(), generated.end());
  if (p + context.size() > static_cast<std::size_t>(bundle.decoder_cfg.max_positions)) {
    throw ShapeError("decode_step: context length " + std::to_string(context.size()) + " exceeds position table");
  }
  const auto& dec = *bundle.decoder;
  Tensor<S> emb = embedding(tape, dec.token_embedding, context, {1, context.size()});
  Tensor<S> x = concat_dim1(tape, prefix, emb);
  x = add_positions(tape, x, dec.position_embedding);
  x = decoder_hidden(tape, bundle, x);
  Tensor<S> logits_all = linear_nobias(tape, x, dec.output_w);
  Tensor<S> last = slice_dim1(tape, logits_all, p + context.size() - 1, 1);
  return reshape(tape, last, {static_cast<std::size_t>(bundle.decoder_cfg.vocab_size)});
}

template <class S>
Tensor<S> classify_head(Tape<S>& tape, const ModelBundle<S>& bundle, const Tensor<S>& features, int task_id) {
  if (is_generative(bundle.setting)) throw Error("classify_head: no heads in generative bundle");
  for (const auto& h : bundle.heads) {
    if (h.task_id == task_id) return linear(tape, features, h.w, h.b);
  }
  throw Error("classify_head: no head for task id " + std::to_string(task_id));
}

template struct ModelBundle<float>;
template struct ModelBundle<double>;

template ModelBundle<float> init_weights<float>(const ExtractorConfig&, const DecoderConfig&,
                                                const std::vector<TaskSpec>&, Setting, int, std::uint64_t);
template ModelBundle<double> init_weights<double>(const ExtractorConfig&, const DecoderConfig&,
                                                  const std::vector<TaskSpec>&, Setting, int, std::uint64_t);
template ModelBundle<float> clone_bundle<float>(const ModelBundle<float>&);
template ModelBundle<double> clone_bundle<double>(const ModelBundle<double>&);
template std::size_t parameter_count<float>(const ModelBundle<float>&);
template std::size_t parameter_count<double>(const ModelBundle<double>&);
template Tensor<float> extract_features<float>(Tape<float>&, const ModelBundle<float>&, const Tensor<float>&);
template Tensor<double> extract_features<double>(Tape<double>&, const ModelBundle<double>&, const Tensor<double>&);
template Tensor<float> project<float>(Tape<float>&, const ModelBundle<float>&, const Tensor<float>&);
template Tensor<double> project<double>(Tape<double>&, const ModelBundle<double>&, const Tensor<double>&);
template Tensor<float> forward_teacher_forced<float>(Tape<float>&, const ModelBundle<float>&, const Tensor<float>&,
                                                     const std::vector<int>&);
template Tensor<double> forward_teacher_forced<double>(Tape<double>&, const ModelBundle<double>&,
                                                       const Tensor<double>&, const std::vector<int>&);
template Tensor<float> decode_step<float>(Tape<float>&, const ModelBundle<float>&, const Tensor<float>&,
                                          const std::vector<int>&);
template Tensor<double> decode_step<double>(Tape<double>&, const ModelBundle<double>&, const Tensor<double>&,
                                            const std::vector<int>&);
template Tensor<float> classify_head<float>(Tape<float>&, const ModelBundle<float>&, const Tensor<float>&, int);
template Tensor<double> classify_head<double>(Tape<double>&, const ModelBundle<double>&, const Tensor<double>&, int);

} // namespace gic
