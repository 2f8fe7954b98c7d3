#include "gic/complexity.hpp"

namespace gic {

double linear_flops(std::size_t d_in, std::size_t d_out, bool bias) {
  return 2.0 * static_cast<double>(d_in) * static_cast<double>(d_out) + (bias ? static_cast<double>(d_out) : 0.0);
}

double conv2d_flops(std::size_t c_in, std::size_t c_out, std::size_t kh, std::size_t kw, std::size_t out_h,
                    std::size_t out_w) {
  double pix = static_cast<double>(out_h) * static_cast<double>(out_w);
  return 2.0 * static_cast<double>(c_in) * static_cast<double>(c_out) * static_cast<double>(kh) *
             static_cast<double>(kw) * pix +
         pix * static_cast<double>(c_out);
}

double depthwise_flops(std::size_t channels, std::size_t kh, std::size_t kw, std::size_t out_h, std::size_t out_w) {
  return 2.0 * static_cast<double>(channels) * static_cast<double>(kh) * static_cast<double>(kw) *
         static_cast<double>(out_h) * static_cast<double>(out_w);
}

ComplexityReport count_complexity(const ModelBundleF& bundle, int image_h, int image_w) {
  const auto& ec = bundle.extractor_cfg;
  ComplexityReport report;
  report.parameter_count = parameter_count(bundle);
  report.convention =
      "MAC=2 FLOPs; conv 2*Cin*Cout*kh*kw*H'*W' + bias adds; linear 2*din*dout + bias adds; "
      "attention QK^T and probs*V matmuls only; softmax/norm/activation/pooling excluded; "
      "generative cost is one teacher-forced pass";

  double flops = 0.0;
  std::size_t h = static_cast<std::size_t>(image_h);
  std::size_t w = static_cast<std::size_t>(image_w);
  std::size_t st = static_cast<std::size_t>(ec.stem_stride);
  std::size_t oh = (h - st) / st + 1;
  std::size_t ow = (w - st) / st + 1;
  flops += conv2d_flops(static_cast<std::size_t>(ec.in_channels), static_cast<std::size_t>(ec.widths[0]), st, st, oh,
                        ow);
  std::size_t k = static_cast<std::size_t>(ec.kernel_size);
  for (std::size_t s = 0; s < ec.widths.size(); ++s) {
    std::size_t c = static_cast<std::size_t>(ec.widths[s]);
    double pix = static_cast<double>(oh) * static_cast<double>(ow);
    for (int blk = 0; blk < ec.depths[s]; ++blk) {
      flops += depthwise_flops(c, k, k, oh, ow);
      flops += pix * linear_flops(c, 4 * c);
      flops += pix * linear_flops(4 * c, c);
    }
    if (s + 1 < ec.widths.size()) {
      std::size_t cn = static_cast<std::size_t>(ec.widths[s + 1]);
      std::size_t noh = (oh - 2) / 2 + 1;
      std::size_t now = (ow - 2) / 2 + 1;
      flops += conv2d_flops(c, cn, 2, 2, noh, now);
      oh = noh;
      ow = now;
    }
  }

  std::size_t d_feat = static_cast<std::size_t>(ec.feature_dim());
  if (is_generative(bundle.setting)) {
    std::size_t d = static_cast<std::size_t>(bundle.decoder_cfg.d_model);
    std::size_t v = static_cast<std::size_t>(bundle.decoder_cfg.vocab_size);
    std::size_t np = static_cast<std::size_t>(bundle.n_prefix);
    flops += linear_flops(d_feat, d) + linear_flops(d, d) + linear_flops(d, np * d);
    double seq = static_cast<double>(np + static_cast<std::size_t>(bundle.seq_len) - 1);
    for (int l = 0; l < bundle.decoder_cfg.layers; ++l) {
      flops += seq * 4.0 * linear_flops(d, d);          // q,k,v,out projections
      flops += 4.0 * seq * seq * static_cast<double>(d); // attention matmuls
      flops += seq * linear_flops(d, 4 * d);
      flops += seq * linear_flops(4 * d, d);
    }
    flops += seq * linear_flops(d, v, /*bias=*/false);
  } else {
    // One head; in multi-head bundles every task shares this cost shape, so
    // report the largest head.
    std::size_t classes = 0;
    for (const auto& hd : bundle.heads) classes = std::max(classes, hd.w.dim(0));
    flops += linear_flops(d_feat, classes);
  }
  report.flops_per_image = flops;
  return report;
}

} // namespace gic
