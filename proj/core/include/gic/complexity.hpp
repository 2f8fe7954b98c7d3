#pragma once

#include <cstddef>
#include <string>

#include "gic/model.hpp"

namespace gic {

// Analytic cost model. Conventions (documented in `convention`):
//  - one multiply-accumulate = 2 FLOPs;
//  - conv2d: 2*Cin*Cout*kh*kw*H'*W' plus H'*W'*Cout bias adds;
//  - depthwise conv: 2*C*kh*kw*H'*W' (no bias);
//  - linear: 2*d_in*d_out per row plus d_out bias adds when biased;
//  - attention: the two matmuls (QK^T, probs*V) = 4*S*S*d_model per layer;
//  - softmax, normalization, activations and pooling are excluded.
// Generative FLOPs count one teacher-forced pass over seq_len + n_prefix - 1
// positions; head settings count extractor + head.
struct ComplexityReport {
  double flops_per_image = 0.0;
  std::size_t parameter_count = 0;
  double train_ms_per_image = 0.0; // filled by the profiler, 0 when not timed
  double infer_ms_per_image = 0.0;
  std::string convention;
};

ComplexityReport count_complexity(const ModelBundleF& bundle, int image_h, int image_w);

// Shared arithmetic for the layer primitives (used by tests and the report).
double linear_flops(std::size_t d_in, std::size_t d_out, bool bias = true);
double conv2d_flops(std::size_t c_in, std::size_t c_out, std::size_t kh, std::size_t kw, std::size_t out_h,
                    std::size_t out_w);
double depthwise_flops(std::size_t channels, std::size_t kh, std::size_t kw, std::size_t out_h, std::size_t out_w);

} // namespace gic
