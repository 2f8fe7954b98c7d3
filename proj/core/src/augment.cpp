#include "gic/augment.hpp"

#include <cmath>

#include "gic/error.hpp"

namespace gic {

namespace {

// Symmetric (edge-inclusive) reflection of a continuous coordinate into
// [0, n): ... 2,1,0,0,1,2 ... at both borders.
double reflect_coord(double x, int n) {
  if (n == 1) return 0.0;
  double period = 2.0 * n;
  x = std::fmod(x, period);
  if (x < 0) x += period;
  if (x >= n) x = period - x - 1e-9; // fold the mirrored half back
  return std::clamp(x, 0.0, static_cast<double>(n) - 1.0);
}

float sample_bilinear_reflect(const float* plane, int h, int w, double y, double x) {
  y = reflect_coord(y, h);
  x = reflect_coord(x, w);
  int y0 = static_cast<int>(std::floor(y));
  int x0 = static_cast<int>(std::floor(x));
  int y1 = std::min(y0 + 1, h - 1);
  int x1 = std::min(x0 + 1, w - 1);
  double fy = y - y0, fx = x - x0;
  double v00 = plane[y0 * w + x0], v01 = plane[y0 * w + x1];
  double v10 = plane[y1 * w + x0], v11 = plane[y1 * w + x1];
  return static_cast<float>((v00 * (1 - fx) + v01 * fx) * (1 - fy) + (v10 * (1 - fx) + v11 * fx) * fy);
}

void check_chw(const TensorF& image, const char* who) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw DataError(std::string(who) + ": expected [3,H,W], got " + shape_str(image.shape()));
  }
}

} // namespace

TensorF flip_horizontal(const TensorF& image) {
  check_chw(image, "flip_horizontal");
  std::size_t h = image.dim(1), w = image.dim(2);
  TensorF out = TensorF::zeros(image.shape());
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) out[(c * h + y) * w + x] = image[(c * h + y) * w + (w - 1 - x)];
  return out;
}

TensorF affine_bilinear(const TensorF& image, double rot_deg, double tx, double ty, double scale) {
  check_chw(image, "affine_bilinear");
  int h = static_cast<int>(image.dim(1));
  int w = static_cast<int>(image.dim(2));
  double cy = 0.5 * (h - 1), cx = 0.5 * (w - 1);
  double rad = rot_deg * 3.141592653589793 / 180.0;
  double cr = std::cos(rad), sr = std::sin(rad);
  double inv_scale = 1.0 / scale;
  TensorF out = TensorF::zeros(image.shape());
  // Inverse map of dst = R*S*(src - c) + c + t.
  for (std::size_t c = 0; c < 3; ++c) {
    const float* plane = image.data() + c * h * w;
    float* dst = out.data() + c * h * w;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double dx = x - cx - tx;
        double dy = y - cy - ty;
        double sx = (cr * dx + sr * dy) * inv_scale + cx;
        double sy = (-sr * dx + cr * dy) * inv_scale + cy;
        dst[y * w + x] = sample_bilinear_reflect(plane, h, w, sy, sx);
      }
    }
  }
  return out;
}

TensorF gaussian_blur(const TensorF& image, double sigma) {
  check_chw(image, "gaussian_blur");
  int h = static_cast<int>(image.dim(1));
  int w = static_cast<int>(image.dim(2));
  int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double norm = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    norm += kernel[static_cast<std::size_t>(i + radius)];
  }
  for (auto& k : kernel) k /= norm;

  TensorF tmp = TensorF::zeros(image.shape());
  TensorF out = TensorF::zeros(image.shape());
  for (std::size_t c = 0; c < 3; ++c) {
    const float* src = image.data() + c * h * w;
    float* mid = tmp.data() + c * h * w;
    float* dst = out.data() + c * h * w;
    for (int y = 0; y < h; ++y) { // horizontal pass, reflected borders
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          int xi = static_cast<int>(reflect_coord(x + i, w));
          acc += kernel[static_cast<std::size_t>(i + radius)] * src[y * w + xi];
        }
        mid[y * w + x] = static_cast<float>(acc);
      }
    }
    for (int y = 0; y < h; ++y) { // vertical pass
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          int yi = static_cast<int>(reflect_coord(y + i, h));
          acc += kernel[static_cast<std::size_t>(i + radius)] * mid[yi * w + x];
        }
        dst[y * w + x] = static_cast<float>(acc);
      }
    }
  }
  return out;
}

TensorF augment(const TensorF& image, Rng& rng) {
  check_chw(image, "augment");
  TensorF out = image;

  // 1. flip (coin drawn on every call)
  if (rng.coin(0.5)) out = flip_horizontal(out);

  // 2. affine (always applied; four draws)
  double rot = rng.uniform(-15.0, 15.0);
  double tx = rng.uniform(-0.10, 0.10) * static_cast<double>(image.dim(2));
  double ty = rng.uniform(-0.10, 0.10) * static_cast<double>(image.dim(1));
  double sc = rng.uniform(0.9, 1.1);
  out = affine_bilinear(out, rot, tx, ty, sc);

  // 3. blur (always applied)
  double sigma = rng.uniform(0.1, 1.0);
  out = gaussian_blur(out, sigma);

  // 4. additive Gaussian noise (p = 0.5)
  if (rng.coin(0.5)) {
    double nsigma = rng.uniform(0.0, 0.05);
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = static_cast<float>(out[i] + rng.normal(0.0, nsigma));
    }
  }

  // 5. channel-wise color gain (p = 0.5)
  if (rng.coin(0.5)) {
    std::size_t hw = out.dim(1) * out.dim(2);
    for (std::size_t c = 0; c < 3; ++c) {
      float gain = static_cast<float>(rng.uniform(0.9, 1.1));
      for (std::size_t i = 0; i < hw; ++i) out[c * hw + i] *= gain;
    }
  }

  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(out[i], 0.0f, 1.0f);
  return out;
}

TensorF resize_bilinear(const TensorF& image, int target) {
  check_chw(image, "resize_bilinear");
  if (target < 1) throw DataError("resize_bilinear: target must be >= 1");
  int h = static_cast<int>(image.dim(1));
  int w = static_cast<int>(image.dim(2));
  std::size_t t = static_cast<std::size_t>(target);
  TensorF out = TensorF::zeros({3, t, t});
  double sy = static_cast<double>(h) / target;
  double sx = static_cast<double>(w) / target;
  for (std::size_t c = 0; c < 3; ++c) {
    const float* plane = image.data() + c * static_cast<std::size_t>(h) * w;
    float* dst = out.data() + c * t * t;
    for (int y = 0; y < target; ++y) {
      // Half-pixel centers; source coords clamped to the valid range.
      double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(h) - 1.0);
      int y0 = static_cast<int>(std::floor(fy));
      int y1 = std::min(y0 + 1, h - 1);
      double wy = fy - y0;
      for (int x = 0; x < target; ++x) {
        double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(w) - 1.0);
        int x0 = static_cast<int>(std::floor(fx));
        int x1 = std::min(x0 + 1, w - 1);
        double wx = fx - x0;
        double v = (plane[y0 * w + x0] * (1 - wx) + plane[y0 * w + x1] * wx) * (1 - wy) +
                   (plane[y1 * w + x0] * (1 - wx) + plane[y1 * w + x1] * wx) * wy;
        dst[y * static_cast<int>(t) + x] = static_cast<float>(v);
      }
    }
  }
  return out;
}

} // namespace gic
