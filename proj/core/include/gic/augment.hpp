#pragma once

#include "gic/rng.hpp"
#include "gic/tensor.hpp"

namespace gic {

// Stochastic training augmentation over a [3,H,W] image in [0,1].
// Five techniques; the first three run on every image, the last two with
// probability 1/2 each. Draw order is fixed:
//   1. horizontal flip coin (p = 0.5)
//   2. affine: rotation U[-15,15] deg, translation U[-0.1,0.1]*size per axis,
//      scale U[0.9,1.1]; bilinear sampling with symmetric reflection padding
//   3. Gaussian blur sigma U[0.1,1.0], separable, radius ceil(3*sigma)
//   4. noise coin; if hit: sigma U[0,0.05], then one normal per value (c,y,x)
//   5. color jitter coin; if hit: three channel gains U[0.9,1.1]
// The result is clamped to [0,1].
TensorF augment(const TensorF& image, Rng& rng);

// Bilinear resize with half-pixel centers; output is square target x target.
TensorF resize_bilinear(const TensorF& image, int target);

// Building blocks, exposed for direct testing.
TensorF flip_horizontal(const TensorF& image);
TensorF affine_bilinear(const TensorF& image, double rot_deg, double tx, double ty, double scale);
TensorF gaussian_blur(const TensorF& image, double sigma);

} // namespace gic
