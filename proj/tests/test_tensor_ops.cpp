#include <doctest.h>

#include <cmath>

#include "gic/ops.hpp"
#include "gic/rng.hpp"
#include "oracles.hpp"

using namespace gic;

namespace {

TensorF random_tensor(Shape shape, Rng& rng, float lo = -1.0f, float hi = 1.0f) {
  TensorF t = TensorF::zeros(std::move(shape));
  for (auto& v : t.values()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

} // namespace

TEST_SUITE("tensor") {
  TEST_CASE("shape/value length invariant") {
    CHECK_THROWS_AS(TensorF({2, 3}, {1.0f, 2.0f}), ShapeError);
    CHECK_THROWS_AS(TensorF({0}, {}), ShapeError);
    TensorF t = TensorF::zeros({2, 3});
    CHECK(t.size() == 6);
    CHECK(shape_size(t.shape()) == t.size());
  }

  TEST_CASE("grad buffer matches value shape") {
    TensorF t = TensorF::zeros({4}, true);
    CHECK_FALSE(t.has_grad());
    t.ensure_grad();
    CHECK(t.grad().size() == t.values().size());
  }
}

TEST_SUITE("ops") {
  TEST_CASE("conv2d identity kernel returns the input") {
    TapeF tape(false);
    TensorF input({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    TensorF kernel({1, 1, 1, 1}, {1.0f});
    TensorF bias({1}, {0.0f});
    TensorF out = conv2d(tape, input, kernel, bias, 1, 0);
    for (std::size_t i = 0; i < 9; ++i) CHECK(out[i] == input[i]);
  }

  TEST_CASE("conv2d zero kernel gives zero output") {
    TapeF tape(false);
    Rng rng(3);
    TensorF input = random_tensor({2, 3, 4, 5}, rng);
    TensorF kernel = TensorF::zeros({2, 3, 3, 3});
    TensorF bias = TensorF::zeros({2});
    TensorF out = conv2d(tape, input, kernel, bias, 1, 1);
    for (float v : out.values()) CHECK(v == 0.0f);
  }

  TEST_CASE("conv2d diagonal 2x2 kernel on 3x3 ramp") {
    TapeF tape(false);
    TensorF input({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    TensorF kernel({1, 1, 2, 2}, {1, 0, 0, 1});
    TensorF bias({1}, {0.0f});
    TensorF out = conv2d(tape, input, kernel, bias, 1, 0);
    TensorF expect = oracle::conv2d(input, kernel, bias, 1, 0);
    REQUIRE(out.shape() == Shape{1, 1, 2, 2});
    for (std::size_t i = 0; i < 4; ++i) CHECK(out[i] == expect[i]);
    CHECK(out[0] == 6.0f); // 1 + 5
    CHECK(out[3] == 14.0f); // 5 + 9
  }

  TEST_CASE("conv2d equals the quadruple-loop oracle exactly on small shapes") {
    Rng rng(17);
    int cases = 0;
    for (std::size_t n : {1, 2})
      for (std::size_t ci : {1, 3})
        for (std::size_t co : {1, 2})
          for (std::size_t h : {1, 3, 5})
            for (std::size_t w : {2, 4, 5})
              for (std::size_t kh : {1, 2, 3})
                for (std::size_t kw : {1, 3})
                  for (int stride : {1, 2})
                    for (int pad : {0, 1}) {
                      if (kh > h + 2 * static_cast<std::size_t>(pad)) continue;
                      if (kw > w + 2 * static_cast<std::size_t>(pad)) continue;
                      TensorF input = random_tensor({n, ci, h, w}, rng);
                      TensorF kernel = random_tensor({co, ci, kh, kw}, rng);
                      TensorF bias = random_tensor({co}, rng);
                      TapeF tape(false);
                      TensorF got = conv2d(tape, input, kernel, bias, stride, pad);
                      TensorF expect = oracle::conv2d(input, kernel, bias, stride, pad);
                      REQUIRE(got.shape() == expect.shape());
                      for (std::size_t i = 0; i < got.size(); ++i) REQUIRE(got[i] == expect[i]);
                      ++cases;
                    }
    CHECK(cases > 500);
  }

  TEST_CASE("conv2d names the offending dimension") {
    TapeF tape(false);
    TensorF input = TensorF::zeros({1, 2, 3, 3});
    TensorF kernel = TensorF::zeros({1, 3, 2, 2});
    TensorF bias = TensorF::zeros({1});
    CHECK_THROWS_WITH_AS(conv2d(tape, input, kernel, bias, 1, 0),
                         doctest::Contains("kernel input channels"), ShapeError);
    TensorF big_kernel = TensorF::zeros({1, 2, 5, 2});
    CHECK_THROWS_WITH_AS(conv2d(tape, input, big_kernel, bias, 1, 0), doctest::Contains("kernel height"), ShapeError);
  }

  TEST_CASE("depthwise identity and zero kernels") {
    TapeF tape(false);
    Rng rng(5);
    TensorF input = random_tensor({1, 2, 3, 3}, rng);
    TensorF ident({2, 1, 1, 1}, {1.0f, 1.0f});
    TensorF out = depthwise_conv2d(tape, input, ident, 1, 0);
    for (std::size_t i = 0; i < input.size(); ++i) CHECK(out[i] == input[i]);
    TensorF zero = TensorF::zeros({2, 1, 3, 3});
    TensorF z = depthwise_conv2d(tape, input, zero, 1, 1);
    for (float v : z.values()) CHECK(v == 0.0f);
  }

  TEST_CASE("depthwise equals conv2d with a block-diagonal kernel") {
    Rng rng(7);
    TensorF input = random_tensor({2, 3, 4, 4}, rng);
    TensorF dw_kernel = random_tensor({3, 1, 3, 3}, rng);
    // Equivalent full kernel with zero cross-channel weights.
    TensorF full = TensorF::zeros({3, 3, 3, 3});
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < 9; ++i) full[(c * 3 + c) * 9 + i] = dw_kernel[c * 9 + i];
    TensorF bias = TensorF::zeros({3});
    TapeF tape(false);
    TensorF got = depthwise_conv2d(tape, input, dw_kernel, 1, 1);
    TensorF expect = oracle::conv2d(input, full, bias, 1, 1);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-6));
  }

  TEST_CASE("linear identity, zero weight and hand example") {
    TapeF tape(false);
    TensorF ident({2, 2}, {1, 0, 0, 1});
    TensorF zero_b({2}, {0, 0});
    TensorF x({1, 2}, {3, -4});
    TensorF out = linear(tape, x, ident, zero_b);
    CHECK(out[0] == 3.0f);
    CHECK(out[1] == -4.0f);

    TensorF zero_w = TensorF::zeros({2, 2});
    TensorF bias({2}, {0.5f, -1.0f});
    TensorF out2 = linear(tape, x, zero_w, bias);
    CHECK(out2[0] == 0.5f);
    CHECK(out2[1] == -1.0f);

    // [1,2] * [[1,1],[0,3]]^T + [0.5,-1] = [3.5, 5]
    TensorF w({2, 2}, {1, 1, 0, 3});
    TensorF x2({1, 2}, {1, 2});
    TensorF out3 = linear(tape, x2, w, bias);
    CHECK(out3[0] == doctest::Approx(3.5));
    CHECK(out3[1] == doctest::Approx(5.0));
  }

  TEST_CASE("linear rejects trailing-extent mismatch") {
    TapeF tape(false);
    TensorF x = TensorF::zeros({2, 3});
    TensorF w = TensorF::zeros({4, 2});
    TensorF b = TensorF::zeros({4});
    CHECK_THROWS_AS(linear(tape, x, w, b), ShapeError);
  }

  TEST_CASE("layer_norm examples") {
    TapeF tape(false);
    TensorF gain({2}, {1, 1});
    TensorF shift({2}, {0, 0});
    TensorF constant({1, 2}, {5, 5});
    TensorF z = layer_norm(tape, constant, gain, shift, 1e-5f);
    CHECK(z[0] == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(z[1] == doctest::Approx(0.0).epsilon(1e-6));

    TensorF row({1, 2}, {1, 3});
    TensorF z2 = layer_norm(tape, row, gain, shift, 1e-12f);
    CHECK(z2[0] == doctest::Approx(-1.0).epsilon(1e-5));
    CHECK(z2[1] == doctest::Approx(1.0).epsilon(1e-5));

    TensorF zero_gain({2}, {0, 0});
    TensorF sh({2}, {0.25f, -0.5f});
    TensorF z3 = layer_norm(tape, row, zero_gain, sh, 1e-5f);
    CHECK(z3[0] == 0.25f);
    CHECK(z3[1] == -0.5f);
    CHECK_THROWS_AS(layer_norm(tape, row, gain, shift, 0.0f), ShapeError);
  }

  TEST_CASE("gelu exact values") {
    TapeF tape(false);
    TensorF x({3}, {0.0f, 10.0f, 1.0f});
    TensorF y = gelu(tape, x);
    CHECK(y[0] == 0.0f);
    CHECK(std::abs(y[1] - 10.0f) < 1e-6);
    CHECK(y[2] == doctest::Approx(0.841345).epsilon(1e-5)); // x/2*(1+erf(1/sqrt 2))
  }

  TEST_CASE("softmax uniform, closed form and shift invariance") {
    TapeF tape(false);
    TensorF u({1, 4}, {0.3f, 0.3f, 0.3f, 0.3f});
    TensorF su = softmax(tape, u);
    for (std::size_t i = 0; i < 4; ++i) CHECK(su[i] == doctest::Approx(0.25).epsilon(1e-6));

    TensorF x({1, 2}, {0.0f, static_cast<float>(std::log(2.0))});
    TensorF sx = softmax(tape, x);
    CHECK(sx[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
    CHECK(sx[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-6));

    Rng rng(23);
    TensorF r = random_tensor({5, 7}, rng, -3.0f, 3.0f);
    TensorF shifted = TensorF::zeros({5, 7});
    for (std::size_t row = 0; row < 5; ++row)
      for (std::size_t j = 0; j < 7; ++j) shifted[row * 7 + j] = r[row * 7 + j] + 2.5f;
    TensorF a = softmax(tape, r);
    TensorF b = softmax(tape, shifted);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-5));
  }

  TEST_CASE("softmax rows sum to one and stay non-negative") {
    Rng rng(29);
    TapeF tape(false);
    TensorF x = random_tensor({16, 9}, rng, -30.0f, 30.0f);
    TensorF p = softmax(tape, x);
    for (std::size_t r = 0; r < 16; ++r) {
      double s = 0.0;
      for (std::size_t j = 0; j < 9; ++j) {
        CHECK(p[r * 9 + j] >= 0.0f);
        s += p[r * 9 + j];
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
  }

  TEST_CASE("attention with a single key returns the value row") {
    TapeF tape(false);
    Rng rng(31);
    TensorF q = random_tensor({1, 3, 4}, rng);
    TensorF k = random_tensor({1, 1, 4}, rng);
    TensorF v = random_tensor({1, 1, 5}, rng);
    TensorF out = attention(tape, q, k, v, false);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 5; ++j) CHECK(out[i * 5 + j] == doctest::Approx(v[j]).epsilon(1e-6));
  }

  TEST_CASE("causal attention position 0 sees only key/value 0") {
    Rng rng(37);
    TensorF q = random_tensor({1, 3, 4}, rng);
    TensorF k = random_tensor({1, 3, 4}, rng);
    TensorF v = random_tensor({1, 3, 4}, rng);
    TapeF tape(false);
    TensorF out = attention(tape, q, k, v, true);
    // Changing later keys/values must not affect row 0.
    TensorF k2 = TensorF({1, 3, 4}, std::vector<float>(k.values().begin(), k.values().end()));
    TensorF v2 = TensorF({1, 3, 4}, std::vector<float>(v.values().begin(), v.values().end()));
    for (std::size_t j = 4; j < 12; ++j) {
      k2[j] += 3.0f;
      v2[j] -= 2.0f;
    }
    TensorF out2 = attention(tape, q, k2, v2, true);
    for (std::size_t j = 0; j < 4; ++j) CHECK(out[j] == out2[j]);
  }

  TEST_CASE("two-token unmasked attention matches the hand-computed average") {
    TapeF tape(false);
    TensorF q({1, 1, 2}, {1.0f, 0.0f});
    TensorF k({1, 2, 2}, {1.0f, 0.0f, 0.0f, 1.0f});
    TensorF v({1, 2, 2}, {1.0f, 2.0f, 3.0f, 4.0f});
    TensorF out = attention(tape, q, k, v, false);
    // scores = [1,0]/sqrt(2); softmax = [e^s/(e^s+1), 1/(e^s+1)], s = 1/sqrt(2)
    double s = 1.0 / std::sqrt(2.0);
    double w0 = std::exp(s) / (std::exp(s) + 1.0);
    double w1 = 1.0 - w0;
    CHECK(out[0] == doctest::Approx(w0 * 1.0 + w1 * 3.0).epsilon(1e-6));
    CHECK(out[1] == doctest::Approx(w0 * 2.0 + w1 * 4.0).epsilon(1e-6));
  }

  TEST_CASE("cross_entropy uniform logits give ln V") {
    TapeF tape(false);
    TensorF logits = TensorF::zeros({2, 3, 5});
    std::vector<int> targets = {0, 1, 2, 3, 4, 0};
    TensorF loss = cross_entropy(tape, logits, targets, -1);
    CHECK(loss.item() == doctest::Approx(std::log(5.0)).epsilon(1e-6));
  }

  TEST_CASE("cross_entropy ignores masked positions") {
    TapeF tape(false);
    TensorF logits = TensorF::zeros({2, 4, 7});
    std::vector<int> targets = {1, 0, 0, 0, 2, 0, 0, 0};
    // Mask half the positions with ignore_index 0: loss support is the rest.
    TensorF loss = cross_entropy(tape, logits, targets, 0);
    CHECK(loss.item() == doctest::Approx(std::log(7.0)).epsilon(1e-6));
  }

  TEST_CASE("cross_entropy closed-form example") {
    Tape<double> tape(false);
    TensorD logits({1, 3}, {2.0, 0.0, 0.0});
    TensorD loss = cross_entropy(tape, logits, {0}, -1);
    // -log(e^2 / (e^2 + 2)) = 0.2395447...
    CHECK(loss.item() == doctest::Approx(0.2395447662218846).epsilon(1e-12));

    // The float path agrees to single precision.
    TapeF ftape(false);
    TensorF flogits({1, 3}, {2.0f, 0.0f, 0.0f});
    CHECK(cross_entropy(ftape, flogits, {0}, -1).item() == doctest::Approx(0.2395448).epsilon(1e-4));
  }

  TEST_CASE("cross_entropy with all positions ignored is an error") {
    TapeF tape(false);
    TensorF logits = TensorF::zeros({1, 2, 3});
    CHECK_THROWS_WITH_AS(cross_entropy(tape, logits, {0, 0}, 0), doctest::Contains("empty loss support"), Error);
  }

  TEST_CASE("global_avg_pool means over space") {
    TapeF tape(false);
    TensorF x({1, 2, 2, 2}, {1, 2, 3, 4, 10, 20, 30, 40});
    TensorF out = global_avg_pool(tape, x);
    CHECK(out[0] == doctest::Approx(2.5));
    CHECK(out[1] == doctest::Approx(25.0));
  }

  TEST_CASE("permute round trip") {
    Rng rng(41);
    TensorF x = random_tensor({2, 3, 4, 5}, rng);
    TapeF tape(false);
    TensorF p = permute(tape, x, {0, 2, 3, 1});
    REQUIRE(p.shape() == Shape{2, 4, 5, 3});
    TensorF back = permute(tape, p, {0, 3, 1, 2});
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(back[i] == x[i]);
  }
}
