#include <gtest/gtest.h>

#include <cmath>

#include "drcn/core/ops.hpp"
#include "test_util.hpp"

namespace drcn {
namespace {

using test::random_param;
using test::random_tensor;

long double sig(long double v) { return 1.0L / (1.0L + std::exp(-v)); }

// Straightforward per-sequence LSTM written independently of the fused op:
// explicit loops, long double accumulation, padded steps skipped.
Tensor reference_lstm(const Tensor& x, const Tensor& mask, const Tensor& wx, const Tensor& wh, const Tensor& b,
                      bool reverse) {
  const std::size_t B = mask.dim(0), T = mask.dim(1), d = x.cols(), h = wh.rows();
  Tensor out(Shape{B * T, h}, 0.0);
  for (std::size_t s = 0; s < B; ++s) {
    std::vector<long double> hs(h, 0.0L), cs(h, 0.0L);
    for (std::size_t k = 0; k < T; ++k) {
      const std::size_t t = reverse ? T - 1 - k : k;
      if (mask.at(s, t) == 0.0) continue;
      std::vector<long double> z(4 * h, 0.0L);
      for (std::size_t g = 0; g < 4 * h; ++g) {
        long double acc = b[g];
        for (std::size_t j = 0; j < d; ++j) acc += static_cast<long double>(x.at(s * T + t, j)) * wx.at(j, g);
        for (std::size_t j = 0; j < h; ++j) acc += hs[j] * wh.at(j, g);
        z[g] = acc;
      }
      for (std::size_t u = 0; u < h; ++u) {
        const long double i = sig(z[u]), f = sig(z[h + u]), o = sig(z[2 * h + u]), g = std::tanh(z[3 * h + u]);
        cs[u] = f * cs[u] + i * g;
        hs[u] = o * std::tanh(cs[u]);
        out.at(s * T + t, u) = static_cast<double>(hs[u]);
      }
    }
  }
  return out;
}

TEST(LstmTest, ZeroWeightsGiveZeroOutput) {
  Tape tape(false);
  Rng rng(1);
  Var x = Var::constant(random_tensor({3, 2}, rng));
  Var wx = Var::constant(Tensor(Shape{2, 8}));
  Var wh = Var::constant(Tensor(Shape{2, 8}));
  Var b = Var::constant(Tensor(Shape{8}));
  const auto h = ops::lstm_sequence(tape, x, Tensor::matrix({{1, 1, 1}}), wx, wh, b, false).value();
  for (double v : h.values()) EXPECT_EQ(v, 0.0);
}

TEST(LstmTest, SingleUnitSingleStepByHand) {
  const double x0 = 0.7;
  const Tensor wx = Tensor::matrix({{0.3, -0.2, 0.5, 0.9}});
  const Tensor bias = Tensor::vector({0.1, 1.0, -0.3, 0.05});
  const long double i = sig(0.3L * x0 + 0.1L);
  const long double g = std::tanh(0.9L * x0 + 0.05L);
  const long double o = sig(0.5L * x0 - 0.3L);
  const long double expected = o * std::tanh(i * g);
  Tape tape(false);
  const auto h = ops::lstm_sequence(tape, Var::constant(Tensor::matrix({{x0}})), Tensor::matrix({{1}}),
                                    Var::constant(wx), Var::constant(Tensor::matrix({{0.4, 0.4, 0.4, 0.4}})),
                                    Var::constant(bias), false)
                     .value();
  EXPECT_LT(std::fabs(h[0] - expected), 1e-10L);
}

TEST(LstmTest, MatchesReferenceWithPadding) {
  Rng rng(5);
  const std::size_t B = 3, T = 4, d = 3, h = 2;
  const Tensor x = random_tensor({B * T, d}, rng);
  const Tensor wx = random_tensor({d, 4 * h}, rng);
  const Tensor wh = random_tensor({h, 4 * h}, rng);
  const Tensor b = random_tensor({4 * h}, rng);
  const Tensor mask = Tensor::matrix({{1, 1, 1, 1}, {1, 1, 0, 0}, {1, 0, 0, 0}});
  for (bool reverse : {false, true}) {
    Tape tape(false);
    const auto got = ops::lstm_sequence(tape, Var::constant(x), mask, Var::constant(wx), Var::constant(wh),
                                        Var::constant(b), reverse)
                         .value();
    const auto want = reference_lstm(x, mask, wx, wh, b, reverse);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  }
}

TEST(LstmTest, ReversingInputSwapsDirections) {
  Rng rng(6);
  const std::size_t T = 5, d = 3, h = 2;
  const Tensor x = random_tensor({T, d}, rng);
  Tensor reversed(Shape{T, d});
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < d; ++j) reversed.at(t, j) = x.at(T - 1 - t, j);
  }
  Var wx = Var::constant(random_tensor({d, 4 * h}, rng));
  Var wh = Var::constant(random_tensor({h, 4 * h}, rng));
  Var b = Var::constant(random_tensor({4 * h}, rng));
  const Tensor mask(Shape{1, T}, 1.0);
  Tape tape(false);
  const auto fwd_on_reversed = ops::lstm_sequence(tape, Var::constant(reversed), mask, wx, wh, b, false).value();
  const auto bwd_on_original = ops::lstm_sequence(tape, Var::constant(x), mask, wx, wh, b, true).value();
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t u = 0; u < h; ++u) EXPECT_EQ(fwd_on_reversed.at(T - 1 - t, u), bwd_on_original.at(t, u));
  }
}

TEST(LstmTest, PaddedStepsEmitZeros) {
  Rng rng(7);
  Var x = Var::constant(random_tensor({4, 2}, rng));
  Var wx = Var::constant(random_tensor({2, 4}, rng));
  Var wh = Var::constant(random_tensor({1, 4}, rng));
  Var b = Var::constant(random_tensor({4}, rng));
  Tape tape(false);
  const auto h = ops::lstm_sequence(tape, x, Tensor::matrix({{1, 1}, {1, 0}}), wx, wh, b, true).value();
  EXPECT_EQ(h.at(3, 0), 0.0);
}

TEST(LstmTest, SingleStepLossGradient) {
  Rng rng(8);
  Var x = random_param({1, 3}, rng);
  Var wx = random_param({3, 8}, rng);
  Var wh = random_param({2, 8}, rng);
  Var b = random_param({8}, rng);
  const Tensor mask = Tensor::matrix({{1}});
  const double err = test::check_op(
      [&](Tape& t) { return ops::lstm_sequence(t, x, mask, wx, wh, b, false); }, {x, wx, wh, b});
  EXPECT_LT(err, 1e-6);
}

TEST(LstmTest, SequenceGradientWithPaddingBothDirections) {
  Rng rng(9);
  Var x = random_param({3 * 4, 3}, rng);
  Var wx = random_param({3, 8}, rng);
  Var wh = random_param({2, 8}, rng);
  Var b = random_param({8}, rng);
  const Tensor mask = Tensor::matrix({{1, 1, 1, 1}, {1, 1, 0, 0}, {1, 0, 0, 0}});
  for (bool reverse : {false, true}) {
    const double err = test::check_op(
        [&](Tape& t) { return ops::lstm_sequence(t, x, mask, wx, wh, b, reverse); }, {x, wx, wh, b});
    EXPECT_LT(err, 1e-6) << "reverse=" << reverse;
  }
}

TEST(LstmTest, FaultInjectionBreaksGradient) {
  Rng rng(10);
  Var x = random_param({3, 2}, rng);
  Var wx = random_param({2, 8}, rng);
  Var wh = random_param({2, 8}, rng);
  Var b = random_param({8}, rng);
  const Tensor mask(Shape{1, 3}, 1.0);
  ops::testing::set_backward_fault(1.5);
  const double err = test::check_op(
      [&](Tape& t) { return ops::lstm_sequence(t, x, mask, wx, wh, b, false); }, {x, wx, wh, b});
  ops::testing::set_backward_fault(1.0);
  EXPECT_GT(err, 1e-2);
}

}  // namespace
}  // namespace drcn
