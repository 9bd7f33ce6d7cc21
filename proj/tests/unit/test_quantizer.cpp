#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "actc/error.hpp"
#include "actc/kernels.hpp"
#include "actc/quantizer.hpp"
#include "actc/scheme.hpp"
#include "oracles.hpp"

namespace actc {
namespace {

Tensor suite_tensor(std::size_t n, std::uint64_t seed) { return testing::random_tensor({n}, seed, 1.0, Precision::single); }

TEST(BitFactor, DirectValues) {
  EXPECT_DOUBLE_EQ(bit_factor(2), 1.0 / 9.0);
  EXPECT_DOUBLE_EQ(bit_factor(4), 1.0 / 225.0);
  EXPECT_EQ(bit_factor(32), 0.0);
}

TEST(Widths, CodecAndLadder) {
  EXPECT_TRUE(is_codec_width(1));
  EXPECT_TRUE(is_codec_width(16));
  EXPECT_TRUE(is_codec_width(32));
  EXPECT_FALSE(is_codec_width(0));
  EXPECT_FALSE(is_codec_width(17));
  EXPECT_TRUE(on_ladder(3));
  EXPECT_FALSE(on_ladder(5));
}

TEST(Quantize, ConstantGroupDecodesExactly) {
  const Tensor x = Tensor::vector({5, 5, 5, 5});
  for (int b : {1, 2, 4, 8}) EXPECT_EQ(dequantize(quantize(x, b, 4, {1, 0})), x);
}

TEST(Quantize, EndpointsAreDeterministic) {
  const Tensor x = Tensor::vector({0, 1});
  for (std::uint64_t s = 0; s < 50; ++s) EXPECT_EQ(dequantize(quantize(x, 1, 2, {s, 0})), x);
}

TEST(Quantize, BernoulliFrequencyAtOnePoint) {
  // Group {0, 0.3, 1}: min 0, range 1, b = 1, so 0.3 decodes to 1 w.p. 0.3.
  const Tensor x = Tensor::vector({0.0, 0.3, 1.0}, Precision::dbl);
  int ones = 0;
  const int n = 10000;
  for (int s = 0; s < n; ++s) ones += dequantize(quantize(x, 1, 4, {std::uint64_t(s), 3}))[1] == 1.0;
  EXPECT_NEAR(ones / double(n), 0.3, 0.014);
}

TEST(Quantize, ExtremesDecodeToSidecarEndpoints) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor x = suite_tensor(600, seed);
    for (int b : kBitLadder) {
      const QuantizedTensor q = quantize(x, b, 256, {seed, 1});
      const Tensor y = dequantize(q);
      const GroupStats st = group_minmax(x, 256);
      for (std::size_t g = 0; g < st.mins.size(); ++g) {
        const std::size_t lo = g * 256, hi = std::min<std::size_t>(x.numel(), lo + 256);
        const double top = static_cast<double>(static_cast<float>(q.mins[g] + q.ranges[g]));
        for (std::size_t j = lo; j < hi; ++j) {
          if (x[j] == st.mins[g]) EXPECT_EQ(y[j], x[j]);
          if (x[j] == st.mins[g] + st.ranges[g]) {
            EXPECT_EQ(y[j], top);
            // The float sidecar keeps the top level within one ulp of the true max.
            EXPECT_LE(std::abs(y[j] - x[j]), std::abs(x[j]) * 0x1.0p-23);
          }
        }
      }
    }
  }
}

TEST(Quantize, CodesZeroAndTopDecodeToMinAndMax) {
  const Tensor x = Tensor::vector({-2.0, 0.5, 3.0, 1.0});
  const QuantizedTensor q = quantize(x, 3, 4, {4, 4});
  const auto codes = q.codes();
  const Tensor y = dequantize(q);
  for (std::size_t j = 0; j < 4; ++j) {
    if (codes[j] == 0) EXPECT_EQ(y[j], -2.0);
    if (codes[j] == 7) EXPECT_EQ(y[j], 3.0);
  }
  EXPECT_EQ(codes[0], 0u);
  EXPECT_EQ(codes[2], 7u);
}

TEST(Quantize, DecodedValuesLieOnNeighbouringLevels) {
  const Tensor x = suite_tensor(512, 3);
  for (int b : kBitLadder) {
    const Tensor y = dequantize(quantize(x, b, 128, {1, 1}));
    const GroupStats st = group_minmax(x, 128);
    const double L = std::ldexp(1.0, b) - 1.0;
    for (std::size_t j = 0; j < x.numel(); ++j) {
      const double step = st.ranges[j / 128] / L;
      EXPECT_LE(std::abs(y[j] - x[j]), step * (1.0 + 1e-6) + 1e-6);
    }
  }
}

TEST(Quantize, FullPrecisionIsLossless) {
  const Tensor x = suite_tensor(1000, 9);
  const QuantizedTensor q = quantize(x, 32, 256, {0, 0});
  ASSERT_TRUE(q.raw_fallback.has_value());
  EXPECT_EQ(dequantize(q), x);
}

TEST(Quantize, RejectsBadInput) {
  EXPECT_THROW((void)quantize(Tensor::vector({1, 2}), 17, 2, {}), InvalidArgument);
  EXPECT_THROW((void)quantize(Tensor::vector({1, 2}), 0, 2, {}), InvalidArgument);
  EXPECT_THROW((void)quantize(Tensor::vector({1, std::nan("")}, Precision::dbl), 4, 2, {}), NumericError);
}

TEST(Quantize, SameKeySameCodes) {
  const Tensor x = suite_tensor(300, 1);
  EXPECT_TRUE(same_payload(quantize(x, 4, 64, {7, 2}), quantize(x, 4, 64, {7, 2})));
}

TEST(Quantize, UnbiasedOverManyKeys) {
  const Tensor x = suite_tensor(64, 12);
  const std::size_t draws = 40000;
  for (int b : {2, 4}) {
    std::vector<double> sum(x.numel(), 0.0);
    for (std::size_t d = 0; d < draws; ++d) {
      const Tensor y = dequantize(quantize(x, b, 32, {d, 5}));
      for (std::size_t j = 0; j < x.numel(); ++j) sum[j] += y[j];
    }
    const GroupStats st = group_minmax(x, 32);
    const double L = std::ldexp(1.0, b) - 1.0;
    for (std::size_t j = 0; j < x.numel(); ++j) {
      const double step = st.ranges[j / 32] / L;
      // Bernoulli bound p(1 − p) ≤ ¼ gives a conservative σ.
      const double sigma = 0.5 * step / std::sqrt(double(draws));
      EXPECT_NEAR(sum[j] / double(draws), x[j], 4.0 * sigma + 1e-6);
    }
  }
}

TEST(Idempotence, RequantizingDecodedTensorReproducesCodes) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Tensor x = suite_tensor(100 + 13 * seed, seed);
    for (int b = 1; b <= 16; ++b) {
      const QuantizedTensor q = quantize(x, b, 64, {seed, 1});
      const QuantizedTensor q2 = quantize(dequantize(q), b, 64, {seed + 1000, 99});
      ASSERT_TRUE(same_payload(q, q2)) << "seed " << seed << " bits " << b;
    }
  }
}

TEST(Idempotence, DoublePrecisionTensors) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Tensor x = testing::random_tensor({333}, seed, 5.0, Precision::dbl);
    for (int b : kBitLadder) {
      const QuantizedTensor q = quantize(x, b, 256, {seed, 0});
      EXPECT_TRUE(same_payload(q, quantize(dequantize(q), b, 256, {seed + 1, 0})));
    }
  }
}

TEST(VarianceBound, ConstantTensorIsZero) {
  EXPECT_EQ(variance_bound(Tensor::full({40}, 3.0), 4, 8), 0.0);
  EXPECT_EQ(variance_bound(suite_tensor(40, 1), 32, 8), 0.0);
}

TEST(VarianceBound, TwoElementExample) {
  EXPECT_DOUBLE_EQ(variance_bound(Tensor::vector({0, 1}), 1, 2), 0.5);
}

TEST(VarianceBound, DominatesEmpiricalVariance) {
  const Tensor x = Tensor::vector({0.0, 0.3, 1.0, 0.5}, Precision::dbl);
  const std::size_t n = 100000;
  std::vector<double> s(4, 0.0), s2(4, 0.0);
  for (std::size_t d = 0; d < n; ++d) {
    const Tensor y = dequantize(quantize(x, 1, 4, {d, 0}));
    for (int j = 0; j < 4; ++j) {
      s[j] += y[j];
      s2[j] += y[j] * y[j];
    }
  }
  double total = 0.0;
  for (int j = 0; j < 4; ++j) total += s2[j] / n - (s[j] / n) * (s[j] / n);
  EXPECT_LE(total, variance_bound(x, 1, 4));
  // 0.3·0.7 + 0.5·0.5
  EXPECT_NEAR(total, 0.46, 0.01);
}

TEST(CompressedSize, Formula) {
  const Tensor x = suite_tensor(256, 2);
  EXPECT_EQ(compressed_size_bits(quantize(x, 4, 256, {})), 256u * 4 + 64 + kQuantHeaderBits);
  EXPECT_GE(compressed_size_bits(quantize(x, 32, 256, {})), 256u * 32);
}

TEST(CompressedSize, RatioAtFourBits) {
  const Tensor x = suite_tensor(4096, 3);
  const double ratio = 32.0 * 4096 / double(compressed_size_bits(quantize(x, 4, 256, {})));
  EXPECT_GE(ratio, 7.0);
}

TEST(Packing, RoundTripEveryWidth) {
  for (int b = 1; b <= 16; ++b) {
    std::vector<std::uint32_t> codes(131);
    for (std::size_t i = 0; i < codes.size(); ++i) codes[i] = (i * 2654435761u) & ((1u << b) - 1u);
    const auto words = pack_codes(codes, b);
    EXPECT_EQ(words.size(), packed_words(codes.size(), b));
    EXPECT_EQ(unpack_codes(words, b, codes.size()), codes);
  }
}

TEST(Packing, CorruptedWordCountIsRejected) {
  QuantizedTensor q = quantize(suite_tensor(100, 1), 4, 32, {});
  q.words.pop_back();
  EXPECT_THROW((void)q.codes(), FormatError);
  EXPECT_THROW((void)dequantize(q), FormatError);
}

TEST(QuantizedIo, RoundTrip) {
  for (int b : {2, 8, 32}) {
    const QuantizedTensor q = quantize(suite_tensor(700, 5), b, 256, {11, 2});
    std::stringstream ss;
    write_quantized(ss, q);
    const QuantizedTensor back = read_quantized(ss);
    EXPECT_TRUE(same_payload(q, back));
    EXPECT_EQ(back.key, q.key);
    EXPECT_EQ(dequantize(back), dequantize(q));
  }
}

TEST(Scheme, AverageBitsAndValidation) {
  CompressionScheme s;
  s.bits_per_slot = {{0, 2}, {1, 8}};
  s.forced_fullprec = {2};
  const std::map<SlotId, std::size_t> dims{{0, 100}, {1, 100}, {2, 50}};
  EXPECT_DOUBLE_EQ(s.average_bits(dims), (200.0 + 800.0 + 1600.0) / 250.0);
  EXPECT_EQ(s.bits_for(2), 32);
  EXPECT_EQ(s.bits_for(9), 32);
  s.bits_per_slot[3] = 20;
  EXPECT_THROW(s.validate(), InvalidArgument);
}

}  // namespace
}  // namespace actc
