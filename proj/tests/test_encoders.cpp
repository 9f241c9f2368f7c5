// Copyright 2026 The FarNet Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "farnet/data.hpp"
#include "farnet/encoders.hpp"
#include "farnet/errors.hpp"
#include "farnet/esam.hpp"
#include "farnet/ops.hpp"
#include "support.hpp"

namespace farnet {
namespace {

using testing::check_gradients;
using testing::random_tensor;

constexpr double kNormTol = 1e-9;
constexpr double kMapOracleTol = 1e-10;
constexpr double kEncoderGradTol = 1e-4;  // model-level composite

Image random_image(std::size_t size, std::uint64_t seed) {
  Rng rng(seed);
  Image img;
  img.width = img.height = size;
  img.pixels.resize(size * size * 3);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

double norm(const Tensor& v) {
  double s = 0.0;
  for (double x : v.data()) s += x * x;
  return std::sqrt(s);
}

TextEncoder small_text_encoder(std::uint64_t seed, std::size_t d = 16) {
  Rng rng(seed);
  return TextEncoder({10, 12, d, 2, 2, 2}, rng);
}

TEST(Linear, IdentityPassesRowsThroughAndTrains) {
  const Tensor x = random_tensor({3, 5}, 11);
  const Linear id = Linear::identity(5);
  const Tensor y = id(x);
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y.data()[i], x.data()[i]);
  EXPECT_TRUE(id.weight.requires_grad());
  EXPECT_TRUE(id.bias.requires_grad());
}

TEST(ImageEncoder, IdenticalImagesGiveBitwiseIdenticalOutputs) {
  Rng rng(1);
  const ImageEncoder enc({32, 8, 16, 2, 4, 2}, rng);
  const Image img = data::render(data::SceneSpec::from_code(17), 32);
  const auto a = enc.encode(img), b = enc.encode(img);
  EXPECT_EQ(std::vector<double>(a.tokens.data().begin(), a.tokens.data().end()),
            std::vector<double>(b.tokens.data().begin(), b.tokens.data().end()));
  EXPECT_EQ(std::vector<double>(a.pooled.data().begin(), a.pooled.data().end()),
            std::vector<double>(b.pooled.data().begin(), b.pooled.data().end()));
}

TEST(ImageEncoder, PooledHasUnitNormAndRegionsHaveExpectedShape) {
  Rng rng(2);
  const ImageEncoder enc({32, 8, 16, 2, 4, 2}, rng);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto out = enc.encode(random_image(32, s));
    EXPECT_NEAR(norm(out.pooled), 1.0, kNormTol);
    EXPECT_EQ(out.tokens.shape(), (Shape{16, 16}));
  }
}

TEST(ImageEncoder, ScaledPatchProjectionKeepsUnitNorm) {
  Rng rng(3);
  ImageEncoder enc({32, 8, 16, 1, 2, 2}, rng);
  for (auto& w : enc.patch_projection.weight.data()) w *= 7.5;
  EXPECT_NEAR(norm(enc.encode(random_image(32, 9)).pooled), 1.0, kNormTol);
}

TEST(ImageEncoder, RejectsBadGeometryAndChannels) {
  Rng rng(4);
  EXPECT_THROW(ImageEncoder({30, 8, 16, 1, 2, 2}, rng), DimensionError);
  const ImageEncoder enc({32, 8, 16, 1, 2, 2}, rng);
  Image gray;
  gray.width = gray.height = 32;
  gray.channels = 1;
  gray.pixels.resize(32 * 32);
  EXPECT_THROW(enc.encode(gray), DimensionError);
  EXPECT_THROW(enc.encode(random_image(16, 1)), DimensionError);
}

TEST(TextEncoder, SingleTokenPooledIsNormalizedTokenFeature) {
  const auto enc = small_text_encoder(5);
  const auto out = enc.encode({4});
  ASSERT_EQ(out.tokens.shape(), (Shape{1, 16}));
  const double n = norm(out.tokens);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(out.pooled[i], out.tokens[i] / n, 1e-15);
}

TEST(TextEncoder, OutputShapeFollowsLength) {
  const auto enc = small_text_encoder(6);
  EXPECT_EQ(enc.encode({1, 2, 3, 4, 5}).tokens.shape(), (Shape{5, 16}));
}

TEST(TextEncoder, PermutationInvariantWithoutPositions) {
  auto enc = small_text_encoder(7);
  for (auto& p : enc.positions.data()) p = 0.0;
  const auto a = enc.encode({1, 7, 3, 9}).pooled;
  const auto b = enc.encode({9, 3, 1, 7}).pooled;
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  // With positions the order matters.
  const auto with_pos = small_text_encoder(7);
  const auto c = with_pos.encode({1, 7, 3, 9}).pooled;
  const auto d = with_pos.encode({9, 3, 1, 7}).pooled;
  double diff = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) diff += std::abs(c[i] - d[i]);
  EXPECT_GT(diff, 1e-6);
}

TEST(TextEncoder, RejectsEmptyAndUnknownTokens) {
  const auto enc = small_text_encoder(8);
  EXPECT_THROW(enc.encode({}), DimensionError);
  EXPECT_THROW(enc.encode({1, 10}), IndexError);
  EXPECT_THROW(enc.encode(std::vector<std::size_t>(13, 1)), DimensionError);
}

TEST(TextEncoder, PromptChangesPooledOutput) {
  const auto enc = small_text_encoder(9);
  const Tensor p1 = random_tensor({3, 16}, 1, false), p2 = random_tensor({3, 16}, 2, false);
  const auto a = enc.encode_with_prompt(p1, {1, 2}).pooled;
  const auto b = enc.encode_with_prompt(p2, {1, 2}).pooled;
  EXPECT_NEAR(norm(a), 1.0, kNormTol);
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += std::abs(a[i] - b[i]);
  EXPECT_GT(diff, 1e-6);
  EXPECT_THROW(enc.encode_with_prompt(random_tensor({3, 8}, 3, false), {1}), DimensionError);
}

TEST(CrossAttention, ZeroQueryWeightsGiveUniformRows) {
  Rng rng(10);
  CrossAttentionBlock block(8, 2, rng);
  for (auto& w : block.query.weight.data()) w = 0.0;
  const Tensor map = block.attention_map(random_tensor({4, 8}, 1, false), random_tensor({3, 8}, 2, false));
  for (double x : map.data()) EXPECT_DOUBLE_EQ(x, 1.0 / 3.0);
}

TEST(CrossAttention, SingleTokenGivesOnesColumn) {
  Rng rng(11);
  const CrossAttentionBlock block(8, 2, rng);
  const Tensor map = block.attention_map(random_tensor({4, 8}, 3, false), random_tensor({1, 8}, 4, false));
  ASSERT_EQ(map.shape(), (Shape{4, 1}));
  for (double x : map.data()) EXPECT_EQ(x, 1.0);
}

TEST(CrossAttention, MapMatchesDirectEvaluation) {
  Rng rng(12);
  const CrossAttentionBlock block(8, 2, rng);
  const Tensor regions = random_tensor({4, 8}, 5, false), text = random_tensor({3, 8}, 6, false);
  const Tensor map = block.attention_map(regions, text);
  // Oracle: explicit loops in long double.
  const auto& wq = block.query.weight;
  const auto& wk = block.key.weight;
  for (std::size_t r = 0; r < 4; ++r) {
    long double logits[3];
    long double mx = -1e300L;
    for (std::size_t t = 0; t < 3; ++t) {
      long double s = 0.0L;
      for (std::size_t o = 0; o < 8; ++o) {
        long double q = 0.0L, k = 0.0L;
        for (std::size_t i = 0; i < 8; ++i) {
          q += static_cast<long double>(regions.at(r, i)) * wq.at(i, o);
          k += static_cast<long double>(text.at(t, i)) * wk.at(i, o);
        }
        s += q * k;
      }
      logits[t] = s / std::sqrt(8.0L);
      mx = std::max(mx, logits[t]);
    }
    long double z = 0.0L;
    for (auto& l : logits) z += std::exp(l - mx);
    for (std::size_t t = 0; t < 3; ++t) {
      EXPECT_NEAR(map.at(r, t), static_cast<double>(std::exp(logits[t] - mx) / z), kMapOracleTol);
    }
  }
}

TEST(CrossAttention, RowsSumToOneAndArePositive) {
  Rng rng(13);
  const CrossAttentionBlock block(8, 2, rng);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Tensor map = block.attention_map(random_tensor({6, 8}, s, false, 3.0), random_tensor({5, 8}, s + 50, false, 3.0));
    for (std::size_t r = 0; r < 6; ++r) {
      double total = 0.0;
      for (std::size_t t = 0; t < 5; ++t) {
        EXPECT_GT(map.at(r, t), 0.0);
        total += map.at(r, t);
      }
      EXPECT_NEAR(total, 1.0, 1e-9);
    }
  }
}

TEST(CrossAttention, DimensionMismatchThrows) {
  Rng rng(14);
  const CrossAttentionBlock block(8, 2, rng);
  EXPECT_THROW(block.attention_map(random_tensor({4, 6}, 1, false), random_tensor({3, 8}, 2, false)), DimensionError);
}

TEST(AttentionPair, SameImageGivesBitwiseEqualMaps) {
  Rng rng(15);
  const CrossAttentionBlock block(8, 2, rng);
  const Tensor regions = random_tensor({4, 8}, 7, false), text = random_tensor({5, 8}, 8, false);
  const auto pair = esam::attention_pair(regions, regions, text, block);
  EXPECT_EQ(pair.reference.shape(), (Shape{4, 5}));
  EXPECT_EQ(std::vector<double>(pair.reference.data().begin(), pair.reference.data().end()),
            std::vector<double>(pair.target.data().begin(), pair.target.data().end()));
}

TEST(AttentionPair, PerturbingTargetPatchChangesOnlyTargetMap) {
  Rng rng(16);
  const ImageEncoder enc({32, 8, 8, 1, 2, 2}, rng);
  const CrossAttentionBlock block(8, 2, rng);
  const Image ref = data::render(data::SceneSpec::from_code(100), 32);
  Image tgt = ref;
  const Tensor text = random_tensor({5, 8}, 9, false);
  const auto before = esam::attention_pair(enc.encode(ref).tokens, enc.encode(tgt).tokens, text, block);
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x) tgt.pixels[(y * 32 + x) * 3] ^= 0x55;
  const auto after = esam::attention_pair(enc.encode(ref).tokens, enc.encode(tgt).tokens, text, block);
  EXPECT_EQ(std::vector<double>(before.reference.data().begin(), before.reference.data().end()),
            std::vector<double>(after.reference.data().begin(), after.reference.data().end()));
  double diff = 0.0;
  for (std::size_t i = 0; i < before.target.size(); ++i) diff += std::abs(before.target[i] - after.target[i]);
  EXPECT_GT(diff, 0.0);
}

TEST(AttentionPair, RegionCountMismatchThrows) {
  Rng rng(17);
  const CrossAttentionBlock block(8, 2, rng);
  EXPECT_THROW(esam::attention_pair(random_tensor({4, 8}, 1, false), random_tensor({16, 8}, 2, false),
                                    random_tensor({3, 8}, 3, false), block),
               DimensionError);
}

TEST(EncoderGradients, ImageTextAndCrossAttentionMatchFiniteDifferences) {
  Rng rng(18);
  const ImageEncoder image({8, 4, 8, 1, 2, 2}, rng);
  const TextEncoder text({6, 10, 8, 1, 2, 2}, rng);
  const CrossAttentionBlock block(8, 2, rng);
  NamedParameters params;
  image.collect("image", params);
  text.collect("text", params);
  block.collect("cross", params);
  const Image img = random_image(8, 3);
  const Tensor w = random_tensor({4, 8}, 4, false);
  const auto r = check_gradients(params, [&] {
    const auto im = image.encode(img);
    const auto tx = text.encode({1, 4, 2});
    const auto ca = block(im.tokens, tx.tokens);
    const Tensor prompt = text.encode_with_prompt(ca.attended, {5}).pooled;
    // Kept O(1) so finite-difference roundoff stays below the comparison floor.
    return scale(add(add(sum(mul(ca.attended, w)), sum(ca.map)), add(dot(prompt, im.pooled), dot(tx.pooled, im.pooled))),
                 0.05);
  });
  EXPECT_LE(r.max_relative_error, kEncoderGradTol) << r.worst << " analytic " << r.worst_analytic << " numeric "
                                                   << r.worst_numeric;
}

}  // namespace
}  // namespace farnet
