#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "../support/fixtures.hpp"
#include "biogan/discriminator.hpp"
#include "biogan/error.hpp"
#include "biogan/generators.hpp"
#include "biogan/nn/ops.hpp"

namespace biogan {
namespace {

using testing::random_tensor;

std::size_t conv_params(int k, int in, int out) { return static_cast<std::size_t>(k) * k * in * out + out; }

std::size_t resnet_params(double m) {
  const int a = scaled_width(64, m), b = scaled_width(128, m), c = scaled_width(256, m);
  std::size_t n = conv_params(7, 3, a) + 2 * a;
  n += conv_params(3, a, b) + 2 * b;
  n += conv_params(3, b, c) + 2 * c;
  n += 9 * 2 * (conv_params(3, c, c) + 2 * c);
  n += conv_params(3, c, b) + 2 * b;
  n += conv_params(3, b, a) + 2 * a;
  n += conv_params(7, a, 3);
  return n;
}

std::size_t unet_params(int k, double m) {
  const int base[8] = {64, 128, 256, 512, 512, 512, 512, 512};
  int w[8];
  for (int i = 0; i < 8; ++i) w[i] = scaled_width(base[i], m);
  std::size_t n = 0;
  int in = 3;
  for (int i = 0; i < 8; ++i) {
    n += conv_params(k, in, w[i]);
    if (i > 0 && i < 7) n += 2 * w[i];
    in = w[i];
  }
  for (int j = 1; j <= 8; ++j) {
    const int up_in = j == 1 ? w[7] : 2 * w[8 - j];
    const int out = j == 8 ? 3 : w[7 - j];
    n += conv_params(k, up_in, out);
    if (j < 8) n += 2 * out;
  }
  return n;
}

std::size_t discriminator_params(double m) {
  const int w[4] = {scaled_width(64, m), scaled_width(128, m), scaled_width(256, m), scaled_width(512, m)};
  std::size_t n = conv_params(4, 3, w[0]);
  for (int i = 1; i < 4; ++i) n += conv_params(4, w[i - 1], w[i]) + 2 * w[i];
  return n + conv_params(4, w[3], 1);
}

std::vector<double> flat_values(const Generator& g) {
  std::vector<const nn::Parameter*> p, b;
  g.collect(p, b);
  std::vector<double> out;
  for (const auto* q : p) out.insert(out.end(), q->value.begin(), q->value.end());
  return out;
}

TEST(Generator, BuildIsDeterministic) {
  for (auto kind : {GeneratorKind::kResNet, GeneratorKind::kUNetStride2, GeneratorKind::kUNetStride1}) {
    const auto a = Generator::build({kind, 0.125, false}, 0);
    const auto b = Generator::build({kind, 0.125, false}, 0);
    const auto c = Generator::build({kind, 0.125, false}, 1);
    EXPECT_EQ(flat_values(a), flat_values(b));
    EXPECT_EQ(a.hash(), b.hash());
    EXPECT_NE(flat_values(a), flat_values(c));
    EXPECT_EQ(a.parameter_count(), c.parameter_count());
  }
}

TEST(Generator, ResNetLayout) {
  const auto g = Generator::build({GeneratorKind::kResNet, 1.0, false}, 0);
  std::map<std::string, int> roles;
  for (const auto& l : g.layers()) ++roles[l.role];
  EXPECT_EQ(roles["front"], 3);
  EXPECT_EQ(roles["residual"], 9);
  EXPECT_EQ(roles["back"], 2);
  EXPECT_EQ(roles["final"], 1);
  EXPECT_EQ(g.layers().front().out_channels, 64);
  EXPECT_EQ(g.layers()[2].out_channels, 256);
  EXPECT_TRUE(g.skip_connections().empty());
  EXPECT_EQ(g.parameter_count(), resnet_params(1.0));
  EXPECT_EQ(Generator::build({GeneratorKind::kResNet, 0.125, false}, 3).parameter_count(), resnet_params(0.125));
}

TEST(Generator, UNetLayoutAndCounts) {
  const auto s1 = Generator::build({GeneratorKind::kUNetStride1, 1.0, false}, 0);
  const auto s2 = Generator::build({GeneratorKind::kUNetStride2, 1.0, false}, 0);
  ASSERT_EQ(s1.layers().size(), 16u);
  ASSERT_EQ(s2.layers().size(), 16u);
  for (std::size_t i = 0; i < 16; ++i) {
    const auto& a = s1.layers()[i];
    const auto& b = s2.layers()[i];
    EXPECT_EQ(a.role, i < 8 ? "down" : "up");
    EXPECT_EQ(a.role, b.role);
    EXPECT_EQ(a.in_channels, b.in_channels);
    EXPECT_EQ(a.out_channels, b.out_channels);
    EXPECT_EQ(a.kernel, 3);
    EXPECT_EQ(a.stride, 1);
    EXPECT_EQ(b.kernel, 4);
    EXPECT_EQ(b.stride, 2);
  }
  const auto links = s1.skip_connections();
  ASSERT_EQ(links.size(), 7u);
  for (const auto& [down, up] : links) EXPECT_EQ(up, 9 - down);
  // up layer 9-i takes twice the channels of down layer i through the skip
  for (const auto& [down, up] : links) {
    if (up == 1) continue;
    EXPECT_EQ(s1.layers()[7 + up].in_channels, 2 * s1.layers()[down - 1].out_channels);
  }
  EXPECT_EQ(s1.parameter_count(), unet_params(3, 1.0));
  EXPECT_EQ(s2.parameter_count(), unet_params(4, 1.0));
  EXPECT_NE(s1.parameter_count(), s2.parameter_count());
  EXPECT_EQ(Generator::build({GeneratorKind::kUNetStride1, 0.125, true}, 0).parameter_count(),
            unet_params(3, 0.125));
}

TEST(Generator, StrideTwoBottleneckIsOnePixel) {
  int n = 256;
  for (int i = 0; i < 8; ++i) n = nn::conv_output_size(n, {4, 2, 1, nn::PadMode::kZero});
  EXPECT_EQ(n, 1);
  for (int i = 0; i < 8; ++i) n = nn::conv_transpose_output_size(n, {4, 2, 1, nn::PadMode::kZero});
  EXPECT_EQ(n, 256);

  const auto g = Generator::build({GeneratorKind::kUNetStride2, 1.0 / 64, false}, 0);
  Rng rng(1);
  const Tensor y = g.forward(random_tensor(rng, 3, 256, 256));
  EXPECT_EQ(y.height(), 256);
  EXPECT_EQ(y.width(), 256);
}

TEST(Generator, PreservesShapeAndTanhRange) {
  Rng rng(7);
  const auto res = Generator::build({GeneratorKind::kResNet, 1.0 / 16, false}, 0);
  for (int trial = 0; trial < 6; ++trial) {
    const int h = 4 * static_cast<int>(1 + rng.below(8));
    const int w = 4 * static_cast<int>(1 + rng.below(8));
    const Tensor y = res.forward(random_tensor(rng, 3, h, w));
    EXPECT_EQ(y.height(), h);
    EXPECT_EQ(y.width(), w);
    for (double v : y.values()) EXPECT_LE(std::fabs(v), 1.0);
  }
  const auto unet = Generator::build({GeneratorKind::kUNetStride1, 1.0 / 64, false}, 0);
  const Tensor y = unet.forward(random_tensor(rng, 3, 256, 512, -5.0, 5.0));
  EXPECT_EQ(y.height(), 256);
  EXPECT_EQ(y.width(), 512);
  for (double v : y.values()) EXPECT_LE(std::fabs(v), 1.0);
}

TEST(Generator, RejectsIncompatibleSizes) {
  const auto unet = Generator::build({GeneratorKind::kUNetStride1, 1.0 / 64, false}, 0);
  EXPECT_THROW(unet.forward(Tensor(3, 64, 64)), ShapeError);
  EXPECT_THROW(unet.forward(Tensor(3, 256, 300)), ShapeError);
  EXPECT_THROW(unet.forward(Tensor(1, 256, 256)), ShapeError);
  const auto res = Generator::build({GeneratorKind::kResNet, 1.0 / 16, false}, 0);
  EXPECT_THROW(res.forward(Tensor(3, 10, 12)), ShapeError);
  EXPECT_THROW(Generator::build({GeneratorKind::kResNet, 0.0, false}, 0), ArgumentError);
  EXPECT_THROW(Generator::build({static_cast<GeneratorKind>(9), 1.0, false}, 0), ArgumentError);
}

TEST(Generator, TranslatePadsAndCrops) {
  const auto g = Generator::build({GeneratorKind::kUNetStride1, 1.0 / 64, false}, 0);
  Rng rng(4);
  const ImageTensor x(random_tensor(rng, 3, 70, 90), RangeTag::kGen);
  const auto y = translate_image(g, x);
  EXPECT_EQ(y.height(), 70);
  EXPECT_EQ(y.width(), 90);
  const Padding p = padding_to_multiple(70, 90, 256);
  EXPECT_EQ(p.top + p.bottom + 70, 256);
  EXPECT_EQ(p.left + p.right + 90, 256);
  EXPECT_LE(p.bottom - p.top, 1);
  EXPECT_EQ(translate_image(g, x).tensor(), y.tensor());
}

TEST(Generator, InferenceIsRepeatable) {
  const auto g = Generator::build({GeneratorKind::kResNet, 1.0 / 16, false}, 5);
  Rng rng(0);
  const ImageTensor x(random_tensor(rng, 3, 16, 16), RangeTag::kGen);
  EXPECT_EQ(generate(g, x).tensor(), generate(g, x).tensor());
}

// d mean(G(x)) / d theta at sampled parameter coordinates.
void check_parameter_gradients(Generator& g, const Tensor& x, nn::Mode mode, int samples) {
  auto loss = [&] {
    const Tensor y = g.forward_train(x, mode);
    double s = 0.0;
    for (double v : y.values()) s += v;
    return s / static_cast<double>(y.size());
  };
  auto set = g.parameters();
  set.zero_grad();
  const Tensor y = g.forward_train(x, mode);
  g.backward(Tensor(y.channels(), y.height(), y.width(), 1.0 / static_cast<double>(y.size())));

  Rng rng(99);
  double worst = 0.0;
  int checked = 0;
  for (int attempt = 0; checked < samples && attempt < 8 * samples; ++attempt) {
    auto* p = set.params[rng.below(set.params.size())];
    const std::size_t k = rng.below(p->size());
    const double keep = p->value[k];
    const double h = 1e-6;
    const double mid = loss();
    p->value[k] = keep + h;
    const double up = loss();
    p->value[k] = keep - h;
    const double down = loss();
    p->value[k] = keep;
    const double numeric = (up - down) / (2 * h);
    const double analytic = p->grad[k];
    if (std::fabs(numeric) < 1e-8 && std::fabs(analytic) < 1e-8) continue;
    // one-sided slopes disagree when a ReLU kink lies inside the step
    const double forward = (up - mid) / h;
    const double backward = (mid - down) / h;
    if (std::fabs(forward - backward) > 1e-4 * std::max(std::fabs(forward), std::fabs(backward))) continue;
    worst = std::max(worst, std::fabs(analytic - numeric) / std::max(std::fabs(analytic), std::fabs(numeric)));
    ++checked;
  }
  EXPECT_EQ(checked, samples);
  EXPECT_LE(worst, 1e-3);
}

TEST(Generator, ParameterGradientsMatchFiniteDifferences) {
  Rng rng(12);
  {
    auto g = Generator::build({GeneratorKind::kResNet, 1.0 / 32, false}, 1);
    check_parameter_gradients(g, random_tensor(rng, 3, 8, 8), nn::Mode::kTrainingFrozenStats, 40);
  }
  for (auto kind : {GeneratorKind::kUNetStride1, GeneratorKind::kUNetStride2}) {
    auto g = Generator::build({kind, 1.0 / 32, false}, 1);
    check_parameter_gradients(g, random_tensor(rng, 3, 256, 256), nn::Mode::kTrainingFrozenStats, 30);
  }
}

TEST(Generator, InputGradientMatchesFiniteDifferences) {
  auto g = Generator::build({GeneratorKind::kResNet, 1.0 / 32, false}, 2);
  Rng rng(3);
  const Tensor x = random_tensor(rng, 3, 8, 8);
  const nn::Mode mode = nn::Mode::kTrainingFrozenStats;
  const Tensor y = g.forward_train(x, mode);
  const Tensor gx = g.backward(Tensor(3, 8, 8, 1.0 / static_cast<double>(y.size())));
  const auto r = testing::check_gradient(
      [&](const Tensor& in) {
        const Tensor out = g.forward_train(in, mode);
        double s = 0.0;
        for (double v : out.values()) s += v;
        return s / static_cast<double>(out.size());
      },
      x, gx, 50, 5);
  EXPECT_LE(r.max_relative_error, 1e-3);
}

double max_adjacent_difference(const Tensor& y) {
  double worst = 0.0;
  for (int c = 0; c < y.channels(); ++c) {
    for (int i = 0; i < y.height(); ++i) {
      for (int j = 0; j < y.width(); ++j) {
        if (j + 1 < y.width()) worst = std::max(worst, std::fabs(y.at(c, i, j + 1) - y.at(c, i, j)));
        if (i + 1 < y.height()) worst = std::max(worst, std::fabs(y.at(c, i + 1, j) - y.at(c, i, j)));
      }
    }
  }
  return worst;
}

TEST(Generator, StrideOneIsSmootherOnConstantInput) {
  const Tensor flat(3, 256, 256, 0.3);
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const auto s1 = Generator::build({GeneratorKind::kUNetStride1, 1.0 / 32, false}, seed);
    const auto s2 = Generator::build({GeneratorKind::kUNetStride2, 1.0 / 32, false}, seed);
    EXPECT_LE(max_adjacent_difference(s1.forward(flat)), max_adjacent_difference(s2.forward(flat)))
        << "seed " << seed;
  }
}

TEST(Discriminator, ReceptiveFieldIsSeventy) {
  const auto d = Discriminator::build(0);
  EXPECT_EQ(d.receptive_field(), 70);
  EXPECT_EQ(d.cell_stride(), 8);
  const std::vector<nn::ConvGeometry> one = {{3, 1, 0}};
  const std::vector<nn::ConvGeometry> two = {{3, 1, 0}, {3, 1, 0}};
  EXPECT_EQ(receptive_field(one), 3);
  EXPECT_EQ(receptive_field(two), 5);
}

TEST(Discriminator, OutputSizeFollowsStrideArithmetic) {
  const auto d = Discriminator::build(0, {0.125});
  auto trace = [](int n) {
    for (int s : {2, 2, 2, 1, 1}) n = (n - 4) / s + 1;
    return n;
  };
  EXPECT_EQ(d.output_size(70), 1);
  EXPECT_EQ(trace(70), 1);
  for (int n : {70, 71, 100, 128, 256, 512}) EXPECT_EQ(d.output_size(n), trace(n));
  Rng rng(2);
  const auto map = discriminate(d, ImageTensor(random_tensor(rng, 3, 256, 128), RangeTag::kGen));
  EXPECT_EQ(map.height, trace(256));
  EXPECT_EQ(map.width, trace(128));
  EXPECT_GT(trace(512), 2 * trace(256) - 10);
}

TEST(Discriminator, BuildDeterministicAndCounted) {
  const auto a = Discriminator::build(7);
  const auto b = Discriminator::build(7);
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), Discriminator::build(8).hash());
  EXPECT_EQ(a.parameter_count(), discriminator_params(1.0));
  EXPECT_EQ(Discriminator::build(0, {0.125}).parameter_count(), discriminator_params(0.125));
}

TEST(Discriminator, RejectsSmallInputs) {
  const auto d = Discriminator::build(0, {0.125});
  EXPECT_THROW(d.forward(Tensor(3, 69, 100)), ShapeError);
  EXPECT_THROW(d.forward(Tensor(3, 100, 69)), ShapeError);
  EXPECT_NO_THROW(d.forward(Tensor(3, 70, 70)));
}

TEST(Discriminator, CellsOnlySeeTheirWindow) {
  const auto d = Discriminator::build(3, {0.125});
  Rng rng(8);
  const Tensor base = random_tensor(rng, 3, 110, 94);
  const Tensor y0 = d.forward(base);
  const int stride = d.cell_stride();
  const int rf = d.receptive_field();
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = base;
    const int py = static_cast<int>(rng.below(110));
    const int px = static_cast<int>(rng.below(94));
    x.at(static_cast<int>(rng.below(3)), py, px) += 0.75;
    const Tensor y = d.forward(x);
    for (int i = 0; i < y.height(); ++i) {
      for (int j = 0; j < y.width(); ++j) {
        const bool inside = py >= i * stride && py < i * stride + rf && px >= j * stride && px < j * stride + rf;
        if (!inside) EXPECT_EQ(y.at(0, i, j), y0.at(0, i, j)) << "cell " << i << "," << j;
      }
    }
  }
}

TEST(Discriminator, MeanSigmoidStrictlyInsideUnitInterval) {
  const auto d = Discriminator::build(1, {0.125});
  Rng rng(6);
  for (int t = 0; t < 3; ++t) {
    const auto map = discriminate(d, ImageTensor(random_tensor(rng, 3, 80, 80), RangeTag::kGen));
    double s = 0.0;
    for (double z : map.logits) s += 1.0 / (1.0 + std::exp(-z));
    s /= static_cast<double>(map.logits.size());
    EXPECT_GT(s, 0.0);
    EXPECT_LT(s, 1.0);
  }
}

TEST(Discriminator, InputGradientMatchesFiniteDifferences) {
  auto d = Discriminator::build(4, {0.125});
  Rng rng(10);
  const Tensor x = random_tensor(rng, 3, 72, 72);
  const nn::Mode mode = nn::Mode::kTrainingFrozenStats;
  auto mean_logit = [&](const Tensor& in) {
    const Tensor y = d.forward_train(in, mode);
    double s = 0.0;
    for (double v : y.values()) s += v;
    return s / static_cast<double>(y.size());
  };
  const Tensor y = d.forward_train(x, mode);
  const Tensor gx = d.backward(Tensor(1, y.height(), y.width(), 1.0 / static_cast<double>(y.size())));
  EXPECT_LE(testing::check_gradient(mean_logit, x, gx, 50, 1).max_relative_error, 1e-3);
}

}  // namespace
}  // namespace biogan
