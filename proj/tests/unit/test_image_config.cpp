#include <cmath>
#include <fstream>

#include <gtest/gtest.h>

#include "../support/fixtures.hpp"
#include "biogan/config.hpp"
#include "biogan/dataset.hpp"
#include "biogan/error.hpp"
#include "biogan/image.hpp"

namespace biogan {
namespace {

using testing::Raster;
using testing::TempDir;

Raster solid(int w, int h, unsigned char v) {
  return {w, h, std::vector<unsigned char>(static_cast<std::size_t>(w) * h * 3, v)};
}

TEST(Image, BlackAndWhiteMapToRangeEndpoints) {
  TempDir dir;
  testing::write_raster(dir / "black.png", solid(8, 8, 0));
  testing::write_raster(dir / "white.png", solid(8, 8, 255));
  const auto black = load_image(dir / "black.png", {8, 8});
  const auto white = load_image(dir / "white.png", {8, 8});
  EXPECT_EQ(black.range(), RangeTag::kGen);
  for (double v : black.tensor().values()) EXPECT_EQ(v, -1.0);
  for (double v : white.tensor().values()) EXPECT_EQ(v, 1.0);
}

TEST(Image, MidValueFollowsAffineMap) {
  TempDir dir;
  testing::write_raster(dir / "gray.png", solid(4, 3, 128));
  const auto img = load_image(dir / "gray.png");
  EXPECT_EQ(img.width(), 4);
  EXPECT_EQ(img.height(), 3);
  for (double v : img.tensor().values()) EXPECT_NEAR(v, 0.00392156862745098, 1e-15);
}

TEST(Image, ChannelsStayInRgbOrder) {
  TempDir dir;
  Raster r = solid(2, 2, 0);
  for (int p = 0; p < 4; ++p) r.rgb[p * 3] = 255;  // red
  testing::write_raster(dir / "red.png", r);
  const auto img = load_image(dir / "red.png");
  EXPECT_EQ(img.at(0, 0, 0), 1.0);
  EXPECT_EQ(img.at(1, 0, 0), -1.0);
  EXPECT_EQ(img.at(2, 0, 0), -1.0);
}

TEST(Image, ResizesToRequestedSize) {
  TempDir dir;
  Rng rng(3);
  Raster r{40, 30, {}};
  for (int i = 0; i < 40 * 30 * 3; ++i) r.rgb.push_back(static_cast<unsigned char>(rng.below(256)));
  testing::write_raster(dir / "noise.png", r);
  for (ImageSize size : {ImageSize{16, 12}, ImageSize{64, 48}, ImageSize{40, 30}, ImageSize{7, 33}}) {
    const auto img = load_image(dir / "noise.png", size);
    EXPECT_EQ(img.width(), size.width);
    EXPECT_EQ(img.height(), size.height);
    for (double v : img.tensor().values()) {
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Image, SaveWritesExtremePixels) {
  TempDir dir;
  save_image(ImageTensor(Tensor(3, 5, 6, -1.0), RangeTag::kGen), dir / "lo.png");
  save_image(ImageTensor(Tensor(3, 5, 6, 1.0), RangeTag::kGen), dir / "hi.png");
  const auto lo = testing::read_raster(dir / "lo.png");
  const auto hi = testing::read_raster(dir / "hi.png");
  EXPECT_EQ(lo.width, 6);
  EXPECT_EQ(lo.height, 5);
  for (auto v : lo.rgb) EXPECT_EQ(v, 0);
  for (auto v : hi.rgb) EXPECT_EQ(v, 255);
}

TEST(Image, RandomRoundTripWithinQuantization) {
  TempDir dir;
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor t = testing::random_tensor(rng, 3, 9 + trial, 13);
    save_image(ImageTensor(t, RangeTag::kGen), dir / "rt.png");
    const auto back = load_image(dir / "rt.png");
    ASSERT_TRUE(back.tensor().same_shape(t));
    for (std::size_t i = 0; i < t.size(); ++i) {
      EXPECT_LE(std::fabs(back.tensor().values()[i] - t.values()[i]), 1.0 / 127.5);
    }
  }
}

TEST(Image, LoadSaveLoadIsExact) {
  TempDir dir;
  Rng rng(5);
  Raster r{10, 7, {}};
  for (int i = 0; i < 10 * 7 * 3; ++i) r.rgb.push_back(static_cast<unsigned char>(rng.below(256)));
  testing::write_raster(dir / "a.png", r);
  save_image(load_image(dir / "a.png"), dir / "b.png");
  EXPECT_EQ(testing::read_raster(dir / "b.png").rgb, r.rgb);
}

TEST(Image, Errors) {
  TempDir dir;
  EXPECT_THROW(load_image(dir / "missing.png"), IoError);
  {
    std::ofstream(dir / "text.png") << "definitely not an image";
  }
  EXPECT_THROW(load_image(dir / "text.png"), DecodeError);
  {
    std::ofstream(dir / "bad.png", std::ios::binary) << "\x89PNG\r\n\x1a\n garbage";
  }
  EXPECT_THROW(load_image(dir / "bad.png"), DecodeError);
  testing::write_raster(dir / "ok.png", solid(4, 4, 9));
  EXPECT_THROW(load_image(dir / "ok.png", {0, 4}), ArgumentError);
  const ImageTensor img(Tensor(3, 2, 2), RangeTag::kGen);
  EXPECT_THROW(save_image(img, dir / "out.bmp"), ArgumentError);
  EXPECT_THROW(save_image(img, dir / "no" / "such" / "dir.png"), IoError);
}

TEST(Image, TensorInvariants) {
  EXPECT_THROW(ImageTensor(Tensor(1, 2, 2), RangeTag::kGen), ArgumentError);
  EXPECT_THROW(ImageTensor(Tensor(3, 2, 2, 1.5), RangeTag::kGen), ArgumentError);
  EXPECT_THROW(ImageTensor(Tensor(3, 2, 2, -0.1), RangeTag::kUnit), ArgumentError);
  EXPECT_THROW(ImageTensor(Tensor(3, 2, 2, NAN), RangeTag::kDescriptor), ArgumentError);
  EXPECT_NO_THROW(ImageTensor(Tensor(3, 2, 2, 40.0), RangeTag::kDescriptor));
}

TEST(Image, DescriptorRangeAffineMap) {
  const auto lo = to_descriptor_range(ImageTensor(Tensor(3, 1, 1, -1.0), RangeTag::kGen));
  const auto hi = to_descriptor_range(ImageTensor(Tensor(3, 1, 1, 1.0), RangeTag::kGen));
  const auto mid = to_descriptor_range(ImageTensor(Tensor(3, 1, 1, 0.0), RangeTag::kGen));
  EXPECT_EQ(lo.range(), RangeTag::kDescriptor);
  for (int c = 0; c < 3; ++c) {
    EXPECT_NEAR(lo.at(c, 0, 0), -kDescriptorMean[c] / kDescriptorStd[c], 1e-15);
    EXPECT_NEAR(hi.at(c, 0, 0), (1.0 - kDescriptorMean[c]) / kDescriptorStd[c], 1e-15);
    EXPECT_NEAR(mid.at(c, 0, 0), (0.5 - kDescriptorMean[c]) / kDescriptorStd[c], 1e-15);
    EXPECT_NEAR(descriptor_range_slope(c), 0.5 / kDescriptorStd[c], 1e-15);
  }
  // red channel at mid-gray: (0.5 - 0.485) / 0.229
  EXPECT_NEAR(mid.at(0, 0, 0), 0.06550218340611353, 1e-14);
  EXPECT_THROW(to_descriptor_range(mid), ArgumentError);
}

TEST(Image, DescriptorRangeInverts) {
  Rng rng(2);
  const ImageTensor x(testing::random_tensor(rng, 3, 4, 5), RangeTag::kGen);
  const auto back = from_descriptor_range(to_descriptor_range(x));
  for (std::size_t i = 0; i < x.tensor().size(); ++i) {
    EXPECT_NEAR(back.tensor().values()[i], x.tensor().values()[i], 1e-14);
  }
}

TEST(Dataset, CountsAndOrdering) {
  TempDir dir;
  std::filesystem::create_directories(dir / "x");
  std::filesystem::create_directories(dir / "y");
  for (const char* name : {"c.png", "a.png", "b.jpg"}) testing::write_raster(dir / "x" / name, solid(4, 4, 1));
  for (int i = 0; i < 5; ++i) testing::write_raster(dir / "y" / ("t" + std::to_string(4 - i) + ".png"), solid(4, 4, 2));
  std::ofstream(dir / "x" / "notes.txt") << "ignored";
  const auto ds = load_dataset(dir / "x", dir / "y");
  ASSERT_EQ(ds.source_images.size(), 3u);
  ASSERT_EQ(ds.target_images.size(), 5u);
  EXPECT_EQ(ds.source_images[0].filename(), "a.png");
  EXPECT_EQ(ds.source_images[1].filename(), "b.jpg");
  EXPECT_EQ(ds.source_images[2].filename(), "c.png");
  EXPECT_EQ(ds.target_images[0].filename(), "t0.png");
  const auto again = load_dataset(dir / "x", dir / "y");
  EXPECT_EQ(again.source_images, ds.source_images);
  EXPECT_EQ(again.target_images, ds.target_images);
}

TEST(Dataset, TwentyAndTwenty) {
  TempDir dir;
  std::filesystem::create_directories(dir / "lab");
  std::filesystem::create_directories(dir / "field");
  for (int i = 0; i < 20; ++i) {
    testing::write_raster(dir / "lab" / ("l" + std::to_string(i) + ".png"), solid(2, 2, 10));
    testing::write_raster(dir / "field" / ("f" + std::to_string(i) + ".png"), solid(2, 2, 20));
  }
  const auto ds = load_dataset(dir / "lab", dir / "field");
  EXPECT_EQ(ds.source_images.size(), 20u);
  EXPECT_EQ(ds.target_images.size(), 20u);
}

TEST(Dataset, EmptyOrMissingDirectory) {
  TempDir dir;
  std::filesystem::create_directories(dir / "empty");
  std::filesystem::create_directories(dir / "full");
  testing::write_raster(dir / "full" / "a.png", solid(2, 2, 0));
  EXPECT_THROW(load_dataset(dir / "empty", dir / "full"), DatasetError);
  EXPECT_THROW(load_dataset(dir / "full", dir / "empty"), DatasetError);
  EXPECT_THROW(load_dataset(dir / "nope", dir / "full"), DatasetError);
}

TEST(Config, DefaultsArePublishedSetup) {
  const TrainingConfig cfg;
  EXPECT_EQ(cfg.lambda_adv, 1e4);
  EXPECT_EQ(cfg.lambda_style, 1.0);
  EXPECT_EQ(cfg.lambda_content, 0.4);
  EXPECT_EQ(cfg.epochs, 100);
  EXPECT_EQ(cfg.image_size, (ImageSize{1024, 768}));
  EXPECT_EQ(cfg.generator, GeneratorKind::kUNetStride1);
  EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, ParsesFileSyntax) {
  const auto cfg = parse_config(
      "# comment\n"
      "lambda_adv = 10e3\n"
      "lambda_style = 0.5   # trailing\n"
      "\n"
      "epochs = 3\n"
      "image_size = 64x48\n"
      "generator = resnet\n"
      "style_reference = per_epoch_random\n"
      "style_layer_weights = 1, 0.5, 0.25, 0, 2\n"
      "content_mode = feature_map\n"
      "seed = 42\n");
  EXPECT_EQ(cfg.lambda_adv, 1e4);
  EXPECT_EQ(cfg.lambda_style, 0.5);
  EXPECT_EQ(cfg.epochs, 3);
  EXPECT_EQ(cfg.image_size, (ImageSize{64, 48}));
  EXPECT_EQ(cfg.generator, GeneratorKind::kResNet);
  EXPECT_EQ(cfg.style_reference, StyleReferenceStrategy::per_epoch_random());
  EXPECT_EQ(cfg.style_layer_weights, (std::array<double, 5>{1, 0.5, 0.25, 0, 2}));
  EXPECT_EQ(cfg.content_mode, ContentMode::kFeatureMap);
  EXPECT_EQ(cfg.seed, 42u);
}

TEST(Config, FormatRoundTrips) {
  TrainingConfig cfg;
  cfg.lambda_content = 0.123456789012345;
  cfg.style_reference = StyleReferenceStrategy::fixed(3);
  cfg.width_multiplier = 0.125;
  cfg.generator = GeneratorKind::kUNetStride2;
  cfg.source_dir = "/data/lab";
  const auto back = parse_config(format_config(cfg));
  EXPECT_EQ(config_entries(back), config_entries(cfg));
}

TEST(Config, OverridesAndErrors) {
  TrainingConfig cfg;
  apply_override(cfg, "epochs=1");
  EXPECT_EQ(cfg.epochs, 1);
  try {
    apply_override(cfg, "lambda_bogus=1");
    FAIL() << "expected UsageError";
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("lambda_bogus"), std::string::npos);
  }
  EXPECT_THROW(apply_override(cfg, "epochs"), UsageError);
  EXPECT_THROW(apply_override(cfg, "epochs=two"), UsageError);
  EXPECT_THROW(apply_override(cfg, "image_size=64"), UsageError);
  EXPECT_THROW(apply_override(cfg, "generator=vgg"), UsageError);
  EXPECT_THROW(parse_config("no equals sign\n"), UsageError);
}

TEST(Config, ValidateRejectsBadValues) {
  TrainingConfig cfg;
  cfg.lambda_style = -1.0;
  EXPECT_THROW(cfg.validate(), ArgumentError);
  cfg = {};
  cfg.lambda_adv = INFINITY;
  EXPECT_THROW(cfg.validate(), ArgumentError);
  cfg = {};
  cfg.epochs = -1;
  EXPECT_THROW(cfg.validate(), ArgumentError);
  cfg = {};
  cfg.epochs = 0;
  EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, EnvironmentOverridesDescriptorPath) {
  TrainingConfig cfg;
  cfg.descriptor_weights = "/from/file";
  ::setenv(kDescriptorEnvVar, "/from/env", 1);
  apply_environment(cfg);
  ::unsetenv(kDescriptorEnvVar);
  EXPECT_EQ(cfg.descriptor_weights, "/from/env");
  apply_environment(cfg);
  EXPECT_EQ(cfg.descriptor_weights, "/from/env");
}

}  // namespace
}  // namespace biogan
