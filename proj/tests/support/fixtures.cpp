#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>

#include "biogan/image.hpp"

namespace biogan::testing {

TempDir::TempDir(const std::string& tag) {
  std::string pattern = (std::filesystem::temp_directory_path() / (tag + "-XXXXXX")).string();
  if (!mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
  path_ = pattern;
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

Tensor random_tensor(Rng& rng, int channels, int height, int width, double lo, double hi) {
  Tensor t(channels, height, width);
  for (double& v : t.values()) v = lo + (hi - lo) * rng.uniform();
  return t;
}

UnpairedDataset write_smoke_fixture(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "source");
  std::filesystem::create_directories(dir / "target");
  Rng rng(7);
  UnpairedDataset ds;
  for (int k = 0; k < 2; ++k) {
    Tensor lab(3, 64, 64);
    Tensor field(3, 64, 64);
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
          const double r = std::hypot(y - 32.0 - 6 * k, x - 30.0);
          lab.at(c, y, x) = std::tanh((12 - r) / 3) * 0.6 + 0.1 * c - 0.2;
          const double tex = 0.5 * std::sin(0.5 * x + k) * std::cos(0.4 * y);
          field.at(c, y, x) = std::clamp(tex + 0.3 * (rng.uniform() - 0.5) - 0.2 * c, -1.0, 1.0);
        }
      }
    }
    const auto s = dir / "source" / ("lab" + std::to_string(k) + ".png");
    const auto t = dir / "target" / ("field" + std::to_string(k) + ".png");
    save_image(ImageTensor(lab, RangeTag::kGen), s);
    save_image(ImageTensor(field, RangeTag::kGen), t);
    ds.source_images.push_back(s);
    ds.target_images.push_back(t);
  }
  return ds;
}

TrainingConfig smoke_config() {
  TrainingConfig cfg;
  cfg.image_size = {64, 64};
  cfg.epochs = 100;
  cfg.width_multiplier = 0.125;
  cfg.checkpoint_every = 50;
  cfg.seed = 0;
  return cfg;
}

GradientCheck check_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                             const Tensor& analytic, int samples, std::uint64_t seed, double step) {
  Rng rng(seed);
  GradientCheck out;
  Tensor probe = x;
  for (int s = 0; s < samples; ++s) {
    const auto i = static_cast<std::size_t>(rng.below(x.size()));
    const double orig = probe.values()[i];
    probe.values()[i] = orig + step;
    const double up = f(probe);
    probe.values()[i] = orig - step;
    const double down = f(probe);
    probe.values()[i] = orig;
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic.values()[i];
    const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-12});
    out.max_relative_error = std::max(out.max_relative_error, std::fabs(a - numeric) / denom);
    ++out.coordinates;
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_raster(const std::filesystem::path& path, const Raster& raster) {
  cv::Mat bgr(raster.height, raster.width, CV_8UC3);
  for (int y = 0; y < raster.height; ++y) {
    for (int x = 0; x < raster.width; ++x) {
      const unsigned char* p = &raster.rgb[(static_cast<std::size_t>(y) * raster.width + x) * 3];
      bgr.at<cv::Vec3b>(y, x) = cv::Vec3b(p[2], p[1], p[0]);
    }
  }
  if (!cv::imwrite(path.string(), bgr)) throw std::runtime_error("cannot write " + path.string());
}

Raster read_raster(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw std::runtime_error("cannot read " + path.string());
  Raster r{bgr.cols, bgr.rows, {}};
  r.rgb.reserve(static_cast<std::size_t>(bgr.total()) * 3);
  for (int y = 0; y < bgr.rows; ++y) {
    for (int x = 0; x < bgr.cols; ++x) {
      const auto& v = bgr.at<cv::Vec3b>(y, x);
      r.rgb.insert(r.rgb.end(), {v[2], v[1], v[0]});
    }
  }
  return r;
}

}  // namespace biogan::testing
