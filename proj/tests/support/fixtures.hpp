#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "biogan/config.hpp"
#include "biogan/dataset.hpp"
#include "biogan/random.hpp"
#include "biogan/tensor.hpp"

namespace biogan::testing {

/// Directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "biogan");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Uniform values in [lo, hi).
Tensor random_tensor(Rng& rng, int channels, int height, int width, double lo = -1.0, double hi = 1.0);

/// Two smooth "laboratory" sources and two textured "field" targets, 64x64
/// PNGs under dir/source and dir/target.
UnpairedDataset write_smoke_fixture(const std::filesystem::path& dir);

/// The smoke configuration: 64x64 images, width 1/8, 100 epochs over two
/// sources (200 generator iterations), published loss weights.
TrainingConfig smoke_config();

/// Largest relative error between analytic gradient entries and central
/// differences of f at `samples` random coordinates of x.
struct GradientCheck {
  double max_relative_error = 0.0;
  int coordinates = 0;
};
GradientCheck check_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                             const Tensor& analytic, int samples, std::uint64_t seed,
                             double step = 1e-5);

std::string read_file(const std::filesystem::path& path);

/// Raw 8-bit RGB raster I/O, bypassing the library's value mapping.
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<unsigned char> rgb;  // row-major, 3 bytes per pixel
};
void write_raster(const std::filesystem::path& path, const Raster& raster);
Raster read_raster(const std::filesystem::path& path);

}  // namespace biogan::testing
