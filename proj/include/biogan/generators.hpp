#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "biogan/config.hpp"
#include "biogan/image.hpp"
#include "biogan/nn/layers.hpp"

namespace biogan {

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::kUNetStride1;
  /// Scales every channel width (minimum one channel per layer).
  double width_multiplier = 1.0;
  /// Dropout (rate 0.5) after the first three U-Net decoder layers, training only.
  bool dropout = false;

  friend bool operator==(const GeneratorSpec&, const GeneratorSpec&) = default;
};

/// One entry of a generator's architecture listing.
struct LayerSummary {
  std::string name;
  std::string role;  // front, residual, back, final, down, up
  int kernel = 0;
  int stride = 0;
  int in_channels = 0;
  int out_channels = 0;
};

/// Scaled channel width: max(1, round(base * multiplier)).
int scaled_width(int base, double multiplier);

/// Image-to-image generator G. Inference (forward) is const and thread-safe;
/// training passes (forward_train / backward) need exclusive access.
class Generator {
 public:
  static Generator build(const GeneratorSpec& spec, std::uint64_t seed);

  Generator(Generator&&) noexcept;
  Generator& operator=(Generator&&) noexcept;
  ~Generator();

  const GeneratorSpec& spec() const noexcept { return spec_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::vector<LayerSummary>& layers() const noexcept { return layers_; }

  /// U-Net skip links as (down layer, up layer), both 1-based: the output of
  /// down layer i is concatenated into the input of up layer 9 - i. Empty for
  /// the residual generator.
  std::vector<std::pair<int, int>> skip_connections() const;

  /// Input height and width must be multiples of this (4 or 256).
  int size_multiple() const noexcept;

  std::size_t parameter_count() const;

  /// Inference pass. Throws ShapeError for incompatible input sizes.
  Tensor forward(const Tensor& x) const;
  Tensor forward_train(const Tensor& x, nn::Mode mode);
  /// Accumulates parameter gradients and returns the input gradient.
  Tensor backward(const Tensor& grad_out);

  nn::ParameterSet parameters();
  void collect(std::vector<const nn::Parameter*>& params,
               std::vector<const nn::Parameter*>& buffers) const;
  std::uint64_t hash() const;

 public:
  struct Network;  // implementation detail

 private:
  Generator(GeneratorSpec spec, std::uint64_t seed, std::unique_ptr<Network> net,
            std::vector<LayerSummary> layers);
  void check_input(const Tensor& x) const;

  GeneratorSpec spec_;
  std::uint64_t seed_ = 0;
  std::unique_ptr<Network> net_;
  std::vector<LayerSummary> layers_;
};

/// Inference-mode G(x); the input size must satisfy size_multiple().
ImageTensor generate(const Generator& g, const ImageTensor& x);

/// Reflect-pads to the next valid size, generates, and crops back.
ImageTensor translate_image(const Generator& g, const ImageTensor& x);

/// Padding that brings (height, width) to multiples of `multiple`, split as
/// evenly as possible with the extra pixel at the bottom/right.
struct Padding {
  int top = 0;
  int bottom = 0;
  int left = 0;
  int right = 0;
};
Padding padding_to_multiple(int height, int width, int multiple);

}  // namespace biogan
