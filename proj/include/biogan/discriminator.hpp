#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "biogan/image.hpp"
#include "biogan/nn/layers.hpp"

namespace biogan {

struct DiscriminatorSpec {
  double width_multiplier = 1.0;

  friend bool operator==(const DiscriminatorSpec&, const DiscriminatorSpec&) = default;
};

/// Receptive field of a stack of convolutions, via r' = r + (k - 1) * jump.
int receptive_field(std::span<const nn::ConvGeometry> stack);

/// Pre-sigmoid logits, one per receptive-field patch.
struct PatchScoreMap {
  int height = 0;
  int width = 0;
  std::vector<double> logits;  // row-major

  double at(int y, int x) const { return logits[static_cast<std::size_t>(y) * width + x]; }
};

/// Fully convolutional patch discriminator D whose output cells each see a
/// 70x70 input window: five unpadded 4x4 convolutions with strides 2,2,2,1,1.
class Discriminator {
 public:
  static Discriminator build(std::uint64_t seed, DiscriminatorSpec spec = {});

  const DiscriminatorSpec& spec() const noexcept { return spec_; }
  std::uint64_t seed() const noexcept { return seed_; }

  const std::vector<nn::ConvGeometry>& conv_stack() const noexcept { return geometry_; }
  int receptive_field() const;
  /// Input pixels between the windows of adjacent output cells.
  int cell_stride() const;
  /// Output map size for an input extent.
  int output_size(int input) const;

  std::size_t parameter_count() const;

  /// Inference pass producing a 1-channel logit map.
  Tensor forward(const Tensor& x) const;
  Tensor forward_train(const Tensor& x, nn::Mode mode);
  Tensor backward(const Tensor& grad_out);

  nn::ParameterSet parameters();
  void collect(std::vector<const nn::Parameter*>& params,
               std::vector<const nn::Parameter*>& buffers) const;
  std::uint64_t hash() const;

 private:
  Discriminator(DiscriminatorSpec spec, std::uint64_t seed);
  void check_input(const Tensor& x) const;

  DiscriminatorSpec spec_;
  std::uint64_t seed_ = 0;
  nn::Sequential body_;
  std::vector<nn::ConvGeometry> geometry_;
};

/// Scores an image (H, W >= receptive field) in inference mode.
PatchScoreMap discriminate(const Discriminator& d, const ImageTensor& image);

}  // namespace biogan
