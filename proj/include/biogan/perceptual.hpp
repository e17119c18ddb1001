#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "biogan/config.hpp"
#include "biogan/image.hpp"
#include "biogan/tensor.hpp"

namespace biogan {

/// Activation taps of the descriptor that the losses can read.
enum class Tap { kRelu1_1, kRelu2_1, kRelu3_1, kRelu4_1, kRelu4_2, kRelu5_1 };

inline constexpr Tap kContentTap = Tap::kRelu4_2;
inline constexpr std::array<Tap, 5> kDefaultStyleTaps = {Tap::kRelu1_1, Tap::kRelu2_1,
                                                         Tap::kRelu3_1, Tap::kRelu4_1,
                                                         Tap::kRelu5_1};

const char* to_string(Tap tap);
/// Accepts "relu4_2", "Relu4_2" or "Relu4-2". Throws ArgumentError otherwise.
Tap parse_tap(const std::string& name);
std::vector<Tap> parse_taps(const std::vector<std::string>& names);

/// F^l of one layer: n_maps rows of map_size = height * width activations.
struct FeatureActivations {
  Tap layer;
  Tensor values;

  int n_maps() const noexcept { return values.channels(); }
  std::size_t map_size() const noexcept { return values.plane(); }
};

/// Channel correlation matrix G^l = F F^T of one layer.
struct GramMatrix {
  Tap layer = Tap::kRelu1_1;
  int n = 0;
  std::size_t map_size = 0;  // M_l of the activations it came from
  std::vector<double> values;  // n x n, row-major

  double at(int i, int j) const { return values[static_cast<std::size_t>(i) * n + j]; }
};

/// Frozen VGG16-style feature extractor (five convolutional blocks, 13 3x3
/// convolutions, 2x2 max pooling). Immutable after construction.
class FeatureDescriptor {
 public:
  static constexpr int kConvCount = 13;

  /// Reads a weights file. A non-empty expected_sha256 must match the file's
  /// SHA-256. Missing files raise DescriptorError with an export hint.
  static FeatureDescriptor load(const std::filesystem::path& path,
                                const std::string& expected_sha256 = {});

  /// Seeded He-normal weights at a scaled width. For tests and desk-scale
  /// runs where the pretrained file is unavailable.
  static FeatureDescriptor synthetic(std::uint64_t seed, double width_multiplier = 1.0);

  /// Writes the weights file format read by load().
  void save(const std::filesystem::path& path) const;

  /// Output channels of each of the 13 convolutions.
  const std::vector<int>& conv_widths() const noexcept { return widths_; }
  int tap_channels(Tap tap) const;

  /// Activations for each requested tap, in request order.
  std::vector<FeatureActivations> extract(const ImageTensor& image,
                                          std::span<const Tap> taps) const;

  /// Cached intermediate values of a forward pass, for backward().
  struct Trace {
    std::vector<Tensor> step_inputs;
    std::vector<std::vector<int>> argmax;
    std::map<Tap, Tensor> taps;
    std::size_t steps = 0;
    int input_height = 0;
    int input_width = 0;
  };

  /// Runs up to the deepest of `taps` on a descriptor-range tensor.
  Trace forward(const Tensor& x, std::span<const Tap> taps) const;

  /// Back-propagates gradients given at tap outputs to the input tensor.
  Tensor backward(const Trace& trace, const std::map<Tap, Tensor>& tap_grads) const;

 private:
  struct Step {
    enum class Kind { kConv, kRelu, kPool } kind;
    int conv = -1;
    bool has_tap = false;
    Tap tap = Tap::kRelu1_1;
  };

  FeatureDescriptor();
  static std::vector<Step> program();
  std::size_t steps_for(std::span<const Tap> taps) const;

  std::vector<int> widths_;
  std::vector<int> in_channels_;
  std::vector<std::vector<double>> weights_;
  std::vector<std::vector<double>> biases_;
  std::vector<Step> program_;
};

/// SHA-256 of a file as lowercase hex.
std::string sha256_file(const std::filesystem::path& path);

GramMatrix gram(const FeatureActivations& f);

/// E_l = sum (G - A)^2 / (4 N^2 M^2), with M taken from g_out.
double style_layer_loss(const GramMatrix& g_out, const GramMatrix& g_target);

/// sum_l weights[l] * E_l over matching tap lists.
double style_loss(std::span<const GramMatrix> out_grams, std::span<const GramMatrix> target_grams,
                  std::span<const double> weights);

/// weight / 2 * sum (G - P)^2 on content-tap Grams.
double content_loss(const GramMatrix& g_out, const GramMatrix& g_input, double weight);

/// weight / 2 * sum (F - P)^2 on raw content-tap activations.
double content_feature_loss(const FeatureActivations& f_out, const FeatureActivations& f_input,
                            double weight);

/// dE_l/dF for the activations that produced g_out.
Tensor style_layer_loss_grad(const FeatureActivations& f_out, const GramMatrix& g_out,
                             const GramMatrix& g_target);
Tensor content_loss_grad(const FeatureActivations& f_out, const GramMatrix& g_out,
                         const GramMatrix& g_input, double weight);
Tensor content_feature_loss_grad(const FeatureActivations& f_out,
                                 const FeatureActivations& f_input, double weight);

/// Style and content terms for one generated image plus their gradients with
/// respect to the generated (GEN-range) tensor.
struct PerceptualTerms {
  double style = 0.0;
  double content = 0.0;
  Tensor style_grad;
  Tensor content_grad;
};

/// Style/content objective bound to one descriptor, a style reference and a
/// content source.
class PerceptualObjective {
 public:
  PerceptualObjective(const FeatureDescriptor& descriptor, std::vector<Tap> style_taps,
                      std::array<double, 5> style_weights, ContentMode content_mode,
                      double content_weight);

  void set_style_reference(const ImageTensor& style);
  void set_content_source(const ImageTensor& input);

  /// Loss values only.
  PerceptualTerms evaluate(const Tensor& generated) const;
  /// Loss values and gradients.
  PerceptualTerms evaluate_with_grad(const Tensor& generated) const;

 private:
  PerceptualTerms run(const Tensor& generated, bool with_grad) const;

  const FeatureDescriptor* descriptor_;
  std::vector<Tap> style_taps_;
  std::array<double, 5> style_weights_;
  ContentMode content_mode_;
  double content_weight_;
  std::vector<GramMatrix> style_targets_;
  FeatureActivations content_features_{Tap::kRelu4_2, {}};
  GramMatrix content_gram_;
  bool has_style_ = false;
  bool has_content_ = false;
};

}  // namespace biogan
