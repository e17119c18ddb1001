#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "biogan/image.hpp"

namespace biogan {

enum class GeneratorKind { kResNet, kUNetStride2, kUNetStride1 };

const char* to_string(GeneratorKind kind);
GeneratorKind parse_generator_kind(const std::string& text);

enum class ContentMode { kGram, kFeatureMap };

struct StyleReferenceStrategy {
  enum class Kind { kFixedIndex, kPerEpochRandom };
  Kind kind = Kind::kFixedIndex;
  std::size_t index = 0;

  static StyleReferenceStrategy fixed(std::size_t i) { return {Kind::kFixedIndex, i}; }
  static StyleReferenceStrategy per_epoch_random() { return {Kind::kPerEpochRandom, 0}; }

  friend bool operator==(const StyleReferenceStrategy&, const StyleReferenceStrategy&) = default;
};

/// Every knob of a training run. Defaults reproduce the published setup;
/// fields the original work leaves open carry the values documented in the
/// README.
struct TrainingConfig {
  double lambda_adv = 1e4;
  double lambda_style = 1.0;
  double lambda_content = 0.4;
  std::array<double, 5> style_layer_weights = {1.0, 1.0, 1.0, 1.0, 1.0};
  double content_layer_weight = 1.0;
  int epochs = 100;
  ImageSize image_size = {1024, 768};
  GeneratorKind generator = GeneratorKind::kUNetStride1;
  StyleReferenceStrategy style_reference = StyleReferenceStrategy::fixed(0);
  std::vector<std::string> style_taps = {"relu1_1", "relu2_1", "relu3_1", "relu4_1", "relu5_1"};
  ContentMode content_mode = ContentMode::kGram;

  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int inner_iterations = 1;
  int checkpoint_every = 10;

  double width_multiplier = 1.0;
  bool unet_dropout = false;
  std::uint64_t seed = 0;

  std::filesystem::path descriptor_weights;
  std::string descriptor_sha256;
  std::filesystem::path source_dir;
  std::filesystem::path target_dir;

  /// Throws ArgumentError naming the first invalid field.
  void validate() const;
};

/// Sets one field from its textual `key = value` form. Throws UsageError for
/// unknown keys or malformed values.
void apply_setting(TrainingConfig& config, const std::string& key, const std::string& value);

/// Parses `key = value` lines (`#` starts a comment) on top of `base`.
TrainingConfig parse_config(const std::string& text, TrainingConfig base = {});
TrainingConfig load_config(const std::filesystem::path& path, TrainingConfig base = {});

/// Applies a `key=value` override string.
void apply_override(TrainingConfig& config, const std::string& assignment);

/// Canonical key -> value rendering of every field, in declaration order.
std::vector<std::pair<std::string, std::string>> config_entries(const TrainingConfig& config);

/// Renders the config back into the file format; parse_config of the result
/// reproduces the config.
std::string format_config(const TrainingConfig& config);

/// Environment variable that overrides the descriptor weights path.
inline constexpr const char* kDescriptorEnvVar = "BIOGAN_DESCRIPTOR_WEIGHTS";

/// Applies the environment override, if set.
void apply_environment(TrainingConfig& config);

}  // namespace biogan
