#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "biogan/config.hpp"
#include "biogan/dataset.hpp"
#include "biogan/discriminator.hpp"
#include "biogan/generators.hpp"
#include "biogan/perceptual.hpp"

namespace biogan {

struct LossBreakdown {
  double adversarial = 0.0;
  double style = 0.0;
  double content = 0.0;
  double total = 0.0;
  double discriminator = 0.0;
};

/// One generator iteration of the loop. The discriminator value is that of the
/// update which follows the iteration's source image.
struct IterationRecord {
  int epoch = 0;
  int index = 0;      // position of the source image within the epoch
  int iteration = 0;  // inner generator iteration
  LossBreakdown losses;
  double wall_ms = 0.0;
};

struct TrainingRun {
  TrainingConfig config;
  std::vector<IterationRecord> epoch_losses;
  std::vector<std::pair<int, std::filesystem::path>> checkpoints;
  /// Style reference used in each epoch.
  std::vector<std::filesystem::path> style_references;
  double wall_time = 0.0;  // seconds

  std::uint64_t generator_hash = 0;
  std::uint64_t discriminator_hash = 0;
  /// Parameter-hash comparisons made around each update step.
  long isolation_checks = 0;
  long isolation_failures = 0;
};

/// Mean over patch cells of -log sigmoid(logit).
double adversarial_loss_from_logits(std::span<const double> logits);
/// -[mean log sigmoid(real) + mean log(1 - sigmoid(fake))].
double discriminator_loss_from_logits(std::span<const double> real_logits,
                                      std::span<const double> fake_logits);

/// Inference-mode losses. Images narrower or shorter than the receptive field
/// are reflect-padded up to it.
double adversarial_generator_loss(const Discriminator& d, const ImageTensor& fake);
double discriminator_loss(const Discriminator& d, const ImageTensor& real, const ImageTensor& fake);

struct AdversarialGrad {
  double loss = 0.0;
  Tensor input_grad;  // d loss / d fake
};

struct DiscriminatorGrad {
  double loss = 0.0;
  Tensor real_grad;
  Tensor fake_grad;
};

/// Training-pass versions. Both run D with `mode` and accumulate D's parameter
/// gradients as a side effect.
AdversarialGrad adversarial_generator_loss_grad(Discriminator& d, const Tensor& fake, nn::Mode mode);
DiscriminatorGrad discriminator_loss_grad(Discriminator& d, const Tensor& real, const Tensor& fake,
                                          nn::Mode mode);

/// lambda_adv * adv + lambda_style * style + lambda_content * content.
/// Throws NumericError if any component is not finite.
double generator_loss(double adv, double style, double content, const TrainingConfig& cfg);

/// Style reference for an epoch. Throws ArgumentError for an index outside
/// the target set.
std::filesystem::path select_style_reference(const UnpairedDataset& dataset,
                                             const StyleReferenceStrategy& strategy,
                                             std::uint64_t seed, int epoch);

struct TrainOptions {
  /// Receives checkpoints/ and losses.jsonl when set.
  std::filesystem::path out_dir;
  /// Called after each discriminator update with that image's records.
  std::function<void(const IterationRecord&)> on_iteration;
  /// Starts from these network values instead of a fresh initialization.
  std::filesystem::path initial_checkpoint;
};

/// The alternating generator/discriminator loop. Deterministic given the
/// config and descriptor.
TrainingRun train(const TrainingConfig& cfg, const UnpairedDataset& dataset,
                  const FeatureDescriptor& descriptor, const TrainOptions& options = {});

/// Loads the descriptor named by the config and trains.
TrainingRun train(const TrainingConfig& cfg, const UnpairedDataset& dataset,
                  const TrainOptions& options = {});

/// One JSON object per line with epoch, index, adversarial, style, content,
/// total, discriminator and wall_ms.
std::string format_loss_record(const IterationRecord& record);

/// Translates each input with the checkpoint's generator in inference mode.
/// Outputs keep the input's file name.
std::vector<std::filesystem::path> translate(const std::filesystem::path& checkpoint,
                                             const std::vector<std::filesystem::path>& inputs,
                                             const std::filesystem::path& out_dir);

}  // namespace biogan
