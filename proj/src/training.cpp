#include "biogan/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "biogan/checkpoint.hpp"
#include "biogan/error.hpp"
#include "biogan/image.hpp"
#include "biogan/nn/adam.hpp"
#include "biogan/random.hpp"

namespace biogan {
namespace {

// -log sigmoid(-z) = log(1 + e^z), without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double mean_softplus(std::span<const double> z, double sign) {
  double sum = 0.0;
  for (double v : z) sum += softplus(sign * v);
  return sum / static_cast<double>(z.size());
}

Padding discriminator_padding(const Tensor& x, int field) {
  const int dh = std::max(0, field - x.height());
  const int dw = std::max(0, field - x.width());
  return {dh / 2, dh - dh / 2, dw / 2, dw - dw / 2};
}

Tensor pad(const Tensor& x, const Padding& p) {
  if (p.top == 0 && p.bottom == 0 && p.left == 0 && p.right == 0) return x;
  return reflect_pad(x, p.top, p.bottom, p.left, p.right);
}

Tensor unpad_grad(const Tensor& g, const Tensor& x, const Padding& p) {
  if (p.top == 0 && p.bottom == 0 && p.left == 0 && p.right == 0) return g;
  return reflect_pad_backward(g, x.height(), x.width(), p.top, p.bottom, p.left, p.right);
}

Tensor logits_of(const Discriminator& d, const Tensor& x) {
  return d.forward(pad(x, discriminator_padding(x, d.receptive_field())));
}

// Runs D in training mode on x and back-propagates d loss / d logits.
template <typename LogitGrad>
Tensor d_pass(Discriminator& d, const Tensor& x, nn::Mode mode, LogitGrad grad_of) {
  const Padding p = discriminator_padding(x, d.receptive_field());
  const Tensor logits = d.forward_train(pad(x, p), mode);
  Tensor g(logits.channels(), logits.height(), logits.width());
  const auto z = logits.values();
  auto gv = g.values();
  const double n = static_cast<double>(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) gv[i] = grad_of(z[i]) / n;
  return unpad_grad(d.backward(g), x, p);
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string("non-finite ") + what + " loss");
}

Tensor crop_backward(const Tensor& g, const Padding& p, int height, int width) {
  Tensor full(g.channels(), height + p.top + p.bottom, width + p.left + p.right);
  for (int c = 0; c < g.channels(); ++c) {
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) full.at(c, y + p.top, x + p.left) = g.at(c, y, x);
    }
  }
  return full;
}

void copy_values(const nn::ParameterSet& from, nn::ParameterSet& to) {
  auto copy = [](const std::vector<nn::Parameter*>& a, std::vector<nn::Parameter*>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) b[i]->value = a[i]->value;
  };
  copy(from.params, to.params);
  copy(from.buffers, to.buffers);
}

std::string checkpoint_name(int epoch) {
  std::ostringstream name;
  name << "epoch_" << std::setw(4) << std::setfill('0') << epoch << ".ckpt";
  return name.str();
}

}  // namespace

double adversarial_loss_from_logits(std::span<const double> logits) {
  if (logits.empty()) throw ArgumentError("empty logit map");
  return mean_softplus(logits, -1.0);
}

double discriminator_loss_from_logits(std::span<const double> real_logits,
                                      std::span<const double> fake_logits) {
  if (real_logits.empty() || fake_logits.empty()) throw ArgumentError("empty logit map");
  return mean_softplus(real_logits, -1.0) + mean_softplus(fake_logits, 1.0);
}

double adversarial_generator_loss(const Discriminator& d, const ImageTensor& fake) {
  return adversarial_loss_from_logits(logits_of(d, fake.tensor()).values());
}

double discriminator_loss(const Discriminator& d, const ImageTensor& real, const ImageTensor& fake) {
  return discriminator_loss_from_logits(logits_of(d, real.tensor()).values(),
                                        logits_of(d, fake.tensor()).values());
}

AdversarialGrad adversarial_generator_loss_grad(Discriminator& d, const Tensor& fake, nn::Mode mode) {
  AdversarialGrad out;
  const Padding p = discriminator_padding(fake, d.receptive_field());
  const Tensor logits = d.forward_train(pad(fake, p), mode);
  out.loss = adversarial_loss_from_logits(logits.values());
  Tensor g(logits.channels(), logits.height(), logits.width());
  const auto z = logits.values();
  auto gv = g.values();
  const double n = static_cast<double>(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) gv[i] = (sigmoid(z[i]) - 1.0) / n;
  out.input_grad = unpad_grad(d.backward(g), fake, p);
  return out;
}

DiscriminatorGrad discriminator_loss_grad(Discriminator& d, const Tensor& real, const Tensor& fake,
                                          nn::Mode mode) {
  DiscriminatorGrad out;
  std::vector<double> real_logits;
  std::vector<double> fake_logits;
  out.real_grad = d_pass(d, real, mode, [&](double z) {
    real_logits.push_back(z);
    return sigmoid(z) - 1.0;
  });
  out.fake_grad = d_pass(d, fake, mode, [&](double z) {
    fake_logits.push_back(z);
    return sigmoid(z);
  });
  out.loss = discriminator_loss_from_logits(real_logits, fake_logits);
  return out;
}

double generator_loss(double adv, double style, double content, const TrainingConfig& cfg) {
  check_finite(adv, "adversarial");
  check_finite(style, "style");
  check_finite(content, "content");
  return cfg.lambda_adv * adv + cfg.lambda_style * style + cfg.lambda_content * content;
}

std::filesystem::path select_style_reference(const UnpairedDataset& dataset,
                                             const StyleReferenceStrategy& strategy,
                                             std::uint64_t seed, int epoch) {
  const auto& targets = dataset.target_images;
  if (targets.empty()) throw ArgumentError("no target images to choose a style reference from");
  if (strategy.kind == StyleReferenceStrategy::Kind::kFixedIndex) {
    if (strategy.index >= targets.size()) {
      throw ArgumentError("style reference index " + std::to_string(strategy.index) +
                          " is out of range for " + std::to_string(targets.size()) +
                          " target images");
    }
    return targets[strategy.index];
  }
  Rng rng(derive_seed(seed, 1000 + static_cast<std::uint64_t>(epoch)));
  return targets[rng.below(targets.size())];
}

std::string format_loss_record(const IterationRecord& r) {
  const nlohmann::json j = {{"epoch", r.epoch},
                            {"index", r.index},
                            {"iteration", r.iteration},
                            {"adversarial", r.losses.adversarial},
                            {"style", r.losses.style},
                            {"content", r.losses.content},
                            {"total", r.losses.total},
                            {"discriminator", r.losses.discriminator},
                            {"wall_ms", r.wall_ms}};
  return j.dump();
}

TrainingRun train(const TrainingConfig& cfg, const UnpairedDataset& dataset,
                  const FeatureDescriptor& descriptor, const TrainOptions& options) {
  cfg.validate();
  if (dataset.source_images.empty() || dataset.target_images.empty()) {
    throw DatasetError("training needs at least one source and one target image");
  }
  using Clock = std::chrono::steady_clock;
  const auto started = Clock::now();

  TrainingRun run;
  run.config = cfg;

  Generator g = Generator::build({cfg.generator, cfg.width_multiplier, cfg.unet_dropout}, cfg.seed);
  Discriminator d = Discriminator::build(cfg.seed, {cfg.width_multiplier});
  auto g_params = g.parameters();
  auto d_params = d.parameters();
  if (!options.initial_checkpoint.empty()) {
    Checkpoint start = load_checkpoint(options.initial_checkpoint, g.spec());
    if (!(start.discriminator.spec() == d.spec())) {
      throw CheckpointError("discriminator spec mismatch in " + options.initial_checkpoint.string());
    }
    copy_values(start.generator.parameters(), g_params);
    copy_values(start.discriminator.parameters(), d_params);
  }
  const nn::AdamSettings adam{cfg.learning_rate, cfg.beta1, cfg.beta2};
  nn::Adam g_opt(g_params.params, adam);
  nn::Adam d_opt(d_params.params, adam);

  std::vector<Tap> taps = parse_taps(cfg.style_taps);
  if (taps.size() != cfg.style_layer_weights.size()) {
    throw ArgumentError("style_taps must name exactly five layers");
  }
  PerceptualObjective objective(descriptor, taps, cfg.style_layer_weights, cfg.content_mode,
                                cfg.content_layer_weight);

  std::vector<ImageTensor> sources;
  std::vector<ImageTensor> targets;
  for (const auto& p : dataset.source_images) sources.push_back(load_image(p, cfg.image_size));
  for (const auto& p : dataset.target_images) targets.push_back(load_image(p, cfg.image_size));

  std::ofstream log;
  std::filesystem::path ckpt_dir;
  if (!options.out_dir.empty()) {
    ckpt_dir = options.out_dir / "checkpoints";
    std::filesystem::create_directories(ckpt_dir);
    log.open(options.out_dir / "losses.jsonl", std::ios::trunc);
    if (!log) throw IoError("cannot write loss log in " + options.out_dir.string());
  }
  auto checkpoint = [&](int epoch) {
    if (ckpt_dir.empty()) return;
    const auto path = ckpt_dir / checkpoint_name(epoch);
    save_checkpoint(path, epoch, g, d, cfg);
    run.checkpoints.emplace_back(epoch, path);
  };
  checkpoint(0);

  auto isolation = [&](std::uint64_t before, std::uint64_t after) {
    ++run.isolation_checks;
    if (before != after) ++run.isolation_failures;
  };

  const int h = cfg.image_size.height;
  const int w = cfg.image_size.width;
  const Padding gpad = padding_to_multiple(h, w, g.size_multiple());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto style_path = select_style_reference(dataset, cfg.style_reference, cfg.seed, epoch);
    run.style_references.push_back(style_path);
    const auto style_index = static_cast<std::size_t>(
        std::find(dataset.target_images.begin(), dataset.target_images.end(), style_path) -
        dataset.target_images.begin());
    objective.set_style_reference(targets[style_index]);

    for (std::size_t m = 0; m < sources.size(); ++m) {
      const auto image_start = Clock::now();
      const ImageTensor& x = sources[m];
      const ImageTensor& y = targets[m % targets.size()];
      objective.set_content_source(x);
      const Tensor x_padded = pad(x.tensor(), gpad);

      std::vector<IterationRecord> records;
      Tensor fake;
      for (int it = 0; it < cfg.inner_iterations; ++it) {
        const std::uint64_t d_before = d.hash();
        g_params.zero_grad();
        fake = crop(g.forward_train(x_padded, nn::Mode::kTraining), gpad.top, gpad.left, h, w);

        AdversarialGrad adv = adversarial_generator_loss_grad(d, fake, nn::Mode::kTrainingFrozenStats);
        PerceptualTerms perc = objective.evaluate_with_grad(fake);
        LossBreakdown losses;
        losses.adversarial = adv.loss;
        losses.style = perc.style;
        losses.content = perc.content;
        losses.total = generator_loss(adv.loss, perc.style, perc.content, cfg);
        check_finite(losses.total, "generator");

        Tensor grad = adv.input_grad;
        grad *= cfg.lambda_adv;
        perc.style_grad *= cfg.lambda_style;
        perc.content_grad *= cfg.lambda_content;
        grad += perc.style_grad;
        grad += perc.content_grad;
        g.backward(crop_backward(grad, gpad, h, w));
        g_opt.step();
        isolation(d_before, d.hash());

        IterationRecord rec;
        rec.epoch = epoch;
        rec.index = static_cast<int>(m);
        rec.iteration = it;
        rec.losses = losses;
        records.push_back(rec);
      }

      // Discriminator update on the looped target image and the last fake,
      // which carries no link back into G.
      const std::uint64_t g_before = g.hash();
      d_params.zero_grad();
      const DiscriminatorGrad dl = discriminator_loss_grad(d, y.tensor(), fake, nn::Mode::kTraining);
      check_finite(dl.loss, "discriminator");
      d_opt.step();
      isolation(g_before, g.hash());

      const double ms =
          std::chrono::duration<double, std::milli>(Clock::now() - image_start).count();
      for (auto& rec : records) {
        rec.losses.discriminator = dl.loss;
        rec.wall_ms = ms / static_cast<double>(records.size());
        if (log.is_open()) log << format_loss_record(rec) << '\n';
        if (options.on_iteration) options.on_iteration(rec);
        run.epoch_losses.push_back(rec);
      }
      if (log.is_open()) log.flush();
    }

    const int done = epoch + 1;
    if (done % cfg.checkpoint_every == 0 || done == cfg.epochs) checkpoint(done);
  }

  run.generator_hash = g.hash();
  run.discriminator_hash = d.hash();
  run.wall_time = std::chrono::duration<double>(Clock::now() - started).count();
  return run;
}

TrainingRun train(const TrainingConfig& cfg, const UnpairedDataset& dataset,
                  const TrainOptions& options) {
  const FeatureDescriptor descriptor =
      FeatureDescriptor::load(cfg.descriptor_weights, cfg.descriptor_sha256);
  return train(cfg, dataset, descriptor, options);
}

std::vector<std::filesystem::path> translate(const std::filesystem::path& checkpoint,
                                             const std::vector<std::filesystem::path>& inputs,
                                             const std::filesystem::path& out_dir) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> outputs;
  for (const auto& input : inputs) {
    const ImageTensor x = load_image(input);
    const ImageTensor y = translate_image(ck.generator, x);
    const auto out = out_dir / input.filename();
    save_image(y, out);
    outputs.push_back(out);
  }
  return outputs;
}

}  // namespace biogan
