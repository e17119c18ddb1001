// Prints one PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"
#include "biogan/cli.hpp"
#include "biogan/discriminator.hpp"
#include "biogan/eval/coco.hpp"
#include "biogan/eval/metrics.hpp"
#include "biogan/eval/stats.hpp"
#include "biogan/generators.hpp"
#include "biogan/image.hpp"
#include "biogan/perceptual.hpp"
#include "biogan/report.hpp"
#include "biogan/training.hpp"

namespace {

using namespace biogan;
namespace fs = std::filesystem;
namespace oracle = biogan::testing::oracle;
using biogan::testing::random_tensor;
using biogan::testing::read_file;

// Collects failed expectations for one criterion.
class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    ++checks_;
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    failed_ += !ok;
  }
  void near(double got, double want, double tol, const std::string& what) {
    std::ostringstream s;
    s.precision(17);
    s << what << ": got " << got << ", want " << want << " +- " << tol;
    expect(std::fabs(got - want) <= tol, s.str());
  }
  void note(const std::string& text) { notes_ += (notes_.empty() ? "" : "; ") + text; }

  bool passed() const { return failed_ == 0 && checks_ > 0; }
  std::string summary() const {
    std::string s = std::to_string(checks_) + " checks";
    if (!notes_.empty()) s += ", " + notes_;
    for (const auto& f : failures_) s += " | " + f;
    if (failed_ > static_cast<long>(failures_.size())) s += " | ...";
    return s;
  }

 private:
  long checks_ = 0;
  long failed_ = 0;
  std::vector<std::string> failures_;
  std::string notes_;
};

const FeatureDescriptor& descriptor() {
  static const FeatureDescriptor d = FeatureDescriptor::synthetic(17, 0.125);
  return d;
}

ImageTensor random_image(Rng& rng, int h, int w) { return ImageTensor(random_tensor(rng, 3, h, w), RangeTag::kGen); }

void f1_arithmetic(Checker& c) {
  c.near(eval::f1(0.699, 0.176), 0.281, 0.001, "f1(0.699, 0.176)");
  c.near(eval::f1(0.782, 0.103), 0.182, 0.001, "f1(0.782, 0.103)");
  c.near(eval::f1(0.726, 0.194), 0.306, 0.001, "f1(0.726, 0.194)");
}

void relative_improvement(Checker& c) {
  c.near(eval::relative_improvement(30.6, 18.2), 68.1, 0.1, "relative_improvement(30.6, 18.2)");
  c.near(eval::relative_improvement(14.2, 8.1), 75.3, 0.1, "relative_improvement(14.2, 8.1)");
}

void perceptual(Checker& c) {
  FeatureActivations f{Tap::kRelu1_1, Tensor(2, 1, 2)};
  const double v[] = {1, 2, 3, 4};
  std::copy(std::begin(v), std::end(v), f.values.data());
  const auto g = gram(f);
  c.expect(g.values == std::vector<double>{5, 11, 11, 25}, "gram([[1,2],[3,4]]) == [[5,11],[11,25]]");

  const GramMatrix out{Tap::kRelu1_1, 1, 1, {2.0}};
  const GramMatrix target{Tap::kRelu1_1, 1, 1, {0.0}};
  c.expect(style_layer_loss(out, target) == 1.0, "E_l(N=1, M=1, G=2, A=0) == 1");

  Rng rng(3);
  PerceptualObjective obj(descriptor(), {kDefaultStyleTaps.begin(), kDefaultStyleTaps.end()}, {1, 1, 1, 1, 1},
                          ContentMode::kGram, 1.0);
  for (int i = 0; i < 20; ++i) {
    const auto x = random_image(rng, 32, 32);
    obj.set_style_reference(x);
    obj.set_content_source(x);
    const auto terms = obj.evaluate(x.tensor());
    c.expect(terms.style == 0.0, "style_loss(x, x) == 0 for image " + std::to_string(i));
    c.expect(terms.content == 0.0, "content_loss(x, x) == 0 for image " + std::to_string(i));
  }
}

void gradients(Checker& c) {
  constexpr int kSamples = 50;
  Rng rng(10);
  double worst = 0.0;
  auto record = [&](const biogan::testing::GradientCheck& r, const std::string& what) {
    worst = std::max(worst, r.max_relative_error);
    c.expect(r.coordinates >= kSamples, what + ": too few coordinates");
    c.expect(r.max_relative_error <= 1e-3, what + ": relative error " + std::to_string(r.max_relative_error));
  };

  PerceptualObjective obj(descriptor(), {kDefaultStyleTaps.begin(), kDefaultStyleTaps.end()}, {1, 1, 1, 1, 1},
                          ContentMode::kGram, 1.0);
  obj.set_style_reference(random_image(rng, 16, 16));
  obj.set_content_source(random_image(rng, 16, 16));
  const Tensor x = random_tensor(rng, 3, 16, 16);
  const auto terms = obj.evaluate_with_grad(x);
  record(biogan::testing::check_gradient([&](const Tensor& t) { return obj.evaluate(t).style; }, x,
                                         terms.style_grad, kSamples, 11),
         "style_loss");
  record(biogan::testing::check_gradient([&](const Tensor& t) { return obj.evaluate(t).content; }, x,
                                         terms.content_grad, kSamples, 12),
         "content_loss");

  auto d = Discriminator::build(3, {0.125});
  const nn::Mode mode = nn::Mode::kTrainingFrozenStats;
  const Tensor fake = random_tensor(rng, 3, 16, 16);
  const Tensor real = random_tensor(rng, 3, 16, 16);
  const auto adv = adversarial_generator_loss_grad(d, fake, mode);
  record(biogan::testing::check_gradient(
             [&](const Tensor& t) { return adversarial_generator_loss_grad(d, t, mode).loss; }, fake,
             adv.input_grad, kSamples, 2),
         "adversarial_generator_loss");
  const auto dl = discriminator_loss_grad(d, real, fake, mode);
  record(biogan::testing::check_gradient([&](const Tensor& t) { return discriminator_loss_grad(d, real, t, mode).loss; },
                                         fake, dl.fake_grad, kSamples, 3),
         "discriminator_loss (fake input)");
  record(biogan::testing::check_gradient([&](const Tensor& t) { return discriminator_loss_grad(d, t, fake, mode).loss; },
                                         real, dl.real_grad, kSamples, 4),
         "discriminator_loss (real input)");
  char buf[64];
  std::snprintf(buf, sizeof buf, "worst relative error %.2e", worst);
  c.note(buf);
}

void architecture(Checker& c) {
  c.expect(Discriminator::build(0).receptive_field() == 70, "receptive_field(default discriminator) == 70");

  Rng rng(7);
  const auto g = Generator::build({GeneratorKind::kResNet, 1.0 / 16, false}, 0);
  for (int i = 0; i < 10; ++i) {
    const int h = 4 * static_cast<int>(1 + rng.below(10));
    const int w = 4 * static_cast<int>(1 + rng.below(10));
    const Tensor y = g.forward(random_tensor(rng, 3, h, w, -4.0, 4.0));
    c.expect(y.channels() == 3 && y.height() == h && y.width() == w,
             "generate preserves " + std::to_string(h) + "x" + std::to_string(w));
    bool bounded = true;
    for (double v : y.values()) bounded = bounded && std::fabs(v) <= 1.0;
    c.expect(bounded, "Tanh bound at " + std::to_string(h) + "x" + std::to_string(w));
  }

  const auto d = Discriminator::build(3, {0.125});
  const Tensor base = random_tensor(rng, 3, 110, 94);
  const Tensor y0 = d.forward(base);
  const int stride = d.cell_stride(), rf = d.receptive_field();
  long outside = 0;
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = base;
    const int py = static_cast<int>(rng.below(110));
    const int px = static_cast<int>(rng.below(94));
    x.at(static_cast<int>(rng.below(3)), py, px) += 0.75;
    const Tensor y = d.forward(x);
    for (int i = 0; i < y.height(); ++i) {
      for (int j = 0; j < y.width(); ++j) {
        const bool inside = py >= i * stride && py < i * stride + rf && px >= j * stride && px < j * stride + rf;
        if (inside) continue;
        ++outside;
        c.expect(y.at(0, i, j) == y0.at(0, i, j), "locality: cell outside the window changed");
      }
    }
  }
  c.note(std::to_string(outside) + " out-of-window cells unchanged");
}

void training_smoke(Checker& c) {
  biogan::testing::TempDir dir("biogan-acceptance");
  const auto ds = biogan::testing::write_smoke_fixture(dir / "data");
  const TrainingConfig cfg = biogan::testing::smoke_config();
  const auto smoke_descriptor = FeatureDescriptor::synthetic(0, cfg.width_multiplier);

  const auto t0 = std::chrono::steady_clock::now();
  const auto run = train(cfg, ds, smoke_descriptor, {dir / "run1"});
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  c.expect(run.epoch_losses.size() == 200, "200 iterations, got " + std::to_string(run.epoch_losses.size()));
  if (run.epoch_losses.size() < 10) return;

  auto identity = [&](const LossBreakdown& l) {
    return l.total == cfg.lambda_adv * l.adversarial + cfg.lambda_style * l.style + cfg.lambda_content * l.content;
  };
  for (const auto& r : run.epoch_losses) c.expect(identity(r.losses), "loss decomposition identity");
  const auto logged = parse_loss_log(read_file(dir / "run1" / "losses.jsonl"), "losses.jsonl");
  c.expect(logged.size() == run.epoch_losses.size(), "every iteration logged");
  for (const auto& r : logged) c.expect(identity(r.losses), "loss decomposition identity (logged)");

  c.expect(run.isolation_checks > 0, "isolation checks ran");
  c.expect(run.isolation_failures == 0, std::to_string(run.isolation_failures) + " isolation failures");

  double first10 = 0.0;
  for (int i = 0; i < 10; ++i) first10 += run.epoch_losses[i].losses.total;
  first10 /= 10.0;
  const double final_total = run.epoch_losses.back().losses.total;
  c.expect(final_total < 0.5 * first10, "final total loss below half the first-10 mean");

  const auto again = train(cfg, ds, smoke_descriptor, {dir / "run2"});
  bool identical = again.epoch_losses.size() == run.epoch_losses.size() && again.generator_hash == run.generator_hash &&
                   again.discriminator_hash == run.discriminator_hash;
  for (std::size_t i = 0; identical && i < run.epoch_losses.size(); ++i) {
    const auto &a = run.epoch_losses[i].losses, &b = again.epoch_losses[i].losses;
    identical = a.total == b.total && a.adversarial == b.adversarial && a.style == b.style &&
                a.content == b.content && a.discriminator == b.discriminator;
  }
  c.expect(identical, "repeat run is bit-identical");
  c.expect(read_file(run.checkpoints.back().second) == read_file(again.checkpoints.back().second),
           "final checkpoints byte-identical");

  char buf[160];
  std::snprintf(buf, sizeof buf, "final/first-10 mean %.3f, %ld isolation checks, %.0f s per run",
                final_total / first10, static_cast<long>(run.isolation_checks), seconds);
  c.note(buf);
}

void evaluation_oracle(Checker& c) {
  Rng rng(25);
  std::vector<oracle::Scene> scenes;
  for (int i = 0; i < 25; ++i) scenes.push_back(oracle::random_scene(rng, 6));
  const auto gt = eval::parse_annotations(oracle::coco_annotations(scenes));
  const auto det = eval::parse_detections(oracle::coco_detections(scenes), gt);
  for (double iou_thr : {0.5, 0.7}) {
    const auto want = oracle::evaluate(scenes, iou_thr, 0.7);
    const auto got = eval::evaluate(gt, det, {iou_thr, 0.7, eval::ApInterpolation::kAllPoints});
    const std::string at = " at IoU " + std::to_string(iou_thr);
    c.expect(got.counts.tp == want.counts.tp, "tp" + at);
    c.expect(got.counts.fp == want.counts.fp, "fp" + at);
    c.expect(got.counts.fn == want.counts.fn, "fn" + at);
    c.near(got.precision, want.precision, 1e-10, "precision" + at);
    c.near(got.recall, want.recall, 1e-10, "recall" + at);
    c.near(got.f1, want.f1, 1e-10, "f1" + at);
    c.near(got.ap, want.ap, 1e-10, "ap" + at);
  }
}

void statistics(Checker& c) {
  Rng rng(12);
  int fixtures = 0;
  while (fixtures < 100) {
    const int n = 6 + static_cast<int>(rng.below(7));
    std::vector<double> a, b;
    for (int i = 0; i < n; ++i) {
      a.push_back(static_cast<double>(rng.below(9)) * 0.5);
      b.push_back(static_cast<double>(rng.below(9)) * 0.5);
    }
    int nonzero = 0;
    for (int i = 0; i < n; ++i) nonzero += a[i] != b[i];
    if (nonzero < 6) continue;
    ++fixtures;
    c.near(eval::wilcoxon_signed_rank(a, b).p_value, oracle::wilcoxon_exact_p(a, b), 1e-12,
           "wilcoxon p, n = " + std::to_string(n));
  }
  std::vector<double> hi, lo;
  for (int i = 0; i < 10; ++i) {
    hi.push_back(10.0 + i);
    lo.push_back(i);
  }
  c.expect(eval::wilcoxon_signed_rank(hi, lo).p_value == 2.0 / 1024.0, "all-greater p == 2/2^10");

  const std::vector<std::vector<double>> r{{9, 2}, {6, 1}, {8, 4}, {7, 1}, {10, 5}, {6, 2}};
  c.near(eval::icc3k(r), oracle::icc3k(r), 1e-9, "icc3k 6x2 vs ANOVA oracle");
  c.near(eval::icc3k(r), 240.0 / 281.0, 1e-9, "icc3k 6x2 vs hand value");
  c.expect(eval::icc3k({{1, 1}, {4, 4}, {2, 2}, {8, 8}, {3, 3}}) == 1.0, "perfect agreement ICC == 1");
}

void io_round_trips(Checker& c) {
  biogan::testing::TempDir dir("biogan-acceptance");
  Rng rng(9);
  double worst = 0.0;
  for (int i = 0; i < 5; ++i) {
    const Tensor t = random_tensor(rng, 3, 17 + i, 23);
    save_image(ImageTensor(t, RangeTag::kGen), dir / "rt.png");
    const auto back = load_image(dir / "rt.png");
    c.expect(back.tensor().same_shape(t), "image shape survives save/load");
    if (!back.tensor().same_shape(t)) continue;
    for (std::size_t k = 0; k < t.size(); ++k) worst = std::max(worst, std::fabs(back.tensor().values()[k] - t.values()[k]));
  }
  c.expect(worst <= 1.0 / 127.5, "image round trip within 1/127.5");

  std::vector<oracle::Scene> scenes;
  for (int i = 0; i < 4; ++i) scenes.push_back(oracle::random_scene(rng, 6));
  {
    std::ofstream(dir / "gt.json") << oracle::coco_annotations(scenes);
    std::ofstream(dir / "det.json") << oracle::coco_detections(scenes);
  }
  const std::vector<std::string> files = {"eval/report.json", "eval/report.txt", "plots/pr_curve.csv",
                                          "plots/pr_curve.png"};
  std::vector<std::string> first;
  for (const std::string run : {"a", "b"}) {
    std::ostringstream out, err;
    const int e = cli::run({"evaluate", "--gt", (dir / "gt.json").string(), "--detections",
                            (dir / "det.json").string(), "--out", (dir / run / "eval").string()},
                           out, err);
    const int r = cli::run({"report", "--metrics", (dir / run / "eval/report.json").string(), "--out",
                            (dir / run / "plots").string()},
                           out, err);
    c.expect(e == 0 && r == 0, "evaluate/report exit 0: " + err.str());
    for (std::size_t i = 0; i < files.size(); ++i) {
      const fs::path p = dir / run / files[i];
      const std::string bytes = fs::exists(p) ? read_file(p) : std::string();
      c.expect(!bytes.empty(), files[i] + " written");
      if (first.size() < files.size()) {
        first.push_back(bytes);
      } else {
        c.expect(bytes == first[i], files[i] + " byte-identical across runs");
      }
    }
  }
}

struct Criterion {
  int number;
  const char* name;
  std::function<void(Checker&)> body;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "F1 arithmetic", f1_arithmetic},
      {2, "relative improvement", relative_improvement},
      {3, "perceptual loss", perceptual},
      {4, "gradient verification", gradients},
      {5, "architecture invariants", architecture},
      {6, "training smoke", training_smoke},
      {7, "evaluation oracle", evaluation_oracle},
      {8, "statistics oracles", statistics},
      {9, "I/O round trips", io_round_trips},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Checker c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      cr.body(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("threw: ") + e.what());
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !c.passed();
    std::printf("criterion %d: %s  %s (%s, %.1f s)\n", cr.number, c.passed() ? "PASS" : "FAIL", cr.name,
                c.summary().c_str(), s);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
