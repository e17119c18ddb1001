#include "biogan/generators.hpp"

#include <array>
#include <cmath>

#include "biogan/error.hpp"

namespace biogan {

using nn::ActivationKind;
using nn::ConvGeometry;
using nn::Mode;
using nn::PadMode;

namespace {

constexpr int kUNetDepth = 8;
constexpr std::array<int, kUNetDepth> kUNetWidths = {64, 128, 256, 512, 512, 512, 512, 512};
constexpr int kResidualBlocks = 9;
constexpr double kDropoutRate = 0.5;

}  // namespace

int scaled_width(int base, double multiplier) {
  return std::max(1, static_cast<int>(std::lround(base * multiplier)));
}

struct Generator::Network {
  virtual ~Network() = default;
  virtual Tensor forward(const Tensor& x) const = 0;
  virtual Tensor forward_train(const Tensor& x, Mode mode) = 0;
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual void collect(std::vector<nn::Parameter*>& p, std::vector<nn::Parameter*>& b) = 0;
  virtual void collect(std::vector<const nn::Parameter*>& p,
                       std::vector<const nn::Parameter*>& b) const = 0;
};

namespace {

// front (3 convs) -> 9 residual blocks -> back (2 resize-convs) -> 7x7 deconv + Tanh
class ResNetNetwork final : public Generator::Network {
 public:
  ResNetNetwork(double mult, Rng& rng, std::vector<LayerSummary>& summary) {
    const int w1 = scaled_width(64, mult);
    const int w2 = scaled_width(128, mult);
    const int w3 = scaled_width(256, mult);

    auto conv_bn_relu = [&](const std::string& name, int in, int out, ConvGeometry g,
                            const std::string& role) {
      body_.add(std::make_unique<nn::Conv2d>(name + ".conv", in, out, g, rng));
      body_.add(std::make_unique<nn::BatchNorm2d>(name + ".bn", out));
      body_.add(std::make_unique<nn::Activation>(ActivationKind::kReLU));
      summary.push_back({name, role, g.kernel, g.stride, in, out});
    };

    conv_bn_relu("front1", 3, w1, {7, 1, 3, PadMode::kReflect}, "front");
    conv_bn_relu("front2", w1, w2, {3, 2, 1, PadMode::kZero}, "front");
    conv_bn_relu("front3", w2, w3, {3, 2, 1, PadMode::kZero}, "front");

    for (int i = 1; i <= kResidualBlocks; ++i) {
      const std::string name = "res" + std::to_string(i);
      const ConvGeometry g{3, 1, 1, PadMode::kReflect};
      nn::Sequential block;
      block.add(std::make_unique<nn::Conv2d>(name + ".conv1", w3, w3, g, rng));
      block.add(std::make_unique<nn::BatchNorm2d>(name + ".bn1", w3));
      block.add(std::make_unique<nn::Activation>(ActivationKind::kReLU));
      block.add(std::make_unique<nn::Conv2d>(name + ".conv2", w3, w3, g, rng));
      block.add(std::make_unique<nn::BatchNorm2d>(name + ".bn2", w3));
      body_.add(std::make_unique<nn::ResidualBlock>(std::move(block)));
      summary.push_back({name, "residual", 3, 1, w3, w3});
    }

    for (auto [name, in, out] : {std::tuple{"back1", w3, w2}, std::tuple{"back2", w2, w1}}) {
      body_.add(std::make_unique<nn::UpsampleNearest2>());
      conv_bn_relu(name, in, out, {3, 1, 1, PadMode::kZero}, "back");
    }

    const ConvGeometry last{7, 1, 3, PadMode::kZero};
    body_.add(std::make_unique<nn::ConvTranspose2d>("final.deconv", w1, 3, last, rng));
    body_.add(std::make_unique<nn::Activation>(ActivationKind::kTanh));
    summary.push_back({"final", "final", 7, 1, w1, 3});
  }

  Tensor forward(const Tensor& x) const override { return body_.forward(x); }
  Tensor forward_train(const Tensor& x, Mode mode) override { return body_.forward_train(x, mode); }
  Tensor backward(const Tensor& g) override { return body_.backward(g); }
  void collect(std::vector<nn::Parameter*>& p, std::vector<nn::Parameter*>& b) override {
    body_.collect(p, b);
  }
  void collect(std::vector<const nn::Parameter*>& p,
               std::vector<const nn::Parameter*>& b) const override {
    body_.collect(p, b);
  }

 private:
  nn::Sequential body_;
};

// Eight down and eight up layers; up layer j (j >= 2) consumes the previous up
// output concatenated with the output of down layer 9 - j.
class UNetNetwork final : public Generator::Network {
 public:
  UNetNetwork(bool stride_one, double mult, bool dropout, std::uint64_t seed, Rng& rng,
              std::vector<LayerSummary>& summary) {
    std::array<int, kUNetDepth> widths{};
    for (int i = 0; i < kUNetDepth; ++i) widths[i] = scaled_width(kUNetWidths[i], mult);
    const ConvGeometry g = stride_one ? ConvGeometry{3, 1, 1, PadMode::kZero}
                                      : ConvGeometry{4, 2, 1, PadMode::kZero};

    int in = 3;
    for (int i = 1; i <= kUNetDepth; ++i) {
      const int out = widths[i - 1];
      const std::string name = "down" + std::to_string(i);
      nn::Sequential block;
      block.add(std::make_unique<nn::Conv2d>(name + ".conv", in, out, g, rng));
      if (i > 1 && i < kUNetDepth) block.add(std::make_unique<nn::BatchNorm2d>(name + ".bn", out));
      block.add(std::make_unique<nn::Activation>(ActivationKind::kLeakyReLU, 0.2));
      if (stride_one) block.add(std::make_unique<nn::AvgPool2>());
      down_.push_back(std::move(block));
      down_channels_.push_back(out);
      summary.push_back({name, "down", g.kernel, g.stride, in, out});
      in = out;
    }

    for (int j = 1; j <= kUNetDepth; ++j) {
      const bool last = j == kUNetDepth;
      const int skip = last ? 0 : widths[kUNetDepth - j - 1];
      const int up_in = j == 1 ? widths[kUNetDepth - 1] : 2 * widths[kUNetDepth - j];
      const int out = last ? 3 : skip;
      const std::string name = "up" + std::to_string(j);
      nn::Sequential block;
      if (stride_one) {
        block.add(std::make_unique<nn::UpsampleNearest2>());
        block.add(std::make_unique<nn::Conv2d>(name + ".conv", up_in, out, g, rng));
      } else {
        block.add(std::make_unique<nn::ConvTranspose2d>(name + ".deconv", up_in, out, g, rng));
      }
      if (last) {
        block.add(std::make_unique<nn::Activation>(ActivationKind::kTanh));
      } else {
        block.add(std::make_unique<nn::BatchNorm2d>(name + ".bn", out));
        block.add(std::make_unique<nn::Activation>(ActivationKind::kReLU));
        if (dropout && j <= 3) {
          block.add(std::make_unique<nn::Dropout>(kDropoutRate, derive_seed(seed, 100 + j)));
        }
      }
      up_.push_back(std::move(block));
      summary.push_back({name, "up", g.kernel, g.stride, up_in, out});
    }
  }

  Tensor forward(const Tensor& x) const override {
    std::vector<Tensor> skips;
    Tensor h = x;
    for (const auto& block : down_) {
      h = block.forward(h);
      skips.push_back(h);
    }
    for (int j = 1; j <= kUNetDepth; ++j) {
      if (j > 1) h = concat_channels(h, skips[kUNetDepth - j]);
      h = up_[j - 1].forward(h);
    }
    return h;
  }

  Tensor forward_train(const Tensor& x, Mode mode) override {
    skips_.clear();
    Tensor h = x;
    for (auto& block : down_) {
      h = block.forward_train(h, mode);
      skips_.push_back(h);
    }
    for (int j = 1; j <= kUNetDepth; ++j) {
      if (j > 1) h = concat_channels(h, skips_[kUNetDepth - j]);
      h = up_[j - 1].forward_train(h, mode);
    }
    return h;
  }

  Tensor backward(const Tensor& grad_out) override {
    // Gradients arriving at each down output through the skip links.
    std::vector<Tensor> skip_grads(kUNetDepth);
    Tensor g = grad_out;
    for (int j = kUNetDepth; j >= 1; --j) {
      g = up_[j - 1].backward(g);
      if (j > 1) {
        Tensor previous;
        Tensor skip;
        split_channels(g, g.channels() - down_channels_[kUNetDepth - j], previous, skip);
        skip_grads[kUNetDepth - j] = std::move(skip);
        g = std::move(previous);
      }
    }
    for (int i = kUNetDepth - 1; i >= 0; --i) {
      if (!skip_grads[i].empty()) g += skip_grads[i];
      g = down_[i].backward(g);
    }
    return g;
  }

  void collect(std::vector<nn::Parameter*>& p, std::vector<nn::Parameter*>& b) override {
    for (auto& block : down_) block.collect(p, b);
    for (auto& block : up_) block.collect(p, b);
  }
  void collect(std::vector<const nn::Parameter*>& p,
               std::vector<const nn::Parameter*>& b) const override {
    for (const auto& block : down_) block.collect(p, b);
    for (const auto& block : up_) block.collect(p, b);
  }

 private:
  std::vector<nn::Sequential> down_;
  std::vector<nn::Sequential> up_;
  std::vector<int> down_channels_;
  std::vector<Tensor> skips_;
};

}  // namespace

Generator::Generator(GeneratorSpec spec, std::uint64_t seed, std::unique_ptr<Network> net,
                     std::vector<LayerSummary> layers)
    : spec_(spec), seed_(seed), net_(std::move(net)), layers_(std::move(layers)) {}

Generator::Generator(Generator&&) noexcept = default;
Generator& Generator::operator=(Generator&&) noexcept = default;
Generator::~Generator() = default;

Generator Generator::build(const GeneratorSpec& spec, std::uint64_t seed) {
  if (!(spec.width_multiplier > 0.0) || !std::isfinite(spec.width_multiplier)) {
    throw ArgumentError("generator width_multiplier must be positive");
  }
  Rng rng(derive_seed(seed, 1));
  std::vector<LayerSummary> layers;
  std::unique_ptr<Network> net;
  switch (spec.kind) {
    case GeneratorKind::kResNet:
      net = std::make_unique<ResNetNetwork>(spec.width_multiplier, rng, layers);
      break;
    case GeneratorKind::kUNetStride2:
    case GeneratorKind::kUNetStride1:
      net = std::make_unique<UNetNetwork>(spec.kind == GeneratorKind::kUNetStride1,
                                          spec.width_multiplier, spec.dropout, seed, rng, layers);
      break;
    default:
      throw ArgumentError("unsupported generator kind");
  }
  return Generator(spec, seed, std::move(net), std::move(layers));
}

std::vector<std::pair<int, int>> Generator::skip_connections() const {
  std::vector<std::pair<int, int>> links;
  if (spec_.kind == GeneratorKind::kResNet) return links;
  for (int i = 1; i < kUNetDepth; ++i) links.emplace_back(i, kUNetDepth + 1 - i);
  return links;
}

int Generator::size_multiple() const noexcept {
  return spec_.kind == GeneratorKind::kResNet ? 4 : (1 << kUNetDepth);
}

void Generator::check_input(const Tensor& x) const {
  if (x.channels() != 3) throw ShapeError("generator input must have 3 channels");
  const int m = size_multiple();
  if (x.height() < m || x.width() < m || x.height() % m != 0 || x.width() % m != 0) {
    throw ShapeError("generator input " + std::to_string(x.width()) + "x" +
                     std::to_string(x.height()) + " is not a positive multiple of " +
                     std::to_string(m));
  }
}

std::size_t Generator::parameter_count() const {
  std::vector<const nn::Parameter*> params;
  std::vector<const nn::Parameter*> buffers;
  collect(params, buffers);
  std::size_t n = 0;
  for (const auto* p : params) n += p->size();
  return n;
}

Tensor Generator::forward(const Tensor& x) const {
  check_input(x);
  return net_->forward(x);
}

Tensor Generator::forward_train(const Tensor& x, nn::Mode mode) {
  check_input(x);
  return net_->forward_train(x, mode);
}

Tensor Generator::backward(const Tensor& grad_out) { return net_->backward(grad_out); }

nn::ParameterSet Generator::parameters() {
  nn::ParameterSet set;
  net_->collect(set.params, set.buffers);
  return set;
}

void Generator::collect(std::vector<const nn::Parameter*>& params,
                        std::vector<const nn::Parameter*>& buffers) const {
  static_cast<const Network&>(*net_).collect(params, buffers);
}

std::uint64_t Generator::hash() const {
  std::vector<const nn::Parameter*> params;
  std::vector<const nn::Parameter*> buffers;
  collect(params, buffers);
  return nn::hash_parameters(params, buffers);
}

ImageTensor generate(const Generator& g, const ImageTensor& x) {
  if (x.range() != RangeTag::kGen) throw ArgumentError("generate expects a GEN image");
  return ImageTensor(g.forward(x.tensor()), RangeTag::kGen);
}

Padding padding_to_multiple(int height, int width, int multiple) {
  const int target_h = ((height + multiple - 1) / multiple) * multiple;
  const int target_w = ((width + multiple - 1) / multiple) * multiple;
  const int extra_h = target_h - height;
  const int extra_w = target_w - width;
  return {extra_h / 2, extra_h - extra_h / 2, extra_w / 2, extra_w - extra_w / 2};
}

ImageTensor translate_image(const Generator& g, const ImageTensor& x) {
  if (x.range() != RangeTag::kGen) throw ArgumentError("translate expects a GEN image");
  const Padding pad = padding_to_multiple(x.height(), x.width(), g.size_multiple());
  const Tensor padded = reflect_pad(x.tensor(), pad.top, pad.bottom, pad.left, pad.right);
  const Tensor out = g.forward(padded);
  return ImageTensor(crop(out, pad.top, pad.left, x.height(), x.width()), RangeTag::kGen);
}

}  // namespace biogan
