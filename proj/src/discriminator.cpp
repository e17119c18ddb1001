#include "biogan/discriminator.hpp"

#include <cmath>

#include "biogan/error.hpp"
#include "biogan/generators.hpp"

namespace biogan {

int receptive_field(std::span<const nn::ConvGeometry> stack) {
  int field = 1;
  int jump = 1;
  for (const auto& g : stack) {
    field += (g.kernel - 1) * jump;
    jump *= g.stride;
  }
  return field;
}

Discriminator::Discriminator(DiscriminatorSpec spec, std::uint64_t seed)
    : spec_(spec), seed_(seed) {}

Discriminator Discriminator::build(std::uint64_t seed, DiscriminatorSpec spec) {
  if (!(spec.width_multiplier > 0.0) || !std::isfinite(spec.width_multiplier)) {
    throw ArgumentError("discriminator width_multiplier must be positive");
  }
  Discriminator d(spec, seed);
  Rng rng(derive_seed(seed, 2));
  struct Stage {
    int width;
    int stride;
    bool norm;
  };
  const Stage stages[] = {{64, 2, false}, {128, 2, true}, {256, 2, true}, {512, 1, true}};
  int in = 3;
  int index = 1;
  for (const Stage& s : stages) {
    const int out = scaled_width(s.width, spec.width_multiplier);
    const nn::ConvGeometry g{4, s.stride, 0, nn::PadMode::kZero};
    const std::string name = "conv" + std::to_string(index++);
    d.body_.add(std::make_unique<nn::Conv2d>(name, in, out, g, rng));
    if (s.norm) d.body_.add(std::make_unique<nn::BatchNorm2d>(name + ".bn", out));
    d.body_.add(std::make_unique<nn::Activation>(nn::ActivationKind::kLeakyReLU, 0.2));
    d.geometry_.push_back(g);
    in = out;
  }
  const nn::ConvGeometry last{4, 1, 0, nn::PadMode::kZero};
  d.body_.add(std::make_unique<nn::Conv2d>("conv5", in, 1, last, rng));
  d.geometry_.push_back(last);
  return d;
}

int Discriminator::receptive_field() const { return biogan::receptive_field(geometry_); }

int Discriminator::cell_stride() const {
  int jump = 1;
  for (const auto& g : geometry_) jump *= g.stride;
  return jump;
}

int Discriminator::output_size(int input) const {
  int n = input;
  for (const auto& g : geometry_) n = nn::conv_output_size(n, g);
  return n;
}

std::size_t Discriminator::parameter_count() const {
  std::vector<const nn::Parameter*> params;
  std::vector<const nn::Parameter*> buffers;
  collect(params, buffers);
  std::size_t n = 0;
  for (const auto* p : params) n += p->size();
  return n;
}

void Discriminator::check_input(const Tensor& x) const {
  const int rf = receptive_field();
  if (x.channels() != 3) throw ShapeError("discriminator input must have 3 channels");
  if (x.height() < rf || x.width() < rf) {
    throw ShapeError("discriminator input " + std::to_string(x.width()) + "x" +
                     std::to_string(x.height()) + " is smaller than the " +
                     std::to_string(rf) + "x" + std::to_string(rf) + " receptive field");
  }
}

Tensor Discriminator::forward(const Tensor& x) const {
  check_input(x);
  return body_.forward(x);
}

Tensor Discriminator::forward_train(const Tensor& x, nn::Mode mode) {
  check_input(x);
  return body_.forward_train(x, mode);
}

Tensor Discriminator::backward(const Tensor& grad_out) { return body_.backward(grad_out); }

nn::ParameterSet Discriminator::parameters() {
  nn::ParameterSet set;
  body_.collect(set.params, set.buffers);
  return set;
}

void Discriminator::collect(std::vector<const nn::Parameter*>& params,
                            std::vector<const nn::Parameter*>& buffers) const {
  body_.collect(params, buffers);
}

std::uint64_t Discriminator::hash() const {
  std::vector<const nn::Parameter*> params;
  std::vector<const nn::Parameter*> buffers;
  collect(params, buffers);
  return nn::hash_parameters(params, buffers);
}

PatchScoreMap discriminate(const Discriminator& d, const ImageTensor& image) {
  if (image.range() != RangeTag::kGen) throw ArgumentError("discriminate expects a GEN image");
  const Tensor logits = d.forward(image.tensor());
  PatchScoreMap map{logits.height(), logits.width(),
                    std::vector<double>(logits.values().begin(), logits.values().end())};
  for (double v : map.logits) {
    if (!std::isfinite(v)) throw NumericError("discriminator produced a non-finite logit");
  }
  return map;
}

}  // namespace biogan
