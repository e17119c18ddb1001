#include "biogan/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "biogan/error.hpp"

namespace biogan::nn {
namespace {

constexpr double kInitStd = 0.02;

void init_normal(Parameter& p, Rng& rng) {
  for (double& v : p.value) v = kInitStd * rng.normal();
}

}  // namespace

Parameter::Parameter(std::string n, std::vector<int> s, double fill)
    : name(std::move(n)), shape(std::move(s)) {
  std::size_t count = 1;
  for (int d : shape) count *= static_cast<std::size_t>(d);
  value.assign(count, fill);
  grad.assign(count, 0.0);
}

void Parameter::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

void Layer::collect(std::vector<Parameter*>& params, std::vector<Parameter*>& buffers) {
  for (auto& p : params_) params.push_back(&p);
  for (auto& b : buffers_) buffers.push_back(&b);
}

void Layer::collect(std::vector<const Parameter*>& params,
                    std::vector<const Parameter*>& buffers) const {
  for (const auto& p : params_) params.push_back(&p);
  for (const auto& b : buffers_) buffers.push_back(&b);
}

Conv2d::Conv2d(const std::string& name, int in_channels, int out_channels,
               ConvGeometry geometry, Rng& init, bool bias)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      geometry_(geometry),
      has_bias_(bias) {
  params_.emplace_back(name + ".weight",
                       std::vector<int>{out_channels, in_channels, geometry.kernel, geometry.kernel});
  init_normal(params_.back(), init);
  if (bias) params_.emplace_back(name + ".bias", std::vector<int>{out_channels});
}

Tensor Conv2d::forward(const Tensor& x) const {
  if (x.channels() != in_channels_) throw ShapeError("conv2d: channel mismatch");
  std::span<const double> bias;
  if (has_bias_) bias = params_[1].value;
  return conv2d(x, params_[0].value, bias, out_channels_, geometry_);
}

Tensor Conv2d::forward_train(const Tensor& x, Mode) {
  input_ = x;
  return forward(x);
}

Tensor Conv2d::backward(const Tensor& grad_out) {
  std::span<double> grad_bias;
  if (has_bias_) grad_bias = params_[1].grad;
  return conv2d_backward(input_, params_[0].value, out_channels_, geometry_, grad_out,
                         params_[0].grad, grad_bias, true);
}

ConvTranspose2d::ConvTranspose2d(const std::string& name, int in_channels, int out_channels,
                                 ConvGeometry geometry, Rng& init)
    : in_channels_(in_channels), out_channels_(out_channels), geometry_(geometry) {
  params_.emplace_back(name + ".weight",
                       std::vector<int>{in_channels, out_channels, geometry.kernel, geometry.kernel});
  init_normal(params_.back(), init);
  params_.emplace_back(name + ".bias", std::vector<int>{out_channels});
}

Tensor ConvTranspose2d::forward(const Tensor& x) const {
  if (x.channels() != in_channels_) throw ShapeError("conv_transpose2d: channel mismatch");
  return conv_transpose2d(x, params_[0].value, params_[1].value, out_channels_, geometry_);
}

Tensor ConvTranspose2d::forward_train(const Tensor& x, Mode) {
  input_ = x;
  return forward(x);
}

Tensor ConvTranspose2d::backward(const Tensor& grad_out) {
  return conv_transpose2d_backward(input_, params_[0].value, out_channels_, geometry_, grad_out,
                                   params_[0].grad, params_[1].grad, true);
}

BatchNorm2d::BatchNorm2d(const std::string& name, int channels, double momentum, double eps)
    : momentum_(momentum), eps_(eps) {
  params_.emplace_back(name + ".gamma", std::vector<int>{channels}, 1.0);
  params_.emplace_back(name + ".beta", std::vector<int>{channels}, 0.0);
  buffers_.emplace_back(name + ".running_mean", std::vector<int>{channels}, 0.0);
  buffers_.emplace_back(name + ".running_var", std::vector<int>{channels}, 1.0);
}

Tensor BatchNorm2d::forward(const Tensor& x) const {
  return batch_norm_infer(x, params_[0].value, params_[1].value, buffers_[0].value,
                          buffers_[1].value, eps_);
}

Tensor BatchNorm2d::forward_train(const Tensor& x, Mode mode) {
  frozen_pass_ = mode == Mode::kInference;
  if (frozen_pass_) {
    // Fixed affine map per channel; keep what backward needs in saved_.
    const auto& mean = buffers_[0].value;
    const auto& var = buffers_[1].value;
    saved_.mean = mean;
    saved_.inv_std.resize(mean.size());
    for (std::size_t c = 0; c < mean.size(); ++c) saved_.inv_std[c] = 1.0 / std::sqrt(var[c] + eps_);
    saved_.normalized = x;
    for (int c = 0; c < x.channels(); ++c) {
      for (double& v : saved_.normalized.channel(c)) v = (v - mean[c]) * saved_.inv_std[c];
    }
    return forward(x);
  }
  Tensor y = batch_norm_train(x, params_[0].value, params_[1].value, eps_, saved_);
  if (mode == Mode::kTraining) {
    const double m = static_cast<double>(x.plane());
    const double unbias = m > 1.0 ? m / (m - 1.0) : 1.0;
    auto& mean = buffers_[0].value;
    auto& var = buffers_[1].value;
    for (std::size_t c = 0; c < mean.size(); ++c) {
      const double batch_var = 1.0 / (saved_.inv_std[c] * saved_.inv_std[c]) - eps_;
      mean[c] = (1.0 - momentum_) * mean[c] + momentum_ * saved_.mean[c];
      var[c] = (1.0 - momentum_) * var[c] + momentum_ * batch_var * unbias;
    }
  }
  return y;
}

Tensor BatchNorm2d::backward(const Tensor& grad_out) {
  if (frozen_pass_) {
    Tensor dx = grad_out;
    auto& gg = params_[0].grad;
    auto& gb = params_[1].grad;
    for (int c = 0; c < dx.channels(); ++c) {
      auto g = dx.channel(c);
      auto n = saved_.normalized.channel(c);
      const double scale = params_[0].value[c] * saved_.inv_std[c];
      for (std::size_t i = 0; i < g.size(); ++i) {
        gg[c] += g[i] * n[i];
        gb[c] += g[i];
        g[i] *= scale;
      }
    }
    return dx;
  }
  return batch_norm_backward(saved_, params_[0].value, grad_out, params_[0].grad,
                             params_[1].grad);
}

Tensor Activation::forward(const Tensor& x) const {
  switch (kind_) {
    case ActivationKind::kReLU: return relu(x);
    case ActivationKind::kLeakyReLU: return leaky_relu(x, slope_);
    case ActivationKind::kTanh: return nn::tanh(x);
  }
  return x;
}

Tensor Activation::forward_train(const Tensor& x, Mode) {
  Tensor y = forward(x);
  cached_ = kind_ == ActivationKind::kTanh ? y : x;
  return y;
}

Tensor Activation::backward(const Tensor& grad_out) {
  switch (kind_) {
    case ActivationKind::kReLU: return relu_backward(cached_, grad_out);
    case ActivationKind::kLeakyReLU: return leaky_relu_backward(cached_, slope_, grad_out);
    case ActivationKind::kTanh: return tanh_backward(cached_, grad_out);
  }
  return grad_out;
}

Tensor AvgPool2::forward_train(const Tensor& x, Mode) {
  height_ = x.height();
  width_ = x.width();
  return avg_pool2(x);
}

Tensor AvgPool2::backward(const Tensor& grad_out) {
  return avg_pool2_backward(grad_out, height_, width_);
}

Tensor Dropout::forward_train(const Tensor& x, Mode mode) {
  if (mode == Mode::kInference || rate_ <= 0.0) {
    mask_.assign(x.size(), 1.0);
    return x;
  }
  const double keep = 1.0 - rate_;
  mask_.resize(x.size());
  Tensor y = x;
  auto v = y.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    mask_[i] = rng_.uniform() < keep ? 1.0 / keep : 0.0;
    v[i] *= mask_[i];
  }
  return y;
}

Tensor Dropout::backward(const Tensor& grad_out) {
  Tensor dx = grad_out;
  auto v = dx.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= mask_[i];
  return dx;
}

Tensor Sequential::forward(const Tensor& x) const {
  Tensor y = x;
  for (const auto& layer : layers_) y = layer->forward(y);
  return y;
}

Tensor Sequential::forward_train(const Tensor& x, Mode mode) {
  Tensor y = x;
  for (auto& layer : layers_) y = layer->forward_train(y, mode);
  return y;
}

Tensor Sequential::backward(const Tensor& grad_out) {
  Tensor g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

void Sequential::collect(std::vector<Parameter*>& params, std::vector<Parameter*>& buffers) {
  for (auto& layer : layers_) layer->collect(params, buffers);
}

void Sequential::collect(std::vector<const Parameter*>& params,
                         std::vector<const Parameter*>& buffers) const {
  for (const auto& layer : layers_) {
    static_cast<const Layer&>(*layer).collect(params, buffers);
  }
}

Tensor ResidualBlock::forward(const Tensor& x) const {
  Tensor y = body_.forward(x);
  y += x;
  return y;
}

Tensor ResidualBlock::forward_train(const Tensor& x, Mode mode) {
  Tensor y = body_.forward_train(x, mode);
  y += x;
  return y;
}

Tensor ResidualBlock::backward(const Tensor& grad_out) {
  Tensor g = body_.backward(grad_out);
  g += grad_out;
  return g;
}

void ResidualBlock::collect(std::vector<Parameter*>& params, std::vector<Parameter*>& buffers) {
  body_.collect(params, buffers);
}

void ResidualBlock::collect(std::vector<const Parameter*>& params,
                            std::vector<const Parameter*>& buffers) const {
  body_.collect(params, buffers);
}

void ParameterSet::zero_grad() {
  for (Parameter* p : params) p->zero_grad();
}

std::size_t ParameterSet::count() const {
  std::size_t n = 0;
  for (const Parameter* p : params) n += p->size();
  return n;
}

std::uint64_t hash_parameters(const std::vector<const Parameter*>& params,
                              const std::vector<const Parameter*>& buffers) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto* list : {&params, &buffers}) {
    for (const Parameter* p : *list) {
      mix(p->name.data(), p->name.size());
      mix(p->value.data(), p->value.size() * sizeof(double));
    }
  }
  return h;
}

}  // namespace biogan::nn
