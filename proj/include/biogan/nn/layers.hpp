#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "biogan/nn/ops.hpp"
#include "biogan/random.hpp"
#include "biogan/tensor.hpp"

namespace biogan::nn {

/// Forward-pass mode. Always passed explicitly; layers keep no ambient mode.
enum class Mode {
  kInference,            // running statistics, no caching, dropout off
  kTraining,             // batch statistics, running statistics updated
  kTrainingFrozenStats,  // batch statistics, running statistics untouched
};

struct Parameter {
  std::string name;
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;

  Parameter(std::string n, std::vector<int> s, double fill = 0.0);
  std::size_t size() const noexcept { return value.size(); }
  void zero_grad();
};

/// A differentiable building block. forward() is const and reentrant;
/// forward_train() caches what backward() needs, so a layer supports one
/// in-flight training pass at a time.
class Layer {
 public:
  Layer() = default;
  Layer(const Layer&) = delete;
  Layer& operator=(const Layer&) = delete;
  Layer(Layer&&) noexcept = default;
  Layer& operator=(Layer&&) noexcept = default;
  virtual ~Layer() = default;

  virtual Tensor forward(const Tensor& x) const = 0;
  virtual Tensor forward_train(const Tensor& x, Mode mode) = 0;
  virtual Tensor backward(const Tensor& grad_out) = 0;

  virtual void collect(std::vector<Parameter*>& params, std::vector<Parameter*>& buffers);
  virtual void collect(std::vector<const Parameter*>& params,
                       std::vector<const Parameter*>& buffers) const;

 protected:
  std::vector<Parameter> params_;
  std::vector<Parameter> buffers_;
};

using LayerPtr = std::unique_ptr<Layer>;

class Conv2d : public Layer {
 public:
  Conv2d(const std::string& name, int in_channels, int out_channels, ConvGeometry geometry,
         Rng& init, bool bias = true);

  Tensor forward(const Tensor& x) const override;
  Tensor forward_train(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;

  const ConvGeometry& geometry() const noexcept { return geometry_; }
  int in_channels() const noexcept { return in_channels_; }
  int out_channels() const noexcept { return out_channels_; }

 private:
  int in_channels_;
  int out_channels_;
  ConvGeometry geometry_;
  bool has_bias_;
  Tensor input_;
};

class ConvTranspose2d : public Layer {
 public:
  ConvTranspose2d(const std::string& name, int in_channels, int out_channels,
                  ConvGeometry geometry, Rng& init);

  Tensor forward(const Tensor& x) const override;
  Tensor forward_train(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;

  const ConvGeometry& geometry() const noexcept { return geometry_; }

 private:
  int in_channels_;
  int out_channels_;
  ConvGeometry geometry_;
  Tensor input_;
};

class BatchNorm2d : public Layer {
 public:
  BatchNorm2d(const std::string& name, int channels, double momentum = 0.1, double eps = 1e-5);

  Tensor forward(const Tensor& x) const override;
  Tensor forward_train(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  double momentum_;
  double eps_;
  BatchNormSaved saved_;
  bool frozen_pass_ = false;  // last forward_train used running statistics
};

enum class ActivationKind { kReLU, kLeakyReLU, kTanh };

class Activation : public Layer {
 public:
  explicit Activation(ActivationKind kind, double slope = 0.2) : kind_(kind), slope_(slope) {}

  Tensor forward(const Tensor& x) const override;
  Tensor forward_train(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  ActivationKind kind_;
  double slope_;
  Tensor cached_;  // input for (leaky) ReLU, output for Tanh
};

class AvgPool2 : public Layer {
 public:
  Tensor forward(const Tensor& x) const override { return avg_pool2(x); }
  Tensor forward_train(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  int height_ = 0;
  int width_ = 0;
};

class UpsampleNearest2 : public Layer {
 public:
  Tensor forward(const Tensor& x) const override { return upsample_nearest2(x); }
  Tensor forward_train(const Tensor& x, Mode) override { return upsample_nearest2(x); }
  Tensor backward(const Tensor& grad_out) override { return upsample_nearest2_backward(grad_out); }
};

/// Inverted dropout, active only in training modes.
class Dropout : public Layer {
 public:
  Dropout(double rate, std::uint64_t seed) : rate_(rate), rng_(seed) {}

  Tensor forward(const Tensor& x) const override { return x; }
  Tensor forward_train(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  double rate_;
  Rng rng_;
  std::vector<double> mask_;
};

class Sequential : public Layer {
 public:
  Sequential() = default;
  explicit Sequential(std::vector<LayerPtr> layers) : layers_(std::move(layers)) {}

  void add(LayerPtr layer) { layers_.push_back(std::move(layer)); }
  std::size_t size() const noexcept { return layers_.size(); }
  const Layer& at(std::size_t i) const { return *layers_.at(i); }

  Tensor forward(const Tensor& x) const override;
  Tensor forward_train(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;

  void collect(std::vector<Parameter*>& params, std::vector<Parameter*>& buffers) override;
  void collect(std::vector<const Parameter*>& params,
               std::vector<const Parameter*>& buffers) const override;

 private:
  std::vector<LayerPtr> layers_;
};

/// y = x + body(x)
class ResidualBlock : public Layer {
 public:
  explicit ResidualBlock(Sequential body) : body_(std::move(body)) {}

  Tensor forward(const Tensor& x) const override;
  Tensor forward_train(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;

  void collect(std::vector<Parameter*>& params, std::vector<Parameter*>& buffers) override;
  void collect(std::vector<const Parameter*>& params,
               std::vector<const Parameter*>& buffers) const override;

 private:
  Sequential body_;
};

/// Views over a module's parameters and buffers in a stable order.
struct ParameterSet {
  std::vector<Parameter*> params;
  std::vector<Parameter*> buffers;

  void zero_grad();
  std::size_t count() const;
};

/// FNV-1a over names, values and buffers; used for update-isolation checks.
std::uint64_t hash_parameters(const std::vector<const Parameter*>& params,
                              const std::vector<const Parameter*>& buffers);

}  // namespace biogan::nn
