#pragma once

#include <span>
#include <vector>

#include "biogan/tensor.hpp"

// Stateless forward/backward kernels. Layers and the frozen feature descriptor
// are both built on these so the descriptor never needs mutable state.
namespace biogan::nn {

enum class PadMode { kZero, kReflect };

struct ConvGeometry {
  int kernel = 3;
  int stride = 1;
  int padding = 0;
  PadMode pad_mode = PadMode::kZero;
};

int conv_output_size(int input, const ConvGeometry& g);
int conv_transpose_output_size(int input, const ConvGeometry& g);

// Convolution weights are laid out [out][in][k][k].
Tensor conv2d(const Tensor& x, std::span<const double> weight, std::span<const double> bias,
              int out_channels, const ConvGeometry& g);

// Accumulates into grad_weight / grad_bias when they are non-empty. Returns the
// input gradient, or an empty tensor when need_input_grad is false.
Tensor conv2d_backward(const Tensor& x, std::span<const double> weight, int out_channels,
                       const ConvGeometry& g, const Tensor& grad_out,
                       std::span<double> grad_weight, std::span<double> grad_bias,
                       bool need_input_grad);

// Transposed convolution weights are laid out [in][out][k][k] (zero padding only).
Tensor conv_transpose2d(const Tensor& x, std::span<const double> weight,
                        std::span<const double> bias, int out_channels, const ConvGeometry& g);

Tensor conv_transpose2d_backward(const Tensor& x, std::span<const double> weight,
                                 int out_channels, const ConvGeometry& g,
                                 const Tensor& grad_out, std::span<double> grad_weight,
                                 std::span<double> grad_bias, bool need_input_grad);

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& grad_out);
Tensor leaky_relu(const Tensor& x, double slope);
Tensor leaky_relu_backward(const Tensor& x, double slope, const Tensor& grad_out);
Tensor tanh(const Tensor& x);
// Takes the forward output, not the input.
Tensor tanh_backward(const Tensor& y, const Tensor& grad_out);

// 2x2 windows, stride 2; odd trailing rows/columns are dropped.
Tensor max_pool2(const Tensor& x, std::vector<int>* argmax);
Tensor max_pool2_backward(const Tensor& grad_out, const std::vector<int>& argmax, int height,
                          int width);
Tensor avg_pool2(const Tensor& x);
Tensor avg_pool2_backward(const Tensor& grad_out, int height, int width);
Tensor upsample_nearest2(const Tensor& x);
Tensor upsample_nearest2_backward(const Tensor& grad_out);

struct BatchNormSaved {
  std::vector<double> mean;
  std::vector<double> inv_std;
  Tensor normalized;
};

// Batch statistics over the spatial extent (batch size is always one).
Tensor batch_norm_train(const Tensor& x, std::span<const double> gamma,
                        std::span<const double> beta, double eps, BatchNormSaved& saved);
Tensor batch_norm_infer(const Tensor& x, std::span<const double> gamma,
                        std::span<const double> beta, std::span<const double> running_mean,
                        std::span<const double> running_var, double eps);
Tensor batch_norm_backward(const BatchNormSaved& saved, std::span<const double> gamma,
                           const Tensor& grad_out, std::span<double> grad_gamma,
                           std::span<double> grad_beta);

}  // namespace biogan::nn
