#include "biogan/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Core>

#include "biogan/error.hpp"

namespace biogan::nn {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutableMap = Eigen::Map<RowMatrix>;

// Resolves a padded coordinate to a source index, or -1 for a zero sample.
inline int source_index(int i, int n, PadMode mode) {
  if (i >= 0 && i < n) return i;
  if (mode == PadMode::kZero) return -1;
  return reflect_index(i, n);
}

RowMatrix im2col(const Tensor& x, const ConvGeometry& g, int out_h, int out_w) {
  const int k = g.kernel;
  const int positions = out_h * out_w;
  RowMatrix cols(static_cast<Eigen::Index>(x.channels()) * k * k, positions);
  for (int c = 0; c < x.channels(); ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = cols.row((c * k + ky) * k + kx).data();
        for (int oy = 0; oy < out_h; ++oy) {
          const int sy = source_index(oy * g.stride - g.padding + ky, x.height(), g.pad_mode);
          double* dst = row + oy * out_w;
          if (sy < 0) {
            std::fill(dst, dst + out_w, 0.0);
            continue;
          }
          for (int ox = 0; ox < out_w; ++ox) {
            const int sx = source_index(ox * g.stride - g.padding + kx, x.width(), g.pad_mode);
            dst[ox] = sx < 0 ? 0.0 : x.at(c, sy, sx);
          }
        }
      }
    }
  }
  return cols;
}

// Adjoint of im2col: scatters column entries back onto an image.
void col2im(const RowMatrix& cols, const ConvGeometry& g, int out_h, int out_w, Tensor& image) {
  const int k = g.kernel;
  for (int c = 0; c < image.channels(); ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = cols.row((c * k + ky) * k + kx).data();
        for (int oy = 0; oy < out_h; ++oy) {
          const int sy =
              source_index(oy * g.stride - g.padding + ky, image.height(), g.pad_mode);
          if (sy < 0) continue;
          const double* src = row + oy * out_w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int sx =
                source_index(ox * g.stride - g.padding + kx, image.width(), g.pad_mode);
            if (sx >= 0) image.at(c, sy, sx) += src[ox];
          }
        }
      }
    }
  }
}

void check_weight_size(std::span<const double> weight, std::size_t expected, const char* what) {
  if (weight.size() != expected) {
    throw ShapeError(std::string(what) + ": weight size does not match geometry");
  }
}

}  // namespace

int conv_output_size(int input, const ConvGeometry& g) {
  const int span = input + 2 * g.padding - g.kernel;
  if (span < 0) return 0;
  return span / g.stride + 1;
}

int conv_transpose_output_size(int input, const ConvGeometry& g) {
  return (input - 1) * g.stride - 2 * g.padding + g.kernel;
}

Tensor conv2d(const Tensor& x, std::span<const double> weight, std::span<const double> bias,
              int out_channels, const ConvGeometry& g) {
  const int out_h = conv_output_size(x.height(), g);
  const int out_w = conv_output_size(x.width(), g);
  if (out_h <= 0 || out_w <= 0) throw ShapeError("conv2d: input smaller than kernel");
  const std::size_t fan_in = static_cast<std::size_t>(x.channels()) * g.kernel * g.kernel;
  check_weight_size(weight, fan_in * out_channels, "conv2d");

  const RowMatrix cols = im2col(x, g, out_h, out_w);
  Tensor out(out_channels, out_h, out_w);
  ConstMap w(weight.data(), out_channels, static_cast<Eigen::Index>(fan_in));
  MutableMap y(out.data(), out_channels, static_cast<Eigen::Index>(out_h) * out_w);
  y.noalias() = w * cols;
  if (!bias.empty()) {
    for (int o = 0; o < out_channels; ++o) y.row(o).array() += bias[o];
  }
  return out;
}

Tensor conv2d_backward(const Tensor& x, std::span<const double> weight, int out_channels,
                       const ConvGeometry& g, const Tensor& grad_out,
                       std::span<double> grad_weight, std::span<double> grad_bias,
                       bool need_input_grad) {
  const int out_h = grad_out.height();
  const int out_w = grad_out.width();
  const Eigen::Index positions = static_cast<Eigen::Index>(out_h) * out_w;
  const Eigen::Index fan_in = static_cast<Eigen::Index>(x.channels()) * g.kernel * g.kernel;
  ConstMap dy(grad_out.data(), out_channels, positions);

  if (!grad_bias.empty()) {
    for (int o = 0; o < out_channels; ++o) grad_bias[o] += dy.row(o).sum();
  }
  const bool need_weight_grad = !grad_weight.empty();
  if (!need_weight_grad && !need_input_grad) return {};

  const RowMatrix cols = im2col(x, g, out_h, out_w);
  if (need_weight_grad) {
    MutableMap dw(grad_weight.data(), out_channels, fan_in);
    dw.noalias() += dy * cols.transpose();
  }
  if (!need_input_grad) return {};

  ConstMap w(weight.data(), out_channels, fan_in);
  const RowMatrix dcols = w.transpose() * dy;
  Tensor dx(x.channels(), x.height(), x.width());
  col2im(dcols, g, out_h, out_w, dx);
  return dx;
}

Tensor conv_transpose2d(const Tensor& x, std::span<const double> weight,
                        std::span<const double> bias, int out_channels, const ConvGeometry& g) {
  if (g.pad_mode != PadMode::kZero) {
    throw ArgumentError("conv_transpose2d supports zero padding only");
  }
  const int out_h = conv_transpose_output_size(x.height(), g);
  const int out_w = conv_transpose_output_size(x.width(), g);
  if (out_h <= 0 || out_w <= 0) throw ShapeError("conv_transpose2d: empty output");
  const Eigen::Index fan_out = static_cast<Eigen::Index>(out_channels) * g.kernel * g.kernel;
  check_weight_size(weight, static_cast<std::size_t>(fan_out) * x.channels(),
                    "conv_transpose2d");

  ConstMap w(weight.data(), x.channels(), fan_out);
  ConstMap in(x.data(), x.channels(), static_cast<Eigen::Index>(x.plane()));
  const RowMatrix cols = w.transpose() * in;
  Tensor out(out_channels, out_h, out_w);
  // The transposed convolution is the adjoint of a strided convolution whose
  // output grid is the input grid here.
  col2im(cols, g, x.height(), x.width(), out);
  if (!bias.empty()) {
    for (int o = 0; o < out_channels; ++o) {
      for (double& v : out.channel(o)) v += bias[o];
    }
  }
  return out;
}

Tensor conv_transpose2d_backward(const Tensor& x, std::span<const double> weight,
                                 int out_channels, const ConvGeometry& g,
                                 const Tensor& grad_out, std::span<double> grad_weight,
                                 std::span<double> grad_bias, bool need_input_grad) {
  const Eigen::Index fan_out = static_cast<Eigen::Index>(out_channels) * g.kernel * g.kernel;
  const Eigen::Index positions = static_cast<Eigen::Index>(x.plane());
  if (!grad_bias.empty()) {
    for (int o = 0; o < out_channels; ++o) {
      double s = 0.0;
      for (double v : grad_out.channel(o)) s += v;
      grad_bias[o] += s;
    }
  }
  const bool need_weight_grad = !grad_weight.empty();
  if (!need_weight_grad && !need_input_grad) return {};

  const RowMatrix dcols = im2col(grad_out, g, x.height(), x.width());
  if (need_weight_grad) {
    ConstMap in(x.data(), x.channels(), positions);
    MutableMap dw(grad_weight.data(), x.channels(), fan_out);
    dw.noalias() += in * dcols.transpose();
  }
  if (!need_input_grad) return {};

  ConstMap w(weight.data(), x.channels(), fan_out);
  Tensor dx(x.channels(), x.height(), x.width());
  MutableMap dxm(dx.data(), x.channels(), positions);
  dxm.noalias() = w * dcols;
  return dx;
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& grad_out) {
  Tensor dx = grad_out;
  auto in = x.values();
  auto d = dx.values();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!(in[i] > 0.0)) d[i] = 0.0;
  }
  return dx;
}

Tensor leaky_relu(const Tensor& x, double slope) {
  Tensor y = x;
  for (double& v : y.values()) v = v > 0.0 ? v : slope * v;
  return y;
}

Tensor leaky_relu_backward(const Tensor& x, double slope, const Tensor& grad_out) {
  Tensor dx = grad_out;
  auto in = x.values();
  auto d = dx.values();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!(in[i] > 0.0)) d[i] *= slope;
  }
  return dx;
}

Tensor tanh(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.values()) v = std::tanh(v);
  return y;
}

Tensor tanh_backward(const Tensor& y, const Tensor& grad_out) {
  Tensor dx = grad_out;
  auto out = y.values();
  auto d = dx.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] *= 1.0 - out[i] * out[i];
  return dx;
}

Tensor max_pool2(const Tensor& x, std::vector<int>* argmax) {
  const int h = x.height() / 2;
  const int w = x.width() / 2;
  if (h == 0 || w == 0) throw ShapeError("max_pool2: input smaller than 2x2");
  Tensor out(x.channels(), h, w);
  if (argmax) argmax->assign(out.size(), 0);
  std::size_t idx = 0;
  for (int c = 0; c < x.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx, ++idx) {
        double best = -std::numeric_limits<double>::infinity();
        int best_pos = 0;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const double v = x.at(c, 2 * y + dy, 2 * xx + dx);
            if (v > best) {
              best = v;
              best_pos = (2 * y + dy) * x.width() + 2 * xx + dx;
            }
          }
        }
        out.at(c, y, xx) = best;
        if (argmax) (*argmax)[idx] = best_pos;
      }
    }
  }
  return out;
}

Tensor max_pool2_backward(const Tensor& grad_out, const std::vector<int>& argmax, int height,
                          int width) {
  Tensor dx(grad_out.channels(), height, width);
  std::size_t idx = 0;
  for (int c = 0; c < grad_out.channels(); ++c) {
    auto plane = dx.channel(c);
    for (int y = 0; y < grad_out.height(); ++y) {
      for (int xx = 0; xx < grad_out.width(); ++xx, ++idx) {
        plane[argmax[idx]] += grad_out.at(c, y, xx);
      }
    }
  }
  return dx;
}

Tensor avg_pool2(const Tensor& x) {
  const int h = x.height() / 2;
  const int w = x.width() / 2;
  if (h == 0 || w == 0) throw ShapeError("avg_pool2: input smaller than 2x2");
  Tensor out(x.channels(), h, w);
  for (int c = 0; c < x.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        out.at(c, y, xx) = 0.25 * (x.at(c, 2 * y, 2 * xx) + x.at(c, 2 * y, 2 * xx + 1) +
                                   x.at(c, 2 * y + 1, 2 * xx) + x.at(c, 2 * y + 1, 2 * xx + 1));
      }
    }
  }
  return out;
}

Tensor avg_pool2_backward(const Tensor& grad_out, int height, int width) {
  Tensor dx(grad_out.channels(), height, width);
  for (int c = 0; c < grad_out.channels(); ++c) {
    for (int y = 0; y < grad_out.height(); ++y) {
      for (int xx = 0; xx < grad_out.width(); ++xx) {
        const double g = 0.25 * grad_out.at(c, y, xx);
        dx.at(c, 2 * y, 2 * xx) += g;
        dx.at(c, 2 * y, 2 * xx + 1) += g;
        dx.at(c, 2 * y + 1, 2 * xx) += g;
        dx.at(c, 2 * y + 1, 2 * xx + 1) += g;
      }
    }
  }
  return dx;
}

Tensor upsample_nearest2(const Tensor& x) {
  Tensor out(x.channels(), 2 * x.height(), 2 * x.width());
  for (int c = 0; c < x.channels(); ++c) {
    for (int y = 0; y < out.height(); ++y) {
      for (int xx = 0; xx < out.width(); ++xx) out.at(c, y, xx) = x.at(c, y / 2, xx / 2);
    }
  }
  return out;
}

Tensor upsample_nearest2_backward(const Tensor& grad_out) {
  Tensor dx(grad_out.channels(), grad_out.height() / 2, grad_out.width() / 2);
  for (int c = 0; c < grad_out.channels(); ++c) {
    for (int y = 0; y < grad_out.height(); ++y) {
      for (int xx = 0; xx < grad_out.width(); ++xx) dx.at(c, y / 2, xx / 2) += grad_out.at(c, y, xx);
    }
  }
  return dx;
}

Tensor batch_norm_train(const Tensor& x, std::span<const double> gamma,
                        std::span<const double> beta, double eps, BatchNormSaved& saved) {
  const int channels = x.channels();
  const double m = static_cast<double>(x.plane());
  saved.mean.assign(channels, 0.0);
  saved.inv_std.assign(channels, 0.0);
  saved.normalized = Tensor(channels, x.height(), x.width());
  Tensor out(channels, x.height(), x.width());
  for (int c = 0; c < channels; ++c) {
    auto in = x.channel(c);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= m;
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var /= m;
    const double inv_std = 1.0 / std::sqrt(var + eps);
    saved.mean[c] = mean;
    saved.inv_std[c] = inv_std;
    auto xhat = saved.normalized.channel(c);
    auto y = out.channel(c);
    for (std::size_t i = 0; i < in.size(); ++i) {
      xhat[i] = (in[i] - mean) * inv_std;
      y[i] = gamma[c] * xhat[i] + beta[c];
    }
  }
  return out;
}

Tensor batch_norm_infer(const Tensor& x, std::span<const double> gamma,
                        std::span<const double> beta, std::span<const double> running_mean,
                        std::span<const double> running_var, double eps) {
  Tensor out(x.channels(), x.height(), x.width());
  for (int c = 0; c < x.channels(); ++c) {
    const double scale = gamma[c] / std::sqrt(running_var[c] + eps);
    const double shift = beta[c] - running_mean[c] * scale;
    auto in = x.channel(c);
    auto y = out.channel(c);
    for (std::size_t i = 0; i < in.size(); ++i) y[i] = in[i] * scale + shift;
  }
  return out;
}

Tensor batch_norm_backward(const BatchNormSaved& saved, std::span<const double> gamma,
                           const Tensor& grad_out, std::span<double> grad_gamma,
                           std::span<double> grad_beta) {
  const Tensor& xhat = saved.normalized;
  const double m = static_cast<double>(xhat.plane());
  Tensor dx(xhat.channels(), xhat.height(), xhat.width());
  for (int c = 0; c < xhat.channels(); ++c) {
    auto dy = grad_out.channel(c);
    auto xh = xhat.channel(c);
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (std::size_t i = 0; i < dy.size(); ++i) {
      sum_dy += dy[i];
      sum_dy_xhat += dy[i] * xh[i];
    }
    if (!grad_gamma.empty()) grad_gamma[c] += sum_dy_xhat;
    if (!grad_beta.empty()) grad_beta[c] += sum_dy;
    const double k = gamma[c] * saved.inv_std[c] / m;
    auto d = dx.channel(c);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      d[i] = k * (m * dy[i] - sum_dy - xh[i] * sum_dy_xhat);
    }
  }
  return dx;
}

}  // namespace biogan::nn
