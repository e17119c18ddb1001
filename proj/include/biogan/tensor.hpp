#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace biogan {

/// Dense channels x height x width array of doubles (row-major, batch of one).
class Tensor {
 public:
  Tensor() = default;
  Tensor(int channels, int height, int width, double fill = 0.0);

  int channels() const noexcept { return channels_; }
  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t plane() const noexcept {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& at(int c, int y, int x) noexcept {
    return values_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }
  double at(int c, int y, int x) const noexcept {
    return values_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }

  std::span<double> channel(int c) noexcept {
    return std::span<double>(values_).subspan(c * plane(), plane());
  }
  std::span<const double> channel(int c) const noexcept {
    return std::span<const double>(values_).subspan(c * plane(), plane());
  }

  bool same_shape(const Tensor& other) const noexcept {
    return channels_ == other.channels_ && height_ == other.height_ &&
           width_ == other.width_;
  }

  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(double scale);

  void fill(double value);

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.same_shape(b) && a.values_ == b.values_;
  }

 private:
  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> values_;
};

/// Channel-wise concatenation; both inputs must share the spatial size.
Tensor concat_channels(const Tensor& a, const Tensor& b);

/// Splits a tensor produced by concat_channels back into its two parts.
void split_channels(const Tensor& joined, int first_channels, Tensor& first, Tensor& second);

/// Index into [0, n) reflecting at the borders without repeating the edge
/// sample, applied repeatedly so offsets larger than n still resolve.
int reflect_index(int i, int n) noexcept;

/// Reflect-pads each side independently; amounts may exceed the extent.
Tensor reflect_pad(const Tensor& x, int top, int bottom, int left, int right);

/// Adjoint of reflect_pad: folds a gradient on the padded tensor back onto
/// the original extent.
Tensor reflect_pad_backward(const Tensor& grad, int height, int width, int top, int bottom,
                            int left, int right);

Tensor crop(const Tensor& x, int top, int left, int height, int width);

}  // namespace biogan
