#include "biogan/tensor.hpp"

#include <algorithm>
#include <cassert>

#include "biogan/error.hpp"

namespace biogan {

Tensor::Tensor(int channels, int height, int width, double fill)
    : channels_(channels), height_(height), width_(width) {
  if (channels < 0 || height < 0 || width < 0) {
    throw ShapeError("negative tensor dimension");
  }
  values_.assign(static_cast<std::size_t>(channels) * height * width, fill);
}

Tensor& Tensor::operator+=(const Tensor& other) {
  if (!same_shape(other)) throw ShapeError("tensor shape mismatch in +=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

Tensor& Tensor::operator*=(double scale) {
  for (double& v : values_) v *= scale;
  return *this;
}

void Tensor::fill(double value) { std::fill(values_.begin(), values_.end(), value); }

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw ShapeError("concat_channels: spatial sizes differ");
  }
  Tensor out(a.channels() + b.channels(), a.height(), a.width());
  std::copy(a.values().begin(), a.values().end(), out.values().begin());
  std::copy(b.values().begin(), b.values().end(), out.values().begin() + a.size());
  return out;
}

void split_channels(const Tensor& joined, int first_channels, Tensor& first, Tensor& second) {
  assert(first_channels <= joined.channels());
  first = Tensor(first_channels, joined.height(), joined.width());
  second = Tensor(joined.channels() - first_channels, joined.height(), joined.width());
  auto src = joined.values();
  std::copy(src.begin(), src.begin() + first.size(), first.values().begin());
  std::copy(src.begin() + first.size(), src.end(), second.values().begin());
}

int reflect_index(int i, int n) noexcept {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - m;
}

Tensor reflect_pad(const Tensor& x, int top, int bottom, int left, int right) {
  if (top < 0 || bottom < 0 || left < 0 || right < 0) {
    throw ArgumentError("reflect_pad: negative padding");
  }
  const int h = x.height() + top + bottom;
  const int w = x.width() + left + right;
  Tensor out(x.channels(), h, w);
  for (int c = 0; c < x.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      const int sy = reflect_index(y - top, x.height());
      for (int xx = 0; xx < w; ++xx) {
        out.at(c, y, xx) = x.at(c, sy, reflect_index(xx - left, x.width()));
      }
    }
  }
  return out;
}

Tensor reflect_pad_backward(const Tensor& grad, int height, int width, int top, int bottom,
                            int left, int right) {
  if (grad.height() != height + top + bottom || grad.width() != width + left + right) {
    throw ShapeError("reflect_pad_backward: gradient shape does not match padding");
  }
  Tensor out(grad.channels(), height, width);
  for (int c = 0; c < grad.channels(); ++c) {
    for (int y = 0; y < grad.height(); ++y) {
      const int sy = reflect_index(y - top, height);
      for (int xx = 0; xx < grad.width(); ++xx) {
        out.at(c, sy, reflect_index(xx - left, width)) += grad.at(c, y, xx);
      }
    }
  }
  return out;
}

Tensor crop(const Tensor& x, int top, int left, int height, int width) {
  if (top < 0 || left < 0 || top + height > x.height() || left + width > x.width()) {
    throw ShapeError("crop window outside tensor");
  }
  Tensor out(x.channels(), height, width);
  for (int c = 0; c < x.channels(); ++c) {
    for (int y = 0; y < height; ++y) {
      for (int xx = 0; xx < width; ++xx) out.at(c, y, xx) = x.at(c, y + top, xx + left);
    }
  }
  return out;
}

}  // namespace biogan
