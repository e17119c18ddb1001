#pragma once

#include <array>
#include <filesystem>

#include "biogan/tensor.hpp"

namespace biogan {

/// Value-range convention attached to an image.
enum class RangeTag {
  kGen,         // generator domain [-1, 1]
  kUnit,        // [0, 1]
  kDescriptor,  // descriptor-native (normalized), any finite value
};

const char* to_string(RangeTag tag);

struct ImageSize {
  int width = 0;
  int height = 0;

  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

/// Immutable 3-channel image whose values are guaranteed to lie in the
/// interval of its range tag.
class ImageTensor {
 public:
  ImageTensor(Tensor values, RangeTag range);

  int height() const noexcept { return values_.height(); }
  int width() const noexcept { return values_.width(); }
  int channels() const noexcept { return values_.channels(); }
  RangeTag range() const noexcept { return range_; }
  const Tensor& tensor() const noexcept { return values_; }
  double at(int c, int y, int x) const noexcept { return values_.at(c, y, x); }

 private:
  Tensor values_;
  RangeTag range_;
};

/// Per-channel ImageNet statistics the pretrained descriptor was trained with,
/// applied to [0, 1] RGB input.
inline constexpr std::array<double, 3> kDescriptorMean = {0.485, 0.456, 0.406};
inline constexpr std::array<double, 3> kDescriptorStd = {0.229, 0.224, 0.225};

/// Decodes a PNG or JPEG, resizes to `size` (antialiased bilinear) and maps
/// 8-bit values to [-1, 1] via v / 127.5 - 1. Channels are RGB.
ImageTensor load_image(const std::filesystem::path& path, ImageSize size);

/// Decodes at native resolution.
ImageTensor load_image(const std::filesystem::path& path);

/// Writes a GEN-range image as 8-bit PNG or JPEG (chosen by extension).
void save_image(const ImageTensor& image, const std::filesystem::path& path);

/// Encodes a GEN-range image as PNG bytes.
std::vector<unsigned char> encode_png(const ImageTensor& image);

/// GEN -> descriptor convention: u = (v + 1) / 2, then (u - mean_c) / std_c.
ImageTensor to_descriptor_range(const ImageTensor& image);
/// Exact inverse of to_descriptor_range.
ImageTensor from_descriptor_range(const ImageTensor& image);

/// d(descriptor value)/d(GEN value) for channel c.
double descriptor_range_slope(int channel);

/// Separable triangle-filter resize whose support widens with the downscale
/// factor (antialiased bilinear). Identity when the size is unchanged.
Tensor resize_bilinear_antialiased(const Tensor& x, ImageSize size);

/// True when the leading bytes identify a PNG or JPEG stream.
bool has_supported_signature(const std::filesystem::path& path);

}  // namespace biogan
