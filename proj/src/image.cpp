#include "biogan/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "biogan/error.hpp"

namespace biogan {
namespace {

enum class Format { kPng, kJpeg, kOther };

Format sniff(const std::vector<unsigned char>& bytes) {
  static constexpr unsigned char kPng[] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (bytes.size() >= 8 && std::equal(std::begin(kPng), std::end(kPng), bytes.begin())) {
    return Format::kPng;
  }
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) {
    return Format::kJpeg;
  }
  return Format::kOther;
}

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed reading image file: " + path.string());
  return bytes;
}

Format format_for_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".png") return Format::kPng;
  if (ext == ".jpg" || ext == ".jpeg") return Format::kJpeg;
  return Format::kOther;
}

// Raw 0..255 RGB values as doubles.
Tensor decode_rgb(const std::filesystem::path& path) {
  const std::vector<unsigned char> bytes = read_file(path);
  if (sniff(bytes) == Format::kOther) {
    throw DecodeError("not a PNG or JPEG image: " + path.string());
  }
  cv::Mat bgr;
  try {
    bgr = cv::imdecode(bytes, cv::IMREAD_COLOR);
  } catch (const cv::Exception& e) {
    throw DecodeError("failed to decode " + path.string() + ": " + e.what());
  }
  if (bgr.empty() || bgr.type() != CV_8UC3) {
    throw DecodeError("failed to decode image: " + path.string());
  }
  Tensor out(3, bgr.rows, bgr.cols);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      for (int c = 0; c < 3; ++c) out.at(c, y, x) = row[x][2 - c];
    }
  }
  return out;
}

struct FilterTaps {
  std::vector<int> first;
  std::vector<std::vector<double>> weights;
};

FilterTaps triangle_taps(int in_size, int out_size) {
  const double scale = static_cast<double>(in_size) / out_size;
  const double support = std::max(1.0, scale);
  FilterTaps taps;
  taps.first.resize(out_size);
  taps.weights.resize(out_size);
  for (int i = 0; i < out_size; ++i) {
    const double center = (i + 0.5) * scale;
    const int lo = std::max(0, static_cast<int>(std::floor(center - support)));
    const int hi = std::min(in_size, static_cast<int>(std::ceil(center + support)));
    std::vector<double> w;
    double total = 0.0;
    for (int j = lo; j < hi; ++j) {
      const double t = std::abs((j + 0.5 - center) / support);
      const double v = t < 1.0 ? 1.0 - t : 0.0;
      w.push_back(v);
      total += v;
    }
    if (total <= 0.0) {
      // Degenerate window: fall back to the nearest sample.
      const int nearest = std::clamp(static_cast<int>(center), 0, in_size - 1);
      taps.first[i] = nearest;
      taps.weights[i] = {1.0};
      continue;
    }
    for (double& v : w) v /= total;
    taps.first[i] = lo;
    taps.weights[i] = std::move(w);
  }
  return taps;
}

}  // namespace

const char* to_string(RangeTag tag) {
  switch (tag) {
    case RangeTag::kGen: return "GEN";
    case RangeTag::kUnit: return "UNIT";
    case RangeTag::kDescriptor: return "DESC";
  }
  return "?";
}

ImageTensor::ImageTensor(Tensor values, RangeTag range)
    : values_(std::move(values)), range_(range) {
  if (values_.channels() != 3) throw ArgumentError("image must have 3 channels");
  if (values_.height() < 1 || values_.width() < 1) throw ArgumentError("image must be non-empty");
  double lo = -1.0;
  double hi = 1.0;
  if (range_ == RangeTag::kUnit) lo = 0.0;
  for (double v : values_.values()) {
    if (!std::isfinite(v)) throw ArgumentError("image contains non-finite values");
    if (range_ != RangeTag::kDescriptor && (v < lo || v > hi)) {
      throw ArgumentError(std::string("image value outside ") + to_string(range_) + " range");
    }
  }
}

Tensor resize_bilinear_antialiased(const Tensor& x, ImageSize size) {
  if (size.width <= 0 || size.height <= 0) throw ArgumentError("resize to zero size");
  if (size.width == x.width() && size.height == x.height()) return x;
  const FilterTaps horizontal = triangle_taps(x.width(), size.width);
  const FilterTaps vertical = triangle_taps(x.height(), size.height);
  Tensor tmp(x.channels(), x.height(), size.width);
  for (int c = 0; c < x.channels(); ++c) {
    for (int y = 0; y < x.height(); ++y) {
      for (int i = 0; i < size.width; ++i) {
        double acc = 0.0;
        const auto& w = horizontal.weights[i];
        for (std::size_t k = 0; k < w.size(); ++k) {
          acc += w[k] * x.at(c, y, horizontal.first[i] + static_cast<int>(k));
        }
        tmp.at(c, y, i) = acc;
      }
    }
  }
  Tensor out(x.channels(), size.height, size.width);
  for (int c = 0; c < x.channels(); ++c) {
    for (int i = 0; i < size.height; ++i) {
      const auto& w = vertical.weights[i];
      for (int xx = 0; xx < size.width; ++xx) {
        double acc = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k) {
          acc += w[k] * tmp.at(c, vertical.first[i] + static_cast<int>(k), xx);
        }
        out.at(c, i, xx) = acc;
      }
    }
  }
  return out;
}

ImageTensor load_image(const std::filesystem::path& path, ImageSize size) {
  if (size.width <= 0 || size.height <= 0) {
    throw ArgumentError("requested image size must be positive");
  }
  Tensor raw = resize_bilinear_antialiased(decode_rgb(path), size);
  for (double& v : raw.values()) v = std::clamp(v / 127.5 - 1.0, -1.0, 1.0);
  return ImageTensor(std::move(raw), RangeTag::kGen);
}

ImageTensor load_image(const std::filesystem::path& path) {
  Tensor raw = decode_rgb(path);
  for (double& v : raw.values()) v = v / 127.5 - 1.0;
  return ImageTensor(std::move(raw), RangeTag::kGen);
}

namespace {

cv::Mat to_bgr8(const ImageTensor& image) {
  if (image.range() != RangeTag::kGen) throw ArgumentError("save_image expects a GEN image");
  cv::Mat bgr(image.height(), image.width(), CV_8UC3);
  for (int y = 0; y < image.height(); ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < image.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = std::round((image.at(c, y, x) + 1.0) * 127.5);
        row[x][2 - c] = static_cast<unsigned char>(std::clamp(v, 0.0, 255.0));
      }
    }
  }
  return bgr;
}

}  // namespace

std::vector<unsigned char> encode_png(const ImageTensor& image) {
  std::vector<unsigned char> bytes;
  if (!cv::imencode(".png", to_bgr8(image), bytes)) throw IoError("PNG encoding failed");
  return bytes;
}

void save_image(const ImageTensor& image, const std::filesystem::path& path) {
  const Format format = format_for_extension(path);
  if (format == Format::kOther) {
    throw ArgumentError("unsupported output format (use .png, .jpg or .jpeg): " + path.string());
  }
  std::vector<unsigned char> bytes;
  const cv::Mat bgr = to_bgr8(image);
  const bool ok = format == Format::kPng
                      ? cv::imencode(".png", bgr, bytes)
                      : cv::imencode(".jpg", bgr, bytes, {cv::IMWRITE_JPEG_QUALITY, 95});
  if (!ok) throw IoError("image encoding failed: " + path.string());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write image file: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing image file: " + path.string());
}

double descriptor_range_slope(int channel) { return 0.5 / kDescriptorStd.at(channel); }

ImageTensor to_descriptor_range(const ImageTensor& image) {
  if (image.range() != RangeTag::kGen) {
    throw ArgumentError(std::string("to_descriptor_range expects GEN input, got ") +
                        to_string(image.range()));
  }
  Tensor out = image.tensor();
  for (int c = 0; c < 3; ++c) {
    for (double& v : out.channel(c)) {
      v = ((v + 1.0) * 0.5 - kDescriptorMean[c]) / kDescriptorStd[c];
    }
  }
  return ImageTensor(std::move(out), RangeTag::kDescriptor);
}

ImageTensor from_descriptor_range(const ImageTensor& image) {
  if (image.range() != RangeTag::kDescriptor) {
    throw ArgumentError("from_descriptor_range expects DESC input");
  }
  Tensor out = image.tensor();
  for (int c = 0; c < 3; ++c) {
    for (double& v : out.channel(c)) {
      v = std::clamp((v * kDescriptorStd[c] + kDescriptorMean[c]) * 2.0 - 1.0, -1.0, 1.0);
    }
  }
  return ImageTensor(std::move(out), RangeTag::kGen);
}

bool has_supported_signature(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::vector<unsigned char> head(8, 0);
  in.read(reinterpret_cast<char*>(head.data()), 8);
  head.resize(static_cast<std::size_t>(in.gcount()));
  return sniff(head) != Format::kOther;
}

}  // namespace biogan
