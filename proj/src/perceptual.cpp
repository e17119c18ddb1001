#include "biogan/perceptual.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

#include <Eigen/Core>
#include <openssl/evp.h>

#include "biogan/error.hpp"
#include "biogan/nn/ops.hpp"
#include "biogan/random.hpp"

namespace biogan {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;

constexpr char kMagic[8] = {'B', 'G', 'V', 'G', 'G', '1', '6', '\x01'};
constexpr std::array<int, FeatureDescriptor::kConvCount> kVggWidths = {
    64, 64, 128, 128, 256, 256, 256, 512, 512, 512, 512, 512, 512};
const nn::ConvGeometry kVggConv{3, 1, 1, nn::PadMode::kZero};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, double v) {
  put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

class Reader {
 public:
  Reader(const std::string& bytes, std::string source) : bytes_(bytes), source_(std::move(source)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
  void expect_magic() {
    need(sizeof kMagic);
    if (std::memcmp(bytes_.data(), kMagic, sizeof kMagic) != 0) {
      throw DescriptorError("not a descriptor weights file: " + source_);
    }
    pos_ += sizeof kMagic;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw DescriptorError("truncated descriptor weights file: " + source_);
  }
  const std::string& bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

std::string hint(const std::filesystem::path& path) {
  return "descriptor weights not found at '" + path.string() +
         "'. Export the pretrained VGG16 weights with tools/export_vgg16_weights.py "
         "(needs torchvision) and point descriptor_weights or $BIOGAN_DESCRIPTOR_WEIGHTS at "
         "the result.";
}

void check_same_layout(const GramMatrix& a, const GramMatrix& b, const char* what) {
  if (a.layer != b.layer) {
    throw ArgumentError(std::string(what) + ": Gram matrices come from different layers (" +
                        to_string(a.layer) + " vs " + to_string(b.layer) + ")");
  }
  if (a.n != b.n || a.values.size() != b.values.size()) {
    throw ArgumentError(std::string(what) + ": Gram dimensions differ");
  }
}

}  // namespace

const char* to_string(Tap tap) {
  switch (tap) {
    case Tap::kRelu1_1: return "relu1_1";
    case Tap::kRelu2_1: return "relu2_1";
    case Tap::kRelu3_1: return "relu3_1";
    case Tap::kRelu4_1: return "relu4_1";
    case Tap::kRelu4_2: return "relu4_2";
    case Tap::kRelu5_1: return "relu5_1";
  }
  return "?";
}

Tap parse_tap(const std::string& name) {
  std::string key;
  for (char c : name) key.push_back(c == '-' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  for (Tap t : {Tap::kRelu1_1, Tap::kRelu2_1, Tap::kRelu3_1, Tap::kRelu4_1, Tap::kRelu4_2,
                Tap::kRelu5_1}) {
    if (key == to_string(t)) return t;
  }
  throw ArgumentError("unknown descriptor tap '" + name + "'");
}

std::vector<Tap> parse_taps(const std::vector<std::string>& names) {
  std::vector<Tap> taps;
  for (const auto& n : names) taps.push_back(parse_tap(n));
  return taps;
}

FeatureDescriptor::FeatureDescriptor() : program_(program()) {}

std::vector<FeatureDescriptor::Step> FeatureDescriptor::program() {
  using Kind = Step::Kind;
  std::vector<Step> steps;
  // convs per block: 2, 2, 3, 3, 3
  const int per_block[] = {2, 2, 3, 3, 3};
  int conv = 0;
  for (int block = 0; block < 5; ++block) {
    for (int k = 0; k < per_block[block]; ++k) {
      steps.push_back({Kind::kConv, conv++});
      Step relu{Kind::kRelu};
      if (k == 0) {
        relu.has_tap = true;
        relu.tap = static_cast<Tap>(block < 4 ? block : 5);
      } else if (block == 3 && k == 1) {
        relu.has_tap = true;
        relu.tap = Tap::kRelu4_2;
      }
      steps.push_back(relu);
    }
    if (block < 4) steps.push_back({Kind::kPool});
  }
  return steps;
}

FeatureDescriptor FeatureDescriptor::load(const std::filesystem::path& path,
                                          const std::string& expected_sha256) {
  if (path.empty()) throw DescriptorError(hint("<unset>"));
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) throw DescriptorError(hint(path));
  if (!expected_sha256.empty()) {
    std::string expected = expected_sha256;
    std::transform(expected.begin(), expected.end(), expected.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    const std::string actual = sha256_file(path);
    if (actual != expected) {
      throw DescriptorError("descriptor weights checksum mismatch for '" + path.string() +
                            "': expected " + expected + ", found " + actual);
    }
  }
  std::ifstream in(path, std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader reader(bytes, path.string());
  reader.expect_magic();
  if (reader.u32() != kConvCount) throw DescriptorError("descriptor file must hold 13 convolutions");

  FeatureDescriptor d;
  int expected_in = 3;
  for (int i = 0; i < kConvCount; ++i) {
    const int out = static_cast<int>(reader.u32());
    const int in_ch = static_cast<int>(reader.u32());
    if (in_ch != expected_in || out <= 0) {
      throw DescriptorError("descriptor convolution " + std::to_string(i) + " has inconsistent shape");
    }
    std::vector<double> w(static_cast<std::size_t>(out) * in_ch * 9);
    for (double& v : w) v = reader.f32();
    std::vector<double> b(out);
    for (double& v : b) v = reader.f32();
    d.widths_.push_back(out);
    d.in_channels_.push_back(in_ch);
    d.weights_.push_back(std::move(w));
    d.biases_.push_back(std::move(b));
    expected_in = out;
  }
  if (!reader.at_end()) throw DescriptorError("trailing bytes in descriptor weights file");
  return d;
}

FeatureDescriptor FeatureDescriptor::synthetic(std::uint64_t seed, double width_multiplier) {
  if (!(width_multiplier > 0.0)) throw ArgumentError("width_multiplier must be positive");
  FeatureDescriptor d;
  Rng rng(derive_seed(seed, 3));
  int in = 3;
  for (int i = 0; i < kConvCount; ++i) {
    const int out = std::max(1, static_cast<int>(std::lround(kVggWidths[i] * width_multiplier)));
    const double std_dev = std::sqrt(2.0 / (in * 9.0));
    std::vector<double> w(static_cast<std::size_t>(out) * in * 9);
    // Rounded through float so a saved-and-reloaded copy is identical.
    for (double& v : w) v = static_cast<float>(std_dev * rng.normal());
    std::vector<double> b(out);
    for (double& v : b) v = static_cast<float>(0.01 * rng.normal());
    d.widths_.push_back(out);
    d.in_channels_.push_back(in);
    d.weights_.push_back(std::move(w));
    d.biases_.push_back(std::move(b));
    in = out;
  }
  return d;
}

void FeatureDescriptor::save(const std::filesystem::path& path) const {
  std::string out(kMagic, sizeof kMagic);
  put_u32(out, kConvCount);
  for (int i = 0; i < kConvCount; ++i) {
    put_u32(out, static_cast<std::uint32_t>(widths_[i]));
    put_u32(out, static_cast<std::uint32_t>(in_channels_[i]));
    for (double v : weights_[i]) put_f32(out, v);
    for (double v : biases_[i]) put_f32(out, v);
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot write descriptor weights: " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw IoError("failed writing descriptor weights: " + path.string());
}

int FeatureDescriptor::tap_channels(Tap tap) const {
  for (const Step& s : program_) {
    if (s.has_tap && s.tap == tap) {
      // The tap sits on the ReLU right after its convolution.
      const auto it = std::find_if(program_.begin(), program_.end(),
                                   [&](const Step& x) { return &x == &s; });
      return widths_[std::prev(it)->conv];
    }
  }
  throw ArgumentError("unknown tap");
}

std::size_t FeatureDescriptor::steps_for(std::span<const Tap> taps) const {
  std::size_t needed = 0;
  for (Tap t : taps) {
    bool found = false;
    for (std::size_t i = 0; i < program_.size(); ++i) {
      if (program_[i].has_tap && program_[i].tap == t) {
        needed = std::max(needed, i + 1);
        found = true;
      }
    }
    if (!found) throw ArgumentError(std::string("tap not available: ") + to_string(t));
  }
  return needed;
}

FeatureDescriptor::Trace FeatureDescriptor::forward(const Tensor& x,
                                                    std::span<const Tap> taps) const {
  if (x.channels() != 3) throw ShapeError("descriptor input must have 3 channels");
  Trace trace;
  trace.steps = steps_for(taps);
  trace.input_height = x.height();
  trace.input_width = x.width();
  trace.argmax.resize(trace.steps);
  Tensor h = x;
  for (std::size_t i = 0; i < trace.steps; ++i) {
    const Step& s = program_[i];
    trace.step_inputs.push_back(h);
    switch (s.kind) {
      case Step::Kind::kConv:
        h = nn::conv2d(h, weights_[s.conv], biases_[s.conv], widths_[s.conv], kVggConv);
        break;
      case Step::Kind::kRelu:
        h = nn::relu(h);
        break;
      case Step::Kind::kPool:
        if (h.height() < 2 || h.width() < 2) {
          throw ShapeError("descriptor input too small for the requested taps");
        }
        h = nn::max_pool2(h, &trace.argmax[i]);
        break;
    }
    if (s.has_tap) trace.taps[s.tap] = h;
  }
  return trace;
}

Tensor FeatureDescriptor::backward(const Trace& trace,
                                   const std::map<Tap, Tensor>& tap_grads) const {
  Tensor g;
  for (std::size_t i = trace.steps; i-- > 0;) {
    const Step& s = program_[i];
    if (s.has_tap) {
      if (auto it = tap_grads.find(s.tap); it != tap_grads.end()) {
        if (g.empty()) {
          g = it->second;
        } else {
          g += it->second;
        }
      }
    }
    if (g.empty()) continue;
    const Tensor& input = trace.step_inputs[i];
    switch (s.kind) {
      case Step::Kind::kConv:
        g = nn::conv2d_backward(input, weights_[s.conv], widths_[s.conv], kVggConv, g, {}, {}, true);
        break;
      case Step::Kind::kRelu:
        g = nn::relu_backward(input, g);
        break;
      case Step::Kind::kPool:
        g = nn::max_pool2_backward(g, trace.argmax[i], input.height(), input.width());
        break;
    }
  }
  if (g.empty()) g = Tensor(3, trace.input_height, trace.input_width);
  return g;
}

std::vector<FeatureActivations> FeatureDescriptor::extract(const ImageTensor& image,
                                                           std::span<const Tap> taps) const {
  if (image.range() != RangeTag::kDescriptor) {
    throw ArgumentError("extract_features expects a descriptor-range image");
  }
  const Trace trace = forward(image.tensor(), taps);
  std::vector<FeatureActivations> out;
  for (Tap t : taps) out.push_back({t, trace.taps.at(t)});
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file for hashing: " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

GramMatrix gram(const FeatureActivations& f) {
  const int n = f.n_maps();
  const auto m = static_cast<Eigen::Index>(f.map_size());
  ConstMap features(f.values.data(), n, m);
  RowMatrix g = RowMatrix::Zero(n, n);
  g.selfadjointView<Eigen::Lower>().rankUpdate(features);
  GramMatrix out{f.layer, n, f.map_size(), std::vector<double>(static_cast<std::size_t>(n) * n)};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      out.values[static_cast<std::size_t>(i) * n + j] = g(i, j);
      out.values[static_cast<std::size_t>(j) * n + i] = g(i, j);
    }
  }
  return out;
}

double style_layer_loss(const GramMatrix& g_out, const GramMatrix& g_target) {
  check_same_layout(g_out, g_target, "style_layer_loss");
  double sum = 0.0;
  for (std::size_t i = 0; i < g_out.values.size(); ++i) {
    const double d = g_out.values[i] - g_target.values[i];
    sum += d * d;
  }
  const double n = g_out.n;
  const double m = static_cast<double>(g_out.map_size);
  return sum / (4.0 * n * n * m * m);
}

double style_loss(std::span<const GramMatrix> out_grams, std::span<const GramMatrix> target_grams,
                  std::span<const double> weights) {
  if (out_grams.size() != target_grams.size() || out_grams.size() != weights.size()) {
    throw ArgumentError("style_loss: tap lists and weights must have equal length");
  }
  double total = 0.0;
  for (std::size_t l = 0; l < out_grams.size(); ++l) {
    if (out_grams[l].layer != target_grams[l].layer) {
      throw ArgumentError("style_loss: tap sets differ");
    }
    if (weights[l] == 0.0) continue;
    total += weights[l] * style_layer_loss(out_grams[l], target_grams[l]);
  }
  return total;
}

double content_loss(const GramMatrix& g_out, const GramMatrix& g_input, double weight) {
  if (g_out.layer != kContentTap || g_input.layer != kContentTap) {
    throw ArgumentError("content_loss expects Gram matrices from relu4_2");
  }
  check_same_layout(g_out, g_input, "content_loss");
  double sum = 0.0;
  for (std::size_t i = 0; i < g_out.values.size(); ++i) {
    const double d = g_out.values[i] - g_input.values[i];
    sum += d * d;
  }
  return weight / 2.0 * sum;
}

double content_feature_loss(const FeatureActivations& f_out, const FeatureActivations& f_input,
                            double weight) {
  if (f_out.layer != kContentTap || f_input.layer != kContentTap) {
    throw ArgumentError("content loss expects relu4_2 activations");
  }
  if (!f_out.values.same_shape(f_input.values)) throw ArgumentError("content activations differ in shape");
  double sum = 0.0;
  auto a = f_out.values.values();
  auto b = f_input.values.values();
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
  return weight / 2.0 * sum;
}

namespace {

// Returns scale * D F for a symmetric n x n matrix D.
Tensor gram_backward(const FeatureActivations& f, const std::vector<double>& diff, double scale) {
  const int n = f.n_maps();
  const auto m = static_cast<Eigen::Index>(f.map_size());
  ConstMap features(f.values.data(), n, m);
  ConstMap d(diff.data(), n, n);
  Tensor grad(f.values.channels(), f.values.height(), f.values.width());
  Eigen::Map<RowMatrix> out(grad.data(), n, m);
  out.noalias() = scale * (d * features);
  return grad;
}

std::vector<double> difference(const GramMatrix& a, const GramMatrix& b) {
  std::vector<double> d(a.values.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = a.values[i] - b.values[i];
  return d;
}

}  // namespace

Tensor style_layer_loss_grad(const FeatureActivations& f_out, const GramMatrix& g_out,
                             const GramMatrix& g_target) {
  check_same_layout(g_out, g_target, "style_layer_loss_grad");
  const double n = g_out.n;
  const double m = static_cast<double>(g_out.map_size);
  return gram_backward(f_out, difference(g_out, g_target), 1.0 / (n * n * m * m));
}

Tensor content_loss_grad(const FeatureActivations& f_out, const GramMatrix& g_out,
                         const GramMatrix& g_input, double weight) {
  check_same_layout(g_out, g_input, "content_loss_grad");
  return gram_backward(f_out, difference(g_out, g_input), 2.0 * weight);
}

Tensor content_feature_loss_grad(const FeatureActivations& f_out,
                                 const FeatureActivations& f_input, double weight) {
  Tensor g = f_out.values;
  auto a = g.values();
  auto b = f_input.values.values();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = weight * (a[i] - b[i]);
  return g;
}

PerceptualObjective::PerceptualObjective(const FeatureDescriptor& descriptor,
                                         std::vector<Tap> style_taps,
                                         std::array<double, 5> style_weights,
                                         ContentMode content_mode, double content_weight)
    : descriptor_(&descriptor),
      style_taps_(std::move(style_taps)),
      style_weights_(style_weights),
      content_mode_(content_mode),
      content_weight_(content_weight) {
  if (style_taps_.size() != style_weights_.size()) {
    throw ArgumentError("style taps and style weights must have equal length");
  }
}

void PerceptualObjective::set_style_reference(const ImageTensor& style) {
  const auto feats = descriptor_->extract(to_descriptor_range(style), style_taps_);
  style_targets_.clear();
  for (const auto& f : feats) style_targets_.push_back(gram(f));
  has_style_ = true;
}

void PerceptualObjective::set_content_source(const ImageTensor& input) {
  const Tap tap[] = {kContentTap};
  content_features_ = descriptor_->extract(to_descriptor_range(input), tap).front();
  content_gram_ = gram(content_features_);
  has_content_ = true;
}

PerceptualTerms PerceptualObjective::evaluate(const Tensor& generated) const {
  return run(generated, false);
}

PerceptualTerms PerceptualObjective::evaluate_with_grad(const Tensor& generated) const {
  return run(generated, true);
}

PerceptualTerms PerceptualObjective::run(const Tensor& generated, bool with_grad) const {
  if (!has_style_ || !has_content_) {
    throw ArgumentError("perceptual objective needs a style reference and a content source");
  }
  // GEN -> descriptor range, channel-wise affine.
  Tensor x = generated;
  for (int c = 0; c < 3; ++c) {
    for (double& v : x.channel(c)) {
      v = ((v + 1.0) * 0.5 - kDescriptorMean[c]) / kDescriptorStd[c];
    }
  }
  std::vector<Tap> taps = style_taps_;
  taps.push_back(kContentTap);
  const FeatureDescriptor::Trace trace = descriptor_->forward(x, taps);

  PerceptualTerms terms;
  std::map<Tap, Tensor> style_grads;
  for (std::size_t l = 0; l < style_taps_.size(); ++l) {
    const FeatureActivations f{style_taps_[l], trace.taps.at(style_taps_[l])};
    const GramMatrix g = gram(f);
    const double w = style_weights_[l];
    terms.style += w * style_layer_loss(g, style_targets_[l]);
    if (with_grad && w != 0.0) {
      Tensor grad = style_layer_loss_grad(f, g, style_targets_[l]);
      grad *= w;
      if (auto it = style_grads.find(f.layer); it != style_grads.end()) {
        it->second += grad;
      } else {
        style_grads.emplace(f.layer, std::move(grad));
      }
    }
  }

  const FeatureActivations content{kContentTap, trace.taps.at(kContentTap)};
  Tensor content_tap_grad;
  if (content_mode_ == ContentMode::kGram) {
    const GramMatrix g = gram(content);
    terms.content = content_loss(g, content_gram_, content_weight_);
    if (with_grad) content_tap_grad = content_loss_grad(content, g, content_gram_, content_weight_);
  } else {
    terms.content = content_feature_loss(content, content_features_, content_weight_);
    if (with_grad) content_tap_grad = content_feature_loss_grad(content, content_features_, content_weight_);
  }

  if (with_grad) {
    auto to_gen = [](Tensor g) {
      for (int c = 0; c < 3; ++c) {
        const double slope = descriptor_range_slope(c);
        for (double& v : g.channel(c)) v *= slope;
      }
      return g;
    };
    terms.style_grad = to_gen(descriptor_->backward(trace, style_grads));
    std::map<Tap, Tensor> content_grads;
    content_grads.emplace(kContentTap, std::move(content_tap_grad));
    terms.content_grad = to_gen(descriptor_->backward(trace, content_grads));
  }
  return terms;
}

}  // namespace biogan
