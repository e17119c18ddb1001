#include "biogan/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "biogan/error.hpp"

namespace biogan {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) parts.push_back(trim(item));
  return parts;
}

double parse_real(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size()) {
    throw UsageError("config key '" + key + "': expected a number, got '" + value + "'");
  }
  return v;
}

long long parse_integer(const std::string& key, const std::string& value) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw UsageError("config key '" + key + "': expected an integer, got '" + value + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw UsageError("config key '" + key + "': expected true/false, got '" + value + "'");
}

// Shortest text that parses back to the same double.
std::string format_real(double v) {
  char buf[64];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

std::string join_reals(const std::array<double, 5>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += format_real(values[i]);
  }
  return out;
}

std::string join(const std::vector<std::string>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += values[i];
  }
  return out;
}

}  // namespace

const char* to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::kResNet: return "resnet";
    case GeneratorKind::kUNetStride2: return "unet_s2";
    case GeneratorKind::kUNetStride1: return "unet_s1";
  }
  return "?";
}

GeneratorKind parse_generator_kind(const std::string& text) {
  if (text == "resnet") return GeneratorKind::kResNet;
  if (text == "unet_s2") return GeneratorKind::kUNetStride2;
  if (text == "unet_s1") return GeneratorKind::kUNetStride1;
  throw ArgumentError("unsupported generator kind '" + text + "' (resnet, unet_s2, unet_s1)");
}

void TrainingConfig::validate() const {
  auto check_lambda = [](const char* name, double v) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ArgumentError(std::string(name) + " must be finite and non-negative");
    }
  };
  check_lambda("lambda_adv", lambda_adv);
  check_lambda("lambda_style", lambda_style);
  check_lambda("lambda_content", lambda_content);
  check_lambda("content_layer_weight", content_layer_weight);
  for (double w : style_layer_weights) check_lambda("style_layer_weights", w);
  if (epochs < 0) throw ArgumentError("epochs must be >= 0");
  if (image_size.width < 1 || image_size.height < 1) {
    throw ArgumentError("image_size must be positive");
  }
  if (inner_iterations < 1) throw ArgumentError("inner_iterations must be >= 1");
  if (checkpoint_every < 1) throw ArgumentError("checkpoint_every must be >= 1");
  if (!(width_multiplier > 0.0) || !std::isfinite(width_multiplier)) {
    throw ArgumentError("width_multiplier must be positive");
  }
  if (!(learning_rate > 0.0)) throw ArgumentError("learning_rate must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw ArgumentError("beta1/beta2 must lie in [0, 1)");
  }
  if (style_taps.size() != style_layer_weights.size()) {
    throw ArgumentError("style_taps must list exactly five layers");
  }
}

void apply_setting(TrainingConfig& c, const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "lambda_adv") {
    c.lambda_adv = parse_real(key, value);
  } else if (key == "lambda_style") {
    c.lambda_style = parse_real(key, value);
  } else if (key == "lambda_content") {
    c.lambda_content = parse_real(key, value);
  } else if (key == "style_layer_weights") {
    const auto parts = split(value, ',');
    if (parts.size() != 5) throw UsageError("config key 'style_layer_weights': need 5 values");
    for (std::size_t i = 0; i < 5; ++i) c.style_layer_weights[i] = parse_real(key, parts[i]);
  } else if (key == "content_layer_weight") {
    c.content_layer_weight = parse_real(key, value);
  } else if (key == "epochs") {
    c.epochs = static_cast<int>(parse_integer(key, value));
  } else if (key == "image_size") {
    const auto x = value.find('x');
    if (x == std::string::npos) throw UsageError("config key 'image_size': expected WxH");
    c.image_size.width = static_cast<int>(parse_integer(key, value.substr(0, x)));
    c.image_size.height = static_cast<int>(parse_integer(key, value.substr(x + 1)));
  } else if (key == "generator") {
    try {
      c.generator = parse_generator_kind(value);
    } catch (const ArgumentError& e) {
      throw UsageError(std::string("config key 'generator': ") + e.what());
    }
  } else if (key == "style_reference") {
    if (value == "per_epoch_random") {
      c.style_reference = StyleReferenceStrategy::per_epoch_random();
    } else if (value.rfind("fixed:", 0) == 0) {
      const long long i = parse_integer(key, value.substr(6));
      if (i < 0) throw UsageError("config key 'style_reference': negative index");
      c.style_reference = StyleReferenceStrategy::fixed(static_cast<std::size_t>(i));
    } else {
      throw UsageError("config key 'style_reference': expected fixed:<i> or per_epoch_random");
    }
  } else if (key == "style_taps") {
    c.style_taps = split(value, ',');
  } else if (key == "content_mode") {
    if (value == "gram") {
      c.content_mode = ContentMode::kGram;
    } else if (value == "feature_map") {
      c.content_mode = ContentMode::kFeatureMap;
    } else {
      throw UsageError("config key 'content_mode': expected gram or feature_map");
    }
  } else if (key == "learning_rate") {
    c.learning_rate = parse_real(key, value);
  } else if (key == "beta1") {
    c.beta1 = parse_real(key, value);
  } else if (key == "beta2") {
    c.beta2 = parse_real(key, value);
  } else if (key == "inner_iterations") {
    c.inner_iterations = static_cast<int>(parse_integer(key, value));
  } else if (key == "checkpoint_every") {
    c.checkpoint_every = static_cast<int>(parse_integer(key, value));
  } else if (key == "width_multiplier") {
    c.width_multiplier = parse_real(key, value);
  } else if (key == "unet_dropout") {
    c.unet_dropout = parse_bool(key, value);
  } else if (key == "seed") {
    const long long s = parse_integer(key, value);
    if (s < 0) throw UsageError("config key 'seed': must be non-negative");
    c.seed = static_cast<std::uint64_t>(s);
  } else if (key == "descriptor_weights") {
    c.descriptor_weights = value;
  } else if (key == "descriptor_sha256") {
    c.descriptor_sha256 = value;
  } else if (key == "source_dir") {
    c.source_dir = value;
  } else if (key == "target_dir") {
    c.target_dir = value;
  } else {
    throw UsageError("unknown config key '" + key + "'");
  }
}

TrainingConfig parse_config(const std::string& text, TrainingConfig base) {
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(number) + ": expected key = value");
    }
    apply_setting(base, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return base;
}

TrainingConfig load_config(const std::filesystem::path& path, TrainingConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), std::move(base));
}

void apply_override(TrainingConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw UsageError("override '" + assignment + "' is not of the form key=value");
  }
  apply_setting(config, trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

std::vector<std::pair<std::string, std::string>> config_entries(const TrainingConfig& c) {
  std::string style_reference = c.style_reference.kind == StyleReferenceStrategy::Kind::kFixedIndex
                                    ? "fixed:" + std::to_string(c.style_reference.index)
                                    : "per_epoch_random";
  return {
      {"lambda_adv", format_real(c.lambda_adv)},
      {"lambda_style", format_real(c.lambda_style)},
      {"lambda_content", format_real(c.lambda_content)},
      {"style_layer_weights", join_reals(c.style_layer_weights)},
      {"content_layer_weight", format_real(c.content_layer_weight)},
      {"epochs", std::to_string(c.epochs)},
      {"image_size", std::to_string(c.image_size.width) + "x" + std::to_string(c.image_size.height)},
      {"generator", to_string(c.generator)},
      {"style_reference", style_reference},
      {"style_taps", join(c.style_taps)},
      {"content_mode", c.content_mode == ContentMode::kGram ? "gram" : "feature_map"},
      {"learning_rate", format_real(c.learning_rate)},
      {"beta1", format_real(c.beta1)},
      {"beta2", format_real(c.beta2)},
      {"inner_iterations", std::to_string(c.inner_iterations)},
      {"checkpoint_every", std::to_string(c.checkpoint_every)},
      {"width_multiplier", format_real(c.width_multiplier)},
      {"unet_dropout", c.unet_dropout ? "true" : "false"},
      {"seed", std::to_string(c.seed)},
      {"descriptor_weights", c.descriptor_weights.string()},
      {"descriptor_sha256", c.descriptor_sha256},
      {"source_dir", c.source_dir.string()},
      {"target_dir", c.target_dir.string()},
  };
}

std::string format_config(const TrainingConfig& config) {
  std::string out;
  for (const auto& [key, value] : config_entries(config)) {
    out += key + " = " + value + "\n";
  }
  return out;
}

void apply_environment(TrainingConfig& config) {
  if (const char* path = std::getenv(kDescriptorEnvVar); path && *path) {
    config.descriptor_weights = path;
  }
}

}  // namespace biogan
