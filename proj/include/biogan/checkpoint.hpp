#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "biogan/config.hpp"
#include "biogan/discriminator.hpp"
#include "biogan/generators.hpp"

namespace biogan {

/// Everything restored from a checkpoint file.
struct Checkpoint {
  int epoch = 0;
  Generator generator;
  Discriminator discriminator;
  /// config_entries() of the run that wrote the file.
  std::vector<std::pair<std::string, std::string>> config;
};

/// Writes the generator and discriminator parameters (including batch-norm
/// running statistics) atomically: temp file in the same directory, then
/// rename.
void save_checkpoint(const std::filesystem::path& path, int epoch, const Generator& g,
                     const Discriminator& d, const TrainingConfig& config);

/// Rebuilds both networks from the stored specs and seeds and loads their
/// values. Any disagreement between the header and the rebuilt networks
/// raises CheckpointError listing the differing fields.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// As above, but also requires the stored generator spec to equal `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const GeneratorSpec& expected);

/// Writes `bytes` to `path` via a temp file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

}  // namespace biogan
