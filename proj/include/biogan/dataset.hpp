#pragma once

#include <filesystem>
#include <vector>

namespace biogan {

/// Two independent image collections with no pairing between them.
struct UnpairedDataset {
  std::vector<std::filesystem::path> source_images;  // domain X
  std::vector<std::filesystem::path> target_images;  // domain Y
};

/// Lists the PNG/JPEG files of each directory in lexicographic filename order.
/// Throws DatasetError when a directory is missing or holds no usable image.
UnpairedDataset load_dataset(const std::filesystem::path& source_dir,
                             const std::filesystem::path& target_dir);

/// Image files of one directory, sorted by filename.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

}  // namespace biogan
