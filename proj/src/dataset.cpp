#include "biogan/dataset.hpp"

#include <algorithm>

#include "biogan/error.hpp"
#include "biogan/image.hpp"

namespace biogan {

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw DatasetError("not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && has_supported_signature(entry.path())) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) {
    return a.filename().string() < b.filename().string();
  });
  return files;
}

UnpairedDataset load_dataset(const std::filesystem::path& source_dir,
                             const std::filesystem::path& target_dir) {
  UnpairedDataset dataset{list_images(source_dir), list_images(target_dir)};
  if (dataset.source_images.empty()) {
    throw DatasetError("source directory contains no PNG/JPEG images: " + source_dir.string());
  }
  if (dataset.target_images.empty()) {
    throw DatasetError("target directory contains no PNG/JPEG images: " + target_dir.string());
  }
  return dataset;
}

}  // namespace biogan
