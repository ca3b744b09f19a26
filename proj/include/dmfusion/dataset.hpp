#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dmfusion/geometry.hpp"
#include "dmfusion/io.hpp"

namespace dmfusion {

// Plain-text dataset description:
//
//   units meters            # or millimeters; applies to pose translations
//   intrinsics fx fy cx cy width height
//   poses poses.txt
//   view 0 depth_000.pgm [color_000.ppm]
//   view 1 depth_001.dpf
//
// Relative paths resolve against the manifest's directory. Every view needs a
// pose entry with the same id.
struct ManifestView {
  ViewId view = 0;
  fs::path depth;
  std::optional<fs::path> color;
};

struct DatasetManifest {
  Intrinsics intrinsics;
  double translation_scale = 1.0;  // to meters
  fs::path poses;
  std::vector<ManifestView> views;
};

DatasetManifest parse_manifest(std::istream& in, const std::string& name, const fs::path& base_dir);
DatasetManifest read_manifest(const fs::path& path);

// Paths are written as given.
void write_manifest(const fs::path& path, const DatasetManifest& m);

// Loads every depth raster, color image and pose. Missing files raise
// InputError naming the path; sizes that disagree with the intrinsics raise
// ConfigError. Pass `poses_override` to substitute another pose file.
std::vector<DepthMap> load_dataset(const DatasetManifest& m, const std::optional<fs::path>& poses_override = {});

}  // namespace dmfusion
