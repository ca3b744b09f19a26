#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dmfusion/evalkit.hpp"
#include "dmfusion/fusion.hpp"
#include "dmfusion/geometry.hpp"

namespace dmfusion {

namespace fs = std::filesystem;

// ---- depth rasters -------------------------------------------------------
//
// Two encodings are understood:
//  * binary PGM ("P5"), 16-bit big-endian samples in millimeters, 0 = invalid
//    (maxval < 256 is read as 8-bit, also millimeters);
//  * DPF1: "DPF1", u16 width, u16 height (little-endian), then width*height
//    little-endian float32 meters, NaN = invalid.
// Readers reject truncated or trailing data and report the byte offset.

DepthImage read_depth_file(const fs::path& path);
DepthImage parse_depth(const std::string& bytes, const std::string& name);
void write_depth_pgm(const fs::path& path, const DepthImage& depths);
void write_depth_dpf(const fs::path& path, const DepthImage& depths);

// Binary 8-bit PPM ("P6"). Returns row-major pixels.
std::vector<Rgb> read_color_ppm(const fs::path& path, int expected_width, int expected_height);

// ---- poses ---------------------------------------------------------------
//
// One view per line: `id r11 r12 r13 t1 r21 r22 r23 t2 r31 r32 r33 t3`, the
// camera-from-world transform (D = R X + t) in row-major order. Blank lines
// and lines starting with '#' are skipped.

struct PoseEntry {
  ViewId view = 0;
  Pose pose;
};

// Rotations whose orthonormality error is below 1e-4 are projected onto the
// nearest rotation; anything worse is a FormatError naming the line.
std::vector<PoseEntry> parse_poses(std::istream& in, const std::string& name);
std::vector<PoseEntry> read_poses(const fs::path& path);
void write_poses(std::ostream& out, const std::vector<PoseEntry>& poses);
void write_poses(const fs::path& path, const std::vector<PoseEntry>& poses);

// ---- PLY -----------------------------------------------------------------

struct PlyVertex {
  Eigen::Vector3f position = Eigen::Vector3f::Zero();
  Eigen::Vector3f normal = Eigen::Vector3f::Zero();
  Rgb color{0, 0, 0};
  std::uint32_t merges = 0;
  std::uint32_t violations = 0;
};

struct PlyCloud {
  std::vector<PlyVertex> vertices;
  bool has_normals = false;
  bool has_color = false;
  bool has_counters = false;
};

// x,y,z,nx,ny,nz float; red,green,blue uchar when any point carries color;
// merges, violations uint.
void write_ply(std::ostream& out, const FusedCloud& cloud, bool binary);
void write_ply(const fs::path& path, const FusedCloud& cloud, bool binary);

// Reads the vertex element of an ascii or binary PLY. Other elements are
// skipped; missing optional properties are reported through the has_* flags.
PlyCloud parse_ply(const std::string& bytes, const std::string& name);
PlyCloud read_ply(const fs::path& path);

// ---- ground-truth planes --------------------------------------------------
//
//   plane nx ny nz d                         (n . x = d, unbounded)
//   rect ox oy oz ux uy uz vx vy vz lu lv    (bounded, normal u x v)

GroundTruthPlanes parse_ground_truth(std::istream& in, const std::string& name);
GroundTruthPlanes read_ground_truth(const fs::path& path);
void write_ground_truth(const fs::path& path, const GroundTruthPlanes& gt);

std::string read_file_bytes(const fs::path& path);

}  // namespace dmfusion
