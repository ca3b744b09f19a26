#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "dmfusion/io.hpp"

namespace dmfusion {

namespace {

std::string where(const std::string& name, int line) { return name + ":" + std::to_string(line) + ": "; }

// Splits a line into doubles; returns false on a token that is not a number.
bool numbers(std::istringstream& ls, std::vector<double>& out) {
  std::string tok;
  while (ls >> tok) {
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) return false;
      out.push_back(v);
    } catch (const std::exception&) {
      return false;
    }
  }
  return true;
}

bool skippable(const std::string& line) {
  const auto p = line.find_first_not_of(" \t\r");
  return p == std::string::npos || line[p] == '#';
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<PoseEntry> parse_poses(std::istream& in, const std::string& name) {
  std::vector<PoseEntry> out;
  std::set<ViewId> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skippable(line)) continue;
    std::istringstream ls(line);
    long long id = -1;
    if (!(ls >> id) || id < 0 || id > 0xffffffffLL) throw FormatError(where(name, lineno) + "expected a view id");
    std::vector<double> v;
    if (!numbers(ls, v)) throw FormatError(where(name, lineno) + "non-numeric pose value");
    if (v.size() != 12)
      throw FormatError(where(name, lineno) + "expected 12 values after the id, found " + std::to_string(v.size()));
    Mat3 r;
    Vec3 t;
    for (int row = 0; row < 3; ++row) {
      for (int c = 0; c < 3; ++c) r(row, c) = v[4 * row + c];
      t[row] = v[4 * row + 3];
    }
    const double err = orthonormality_error(r);
    if (!(err < 1e-4) || !(r.determinant() > 0)) {
      throw FormatError(where(name, lineno) + "rotation is not orthonormal (|R^T R - I| = " + std::to_string(err) +
                        ")");
    }
    if (err > 1e-12) r = project_to_rotation(r);
    const auto vid = static_cast<ViewId>(id);
    if (!seen.insert(vid).second) throw FormatError(where(name, lineno) + "duplicate view id " + std::to_string(id));
    out.push_back({vid, Pose{r, t}});
  }
  return out;
}

std::vector<PoseEntry> read_poses(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  return parse_poses(in, path.string());
}

void write_poses(std::ostream& out, const std::vector<PoseEntry>& poses) {
  out << "# id r11 r12 r13 t1 r21 r22 r23 t2 r31 r32 r33 t3 (camera-from-world: D = R X + t, meters)\n";
  for (const auto& e : poses) {
    out << e.view;
    for (int row = 0; row < 3; ++row) {
      for (int c = 0; c < 3; ++c) out << ' ' << fmt17(e.pose.rotation(row, c));
      out << ' ' << fmt17(e.pose.translation[row]);
    }
    out << '\n';
  }
}

void write_poses(const fs::path& path, const std::vector<PoseEntry>& poses) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  write_poses(out, poses);
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

GroundTruthPlanes parse_ground_truth(std::istream& in, const std::string& name) {
  GroundTruthPlanes gt;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skippable(line)) continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    std::vector<double> v;
    if (!numbers(ls, v)) throw FormatError(where(name, lineno) + "non-numeric value");
    if (kind == "plane") {
      if (v.size() != 4) throw FormatError(where(name, lineno) + "plane needs nx ny nz d");
      GroundTruthPlane p;
      p.normal = Vec3(v[0], v[1], v[2]);
      const double len = p.normal.norm();
      if (!(len > 0)) throw FormatError(where(name, lineno) + "zero plane normal");
      p.normal /= len;
      p.offset = v[3] / len;
      gt.planes.push_back(p);
    } else if (kind == "rect") {
      if (v.size() != 11) throw FormatError(where(name, lineno) + "rect needs ox oy oz ux uy uz vx vy vz lu lv");
      PlanePatch patch{Vec3(v[0], v[1], v[2]), Vec3(v[3], v[4], v[5]).normalized(),
                       Vec3(v[6], v[7], v[8]).normalized(), v[9], v[10]};
      if (std::abs(patch.axis_u.dot(patch.axis_v)) > 1e-9 || !(patch.extent_u > 0) || !(patch.extent_v > 0))
        throw FormatError(where(name, lineno) + "rect axes must be orthogonal with positive extents");
      gt.planes.push_back(GroundTruthPlane::from_patch(patch));
    } else {
      throw FormatError(where(name, lineno) + "unknown entry '" + kind + "'");
    }
  }
  gt.validate();
  return gt;
}

GroundTruthPlanes read_ground_truth(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  return parse_ground_truth(in, path.string());
}

void write_ground_truth(const fs::path& path, const GroundTruthPlanes& gt) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << "# plane nx ny nz d | rect ox oy oz ux uy uz vx vy vz lu lv\n";
  for (const auto& p : gt.planes) {
    if (p.extent) {
      const auto& e = *p.extent;
      out << "rect";
      for (const Vec3* v : {&e.origin, &e.axis_u, &e.axis_v})
        for (int i = 0; i < 3; ++i) out << ' ' << fmt17((*v)[i]);
      out << ' ' << fmt17(e.extent_u) << ' ' << fmt17(e.extent_v) << '\n';
    } else {
      out << "plane " << fmt17(p.normal.x()) << ' ' << fmt17(p.normal.y()) << ' ' << fmt17(p.normal.z()) << ' '
          << fmt17(p.offset) << '\n';
    }
  }
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace dmfusion
