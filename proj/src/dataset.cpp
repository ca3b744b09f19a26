#include "dmfusion/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace dmfusion {

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw InputError("missing file '" + p.string() + "'");
}

}  // namespace

DatasetManifest parse_manifest(std::istream& in, const std::string& name, const fs::path& base_dir) {
  DatasetManifest m;
  bool have_intrinsics = false;
  std::set<ViewId> ids;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string kw;
    if (!(ls >> kw)) continue;
    const std::string where = name + ":" + std::to_string(lineno) + ": ";
    std::string extra;
    if (kw == "units") {
      std::string u;
      ls >> u;
      if (u == "meters") m.translation_scale = 1.0;
      else if (u == "millimeters") m.translation_scale = 1e-3;
      else throw FormatError(where + "units must be meters or millimeters");
    } else if (kw == "intrinsics") {
      Intrinsics& k = m.intrinsics;
      if (!(ls >> k.fx >> k.fy >> k.cx >> k.cy >> k.width >> k.height))
        throw FormatError(where + "intrinsics needs fx fy cx cy width height");
      if (!k.valid()) throw ConfigError(where + "invalid intrinsics");
      have_intrinsics = true;
    } else if (kw == "poses") {
      std::string p;
      if (!(ls >> p)) throw FormatError(where + "poses needs a path");
      m.poses = resolve(base_dir, p);
    } else if (kw == "view") {
      long long id = -1;
      std::string depth, color;
      if (!(ls >> id >> depth) || id < 0 || id > 0xffffffffLL) throw FormatError(where + "view needs an id and a depth path");
      ManifestView v{static_cast<ViewId>(id), resolve(base_dir, depth), std::nullopt};
      if (ls >> color) v.color = resolve(base_dir, color);
      if (!ids.insert(v.view).second) throw FormatError(where + "duplicate view id " + std::to_string(id));
      m.views.push_back(v);
    } else {
      throw FormatError(where + "unknown directive '" + kw + "'");
    }
    if (ls >> extra) throw FormatError(where + "unexpected trailing token '" + extra + "'");
  }
  if (!have_intrinsics) throw FormatError(name + ": missing intrinsics line");
  if (m.poses.empty()) throw FormatError(name + ": missing poses line");
  if (m.views.empty()) throw FormatError(name + ": no views listed");
  return m;
}

DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open manifest '" + path.string() + "'");
  return parse_manifest(in, path.string(), path.parent_path());
}

void write_manifest(const fs::path& path, const DatasetManifest& m) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  const Intrinsics& k = m.intrinsics;
  char buf[256];
  std::snprintf(buf, sizeof buf, "intrinsics %.17g %.17g %.17g %.17g %d %d\n", k.fx, k.fy, k.cx, k.cy, k.width,
                k.height);
  out << "units " << (m.translation_scale == 1.0 ? "meters" : "millimeters") << '\n' << buf;
  out << "poses " << m.poses.generic_string() << '\n';
  for (const auto& v : m.views) {
    out << "view " << v.view << ' ' << v.depth.generic_string();
    if (v.color) out << ' ' << v.color->generic_string();
    out << '\n';
  }
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

std::vector<DepthMap> load_dataset(const DatasetManifest& m, const std::optional<fs::path>& poses_override) {
  const fs::path pose_path = poses_override.value_or(m.poses);
  require_file(pose_path);
  for (const auto& v : m.views) {
    require_file(v.depth);
    if (v.color) require_file(*v.color);
  }
  std::map<ViewId, Pose> poses;
  for (const auto& e : read_poses(pose_path)) poses[e.view] = e.pose;

  std::vector<DepthMap> maps;
  maps.reserve(m.views.size());
  for (const auto& v : m.views) {
    auto it = poses.find(v.view);
    if (it == poses.end())
      throw InputError("'" + pose_path.string() + "' has no pose for view " + std::to_string(v.view));
    DepthMap dm;
    dm.view = v.view;
    dm.depths = read_depth_file(v.depth);
    dm.intrinsics = m.intrinsics;
    dm.pose = it->second;
    dm.pose.translation *= m.translation_scale;
    if (dm.width() != m.intrinsics.width || dm.height() != m.intrinsics.height)
      throw ConfigError("'" + v.depth.string() + "' is " + std::to_string(dm.width()) + "x" +
                        std::to_string(dm.height()) + " but the intrinsics say " +
                        std::to_string(m.intrinsics.width) + "x" + std::to_string(m.intrinsics.height));
    if (v.color) dm.color = read_color_ppm(*v.color, dm.width(), dm.height());
    maps.push_back(std::move(dm));
  }
  return maps;
}

}  // namespace dmfusion
