#include "dmfusion/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>

namespace dmfusion {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
}

int to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const int i = std::stoi(v, &used);
    if (used == v.size()) return i;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

constexpr double kDeg = std::numbers::pi / 180.0;

using Setter = std::function<void(ToolConfig&, const std::string& key, const std::string& value,
                                  const std::filesystem::path& base)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"noise.lambda1", [](ToolConfig& c, auto& k, auto& v, auto&) { c.pipeline.noise.lambda1 = to_double(k, v); }},
      {"noise.lambda2", [](ToolConfig& c, auto& k, auto& v, auto&) { c.pipeline.noise.lambda2 = to_double(k, v); }},
      {"noise.beta_x", [](ToolConfig& c, auto& k, auto& v, auto&) { c.pipeline.noise.beta_x = to_double(k, v); }},
      {"noise.beta_y", [](ToolConfig& c, auto& k, auto& v, auto&) { c.pipeline.noise.beta_y = to_double(k, v); }},
      {"noise.alpha2", [](ToolConfig& c, auto& k, auto& v, auto&) { c.pipeline.noise.alpha2 = to_double(k, v); }},
      {"noise.alpha1", [](ToolConfig& c, auto& k, auto& v, auto&) { c.pipeline.noise.alpha1 = to_double(k, v); }},
      {"noise.alpha0", [](ToolConfig& c, auto& k, auto& v, auto&) { c.pipeline.noise.alpha0 = to_double(k, v); }},
      {"filter.gamma", [](ToolConfig& c, auto& k, auto& v, auto&) { c.pipeline.filter.gamma = to_double(k, v); }},
      {"filter.k", [](ToolConfig& c, auto& k, auto& v, auto&) { c.pipeline.filter.k = to_int(k, v); }},
      {"merge.gate", [](ToolConfig& c, auto& k, auto& v, auto&) { c.pipeline.merge.gate = to_double(k, v); }},
      {"merge.depth_ratio",
       [](ToolConfig& c, auto& k, auto& v, auto&) { c.pipeline.merge.depth_ratio = to_double(k, v); }},
      {"merge.candidate_radius_sigma",
       [](ToolConfig& c, auto& k, auto& v, auto&) { c.pipeline.merge.candidate_radius_sigma = to_double(k, v); }},
      {"merge.visibility_on_merge",
       [](ToolConfig& c, auto& k, auto& v, auto&) { c.pipeline.merge.visibility_on_merge = to_bool(k, v); }},
      {"icp.max_iterations",
       [](ToolConfig& c, auto& k, auto& v, auto&) { c.pipeline.icp.max_iterations = to_int(k, v); }},
      {"icp.max_correspondence_dist",
       [](ToolConfig& c, auto& k, auto& v, auto&) {
         if (v == "auto") {
           c.pipeline.auto_correspondence_dist = true;
         } else {
           c.pipeline.auto_correspondence_dist = false;
           c.pipeline.icp.max_correspondence_dist = to_double(k, v);
         }
       }},
      {"icp.convergence_eps",
       [](ToolConfig& c, auto& k, auto& v, auto&) { c.pipeline.icp.convergence_eps = to_double(k, v); }},
      {"icp.variant",
       [](ToolConfig& c, auto& k, auto& v, auto&) {
         if (v == "point_to_plane") c.pipeline.icp.variant = IcpVariant::point_to_plane;
         else if (v == "point_to_point") c.pipeline.icp.variant = IcpVariant::point_to_point;
         else throw ConfigError("config key '" + k + "': expected point_to_plane or point_to_point");
       }},
      {"icp.exclude_own_unmerged",
       [](ToolConfig& c, auto& k, auto& v, auto&) { c.pipeline.exclude_own_unmerged = to_bool(k, v); }},
      {"icp.trim_fraction",
       [](ToolConfig& c, auto& k, auto& v, auto&) { c.pipeline.icp.trim_fraction = to_double(k, v); }},
      {"icp.min_matched_fraction",
       [](ToolConfig& c, auto& k, auto& v, auto&) { c.pipeline.icp.min_matched_fraction = to_double(k, v); }},
      {"pipeline.outer_iterations",
       [](ToolConfig& c, auto& k, auto& v, auto&) { c.pipeline.outer_iterations = to_int(k, v); }},
      {"pipeline.convergence_rotation_deg",
       [](ToolConfig& c, auto& k, auto& v, auto&) { c.pipeline.convergence_rotation = to_double(k, v) * kDeg; }},
      {"pipeline.convergence_translation_mm",
       [](ToolConfig& c, auto& k, auto& v, auto&) { c.pipeline.convergence_translation = to_double(k, v) * 1e-3; }},
      {"pipeline.emit_intermediate",
       [](ToolConfig& c, auto& k, auto& v, auto&) { c.pipeline.emit_intermediate = to_bool(k, v); }},
      {"pipeline.anchor_first_view",
       [](ToolConfig& c, auto& k, auto& v, auto&) { c.pipeline.anchor_first_view = to_bool(k, v); }},
      {"pipeline.index_cell_size",
       [](ToolConfig& c, auto& k, auto& v, auto&) { c.pipeline.index_cell_size = to_double(k, v); }},
      {"pipeline.depth_min",
       [](ToolConfig& c, auto& k, auto& v, auto&) { c.pipeline.depth_range.min = to_double(k, v); }},
      {"pipeline.depth_max",
       [](ToolConfig& c, auto& k, auto& v, auto&) { c.pipeline.depth_range.max = to_double(k, v); }},
      {"dataset.manifest",
       [](ToolConfig& c, auto&, auto& v, auto& base) {
         std::filesystem::path p(v);
         c.manifest = p.is_absolute() ? p : base / p;
       }},
  };
  return table;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

ConfigFile parse_config(std::istream& in, const std::string& name) {
  ConfigFile cfg;
  std::string section, line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = name + ":" + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + "empty key");
    cfg.values[section.empty() ? key : section + "." + key] = value;
  }
  return cfg;
}

ConfigFile load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config '" + path.string() + "'");
  ConfigFile cfg = parse_config(in, path.string());
  cfg.base_dir = path.parent_path();
  return cfg;
}

void apply_override(ConfigFile& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "': expected section.key=value");
  cfg.values[trim(assignment.substr(0, eq))] = trim(assignment.substr(eq + 1));
}

std::vector<std::string> known_config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : setters()) keys.push_back(k);
  return keys;
}

ToolConfig to_tool_config(const ConfigFile& cfg) {
  const auto& table = setters();
  std::vector<std::string> unknown;
  for (const auto& [k, _] : cfg.values)
    if (!table.count(k)) unknown.push_back(k);
  if (!unknown.empty()) {
    std::string msg = "unknown config keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ConfigError(msg);
  }
  ToolConfig tc;
  for (const auto& [k, v] : cfg.values) table.at(k)(tc, k, v, cfg.base_dir);
  return tc;
}

void write_config(std::ostream& out, const PipelineConfig& c, const std::optional<std::string>& manifest) {
  out << "# depth map fusion configuration\n\n"
      << "[noise]\n"
      << "lambda1 = " << fmt(c.noise.lambda1) << '\n'
      << "lambda2 = " << fmt(c.noise.lambda2) << '\n'
      << "beta_x = " << fmt(c.noise.beta_x) << '\n'
      << "beta_y = " << fmt(c.noise.beta_y) << '\n'
      << "alpha2 = " << fmt(c.noise.alpha2) << '\n'
      << "alpha1 = " << fmt(c.noise.alpha1) << '\n'
      << "alpha0 = " << fmt(c.noise.alpha0) << "\n\n"
      << "[filter]\n"
      << "gamma = " << fmt(c.filter.gamma) << '\n'
      << "k = " << c.filter.k << "\n\n"
      << "[merge]\n"
      << "gate = " << fmt(c.merge.gate) << '\n'
      << "depth_ratio = " << fmt(c.merge.depth_ratio) << '\n'
      << "candidate_radius_sigma = " << fmt(c.merge.candidate_radius_sigma) << '\n'
      << "visibility_on_merge = " << (c.merge.visibility_on_merge ? "true" : "false") << "\n\n"
      << "[icp]\n"
      << "max_iterations = " << c.icp.max_iterations << '\n'
      << "max_correspondence_dist = "
      << (c.auto_correspondence_dist ? std::string("auto") : fmt(c.icp.max_correspondence_dist)) << '\n'
      << "convergence_eps = " << fmt(c.icp.convergence_eps) << '\n'
      << "variant = " << (c.icp.variant == IcpVariant::point_to_plane ? "point_to_plane" : "point_to_point") << '\n'
      << "exclude_own_unmerged = " << (c.exclude_own_unmerged ? "true" : "false") << '\n'
      << "trim_fraction = " << fmt(c.icp.trim_fraction) << '\n'
      << "min_matched_fraction = " << fmt(c.icp.min_matched_fraction) << "\n\n"
      << "[pipeline]\n"
      << "outer_iterations = " << c.outer_iterations << '\n'
      << "convergence_rotation_deg = " << fmt(c.convergence_rotation / kDeg) << '\n'
      << "convergence_translation_mm = " << fmt(c.convergence_translation * 1e3) << '\n'
      << "emit_intermediate = " << (c.emit_intermediate ? "true" : "false") << '\n'
      << "anchor_first_view = " << (c.anchor_first_view ? "true" : "false") << '\n'
      << "index_cell_size = " << fmt(c.index_cell_size) << '\n'
      << "depth_min = " << fmt(c.depth_range.min) << '\n'
      << "depth_max = " << fmt(c.depth_range.max) << '\n';
  if (manifest) out << "\n[dataset]\nmanifest = " << *manifest << '\n';
}

}  // namespace dmfusion
