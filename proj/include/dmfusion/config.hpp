#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dmfusion/pipeline.hpp"

namespace dmfusion {

// Flat INI-style configuration:
//
//   [section]
//   key = value   # comment
//
// Keys are addressed as "section.key". Every tuning constant has a default
// here and can be overridden from the file or with `--set section.key=value`.
struct ConfigFile {
  std::map<std::string, std::string> values;
  std::filesystem::path base_dir;  // relative paths resolve against this
};

ConfigFile parse_config(std::istream& in, const std::string& name);
ConfigFile load_config(const std::filesystem::path& path);

// Applies "section.key=value".
void apply_override(ConfigFile& cfg, const std::string& assignment);

struct ToolConfig {
  PipelineConfig pipeline;
  std::optional<std::filesystem::path> manifest;
};

// Throws ConfigError listing every unknown key, or naming a malformed value.
ToolConfig to_tool_config(const ConfigFile& cfg);

// All recognised keys, "section.key".
std::vector<std::string> known_config_keys();

// Serialises a configuration that to_tool_config reads back unchanged.
void write_config(std::ostream& out, const PipelineConfig& cfg, const std::optional<std::string>& manifest);

}  // namespace dmfusion
