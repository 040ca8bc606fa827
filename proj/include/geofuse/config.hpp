#pragma once

#include <string>
#include <vector>

#include "geofuse/scene.hpp"
#include "geofuse/trainer.hpp"

// TOML-subset config files: `key = value` lines, # comments, blank lines.
// Values are numbers, true/false, bare words, or "quoted strings". Unknown
// keys are errors so typos surface immediately.

namespace geofuse {

struct KvEntry {
    std::string key;
    std::string value;
    std::size_t offset = 0;  // byte offset of the line, for error reporting
};

std::vector<KvEntry> parse_kv(const std::string& text, const std::string& path);

/// Overlay file values onto `cfg` (defaults stay for absent keys).
void apply_train_config(const std::vector<KvEntry>& entries, const std::string& path,
                        TrainConfig& cfg);
void apply_scene_spec(const std::vector<KvEntry>& entries, const std::string& path,
                      SceneSpec& spec);

TrainConfig load_train_config(const std::string& path);
SceneSpec load_scene_spec(const std::string& path);

// enum <-> string (throws DataError on unknown names)
std::string to_string(CoordSystem v);
std::string to_string(CloudScope v);
std::string to_string(MergeStage v);
std::string to_string(MergeMode v);
CoordSystem coord_system_from(const std::string& s);
CloudScope cloud_scope_from(const std::string& s);
MergeStage merge_stage_from(const std::string& s);
MergeMode merge_mode_from(const std::string& s);

}  // namespace geofuse
