#pragma once

#include <string>
#include <vector>

#include "geofuse/scene.hpp"

// On-disk dataset layout:
//   <root>/<split>/scene_NNNN/cloud.ply
//   <root>/<split>/scene_NNNN/NNN.rgb.png
//   <root>/<split>/scene_NNNN/NNN.labels.png
//   <root>/<split>/scene_NNNN/NNN.camera.json
// RGB is quantized to 8 bits on write and mapped back to [0,1] on read.

namespace geofuse {

std::string scene_dir_name(int scene_id);
std::string view_file_name(int view_id, const std::string& suffix);

/// Write all views of one scene (they share the cloud) into `dir`.
void write_scene(const std::string& dir, const std::vector<SceneSample>& views);

/// Generate and write both splits. Train scenes take ids [0, num_train),
/// validation scenes [num_train, num_train + num_val) — distinct ids keep
/// their derived seeds distinct.
void write_dataset(const std::string& root, const SceneSpec& spec);

/// Load every view under <root>/<split>, ordered by scene directory then
/// view id.
std::vector<SceneSample> load_split(const std::string& root, const std::string& split);

}  // namespace geofuse
