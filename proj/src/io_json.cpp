#include <json.hpp>

#include "geofuse/io.hpp"

namespace geofuse {

namespace {

using nlohmann::json;

double need_number(const json& j, const std::string& path, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_number())
        throw ParseError(path, 0, key, "missing or non-numeric key");
    return it->get<double>();
}

int need_int(const json& j, const std::string& path, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_number_integer())
        throw ParseError(path, 0, key, "missing or non-integer key");
    return it->get<int>();
}

}  // namespace

void save_camera_json(const std::string& path, const CameraRig& rig) {
    rig.validate();
    json j;
    j["fx"] = rig.fx;
    j["fy"] = rig.fy;
    j["cx"] = rig.cx;
    j["cy"] = rig.cy;
    j["width"] = rig.width;
    j["height"] = rig.height;
    j["near_clip"] = rig.near_clip;
    json m = json::array();
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) m.push_back(rig.world_to_camera(r, c));
    j["world_to_camera"] = std::move(m);
    write_text_file(path, j.dump(2) + "\n");
}

CameraRig load_camera_json(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw ParseError(path, e.byte, "json", e.what());
    }
    if (!j.is_object()) throw ParseError(path, 0, "json", "top level must be an object");
    CameraRig rig;
    rig.fx = need_number(j, path, "fx");
    rig.fy = need_number(j, path, "fy");
    rig.cx = need_number(j, path, "cx");
    rig.cy = need_number(j, path, "cy");
    rig.width = need_int(j, path, "width");
    rig.height = need_int(j, path, "height");
    rig.near_clip = need_number(j, path, "near_clip");
    auto it = j.find("world_to_camera");
    if (it == j.end() || !it->is_array() || it->size() != 16)
        throw ParseError(path, 0, "world_to_camera", "need an array of 16 numbers");
    for (int i = 0; i < 16; ++i) {
        const json& v = (*it)[static_cast<std::size_t>(i)];
        if (!v.is_number())
            throw ParseError(path, 0, "world_to_camera", "entry " + std::to_string(i) +
                                                             " is not a number");
        rig.world_to_camera(i / 4, i % 4) = v.get<double>();
    }
    rig.validate();
    return rig;
}

}  // namespace geofuse
