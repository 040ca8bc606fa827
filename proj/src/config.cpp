#include "geofuse/config.hpp"

#include <charconv>
#include <cstdlib>

#include "geofuse/io.hpp"

namespace geofuse {

namespace {

std::string strip(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double parse_double(const KvEntry& e, const std::string& path) {
    const char* s = e.value.c_str();
    char* end = nullptr;
    double v = std::strtod(s, &end);
    if (end == s || *end != '\0')
        throw ParseError(path, e.offset, e.key, "not a number: " + e.value);
    return v;
}

long long parse_int(const KvEntry& e, const std::string& path) {
    long long v = 0;
    auto [p, ec] = std::from_chars(e.value.data(), e.value.data() + e.value.size(), v);
    if (ec != std::errc{} || p != e.value.data() + e.value.size())
        throw ParseError(path, e.offset, e.key, "not an integer: " + e.value);
    return v;
}

std::uint64_t parse_u64(const KvEntry& e, const std::string& path) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(e.value.data(), e.value.data() + e.value.size(), v);
    if (ec != std::errc{} || p != e.value.data() + e.value.size())
        throw ParseError(path, e.offset, e.key, "not an unsigned integer: " + e.value);
    return v;
}

bool parse_bool(const KvEntry& e, const std::string& path) {
    if (e.value == "true") return true;
    if (e.value == "false") return false;
    throw ParseError(path, e.offset, e.key, "expected true or false, got: " + e.value);
}

std::string parse_word(const KvEntry& e) {
    std::string v = e.value;
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
    return v;
}

}  // namespace

std::vector<KvEntry> parse_kv(const std::string& text, const std::string& path) {
    std::vector<KvEntry> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::size_t end = nl == std::string::npos ? text.size() : nl;
        std::string line = text.substr(pos, end - pos);
        std::size_t line_at = pos;
        pos = end + 1;

        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = strip(line);
        if (line.empty()) continue;

        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(path, line_at, "line", "expected 'key = value': " + line);
        KvEntry e;
        e.key = strip(line.substr(0, eq));
        e.value = strip(line.substr(eq + 1));
        e.offset = line_at;
        if (e.key.empty()) throw ParseError(path, line_at, "line", "empty key");
        if (e.value.empty()) throw ParseError(path, line_at, e.key, "empty value");
        out.push_back(std::move(e));
    }
    return out;
}

std::string to_string(CoordSystem v) { return v == CoordSystem::camera ? "camera" : "world"; }
std::string to_string(CloudScope v) { return v == CloudScope::visible ? "visible" : "fov"; }
std::string to_string(MergeStage v) { return v == MergeStage::early ? "early" : "late"; }
std::string to_string(MergeMode v) { return v == MergeMode::local ? "local" : "padding"; }

CoordSystem coord_system_from(const std::string& s) {
    if (s == "camera") return CoordSystem::camera;
    if (s == "world") return CoordSystem::world;
    throw DataError("unknown coordinate_system: " + s + " (want camera|world)");
}

CloudScope cloud_scope_from(const std::string& s) {
    if (s == "visible") return CloudScope::visible;
    if (s == "fov") return CloudScope::fov;
    throw DataError("unknown cloud_scope: " + s + " (want visible|fov)");
}

MergeStage merge_stage_from(const std::string& s) {
    if (s == "early") return MergeStage::early;
    if (s == "late") return MergeStage::late;
    throw DataError("unknown merge_stage: " + s + " (want early|late)");
}

MergeMode merge_mode_from(const std::string& s) {
    if (s == "local") return MergeMode::local;
    if (s == "padding") return MergeMode::padding;
    throw DataError("unknown merge_mode: " + s + " (want local|padding)");
}

void apply_train_config(const std::vector<KvEntry>& entries, const std::string& path,
                        TrainConfig& cfg) {
    for (const KvEntry& e : entries) {
        try {
            if (e.key == "lr0")
                cfg.lr0 = parse_double(e, path);
            else if (e.key == "momentum")
                cfg.momentum = parse_double(e, path);
            else if (e.key == "weight_decay")
                cfg.weight_decay = parse_double(e, path);
            else if (e.key == "epochs")
                cfg.epochs = static_cast<int>(parse_int(e, path));
            else if (e.key == "halve_every")
                cfg.halve_every = static_cast<int>(parse_int(e, path));
            else if (e.key == "seed")
                cfg.seed = parse_u64(e, path);
            else if (e.key == "coordinate_system")
                cfg.coordinate_system = coord_system_from(parse_word(e));
            else if (e.key == "cloud_scope")
                cfg.cloud_scope = cloud_scope_from(parse_word(e));
            else if (e.key == "merge_stage")
                cfg.merge_stage = merge_stage_from(parse_word(e));
            else if (e.key == "merge_mode")
                cfg.merge_mode = merge_mode_from(parse_word(e));
            else if (e.key == "visibility_theta")
                cfg.visibility_theta = parse_double(e, path);
            else if (e.key == "num_classes")
                cfg.num_classes = static_cast<int>(parse_int(e, path));
            else if (e.key == "rgb_only")
                cfg.rgb_only = parse_bool(e, path);
            else if (e.key == "append_rgb")
                cfg.append_rgb = parse_bool(e, path);
            else
                throw ParseError(path, e.offset, e.key, "unknown key");
        } catch (const DataError& err) {
            throw ParseError(path, e.offset, e.key, err.what());
        }
    }
}

void apply_scene_spec(const std::vector<KvEntry>& entries, const std::string& path,
                      SceneSpec& spec) {
    for (const KvEntry& e : entries) {
        if (e.key == "room_x_min")
            spec.room_x_min = parse_double(e, path);
        else if (e.key == "room_x_max")
            spec.room_x_max = parse_double(e, path);
        else if (e.key == "room_y_min")
            spec.room_y_min = parse_double(e, path);
        else if (e.key == "room_y_max")
            spec.room_y_max = parse_double(e, path);
        else if (e.key == "room_z_min")
            spec.room_z_min = parse_double(e, path);
        else if (e.key == "room_z_max")
            spec.room_z_max = parse_double(e, path);
        else if (e.key == "boxes_min")
            spec.boxes_min = static_cast<int>(parse_int(e, path));
        else if (e.key == "boxes_max")
            spec.boxes_max = static_cast<int>(parse_int(e, path));
        else if (e.key == "spheres_min")
            spec.spheres_min = static_cast<int>(parse_int(e, path));
        else if (e.key == "spheres_max")
            spec.spheres_max = static_cast<int>(parse_int(e, path));
        else if (e.key == "box_size_min")
            spec.box_size_min = parse_double(e, path);
        else if (e.key == "box_size_max")
            spec.box_size_max = parse_double(e, path);
        else if (e.key == "sphere_r_min")
            spec.sphere_r_min = parse_double(e, path);
        else if (e.key == "sphere_r_max")
            spec.sphere_r_max = parse_double(e, path);
        else if (e.key == "points_per_scene")
            spec.points_per_scene = static_cast<int>(parse_int(e, path));
        else if (e.key == "image_size")
            spec.image_size = static_cast<int>(parse_int(e, path));
        else if (e.key == "cameras_per_scene")
            spec.cameras_per_scene = static_cast<int>(parse_int(e, path));
        else if (e.key == "noise_sigma")
            spec.noise_sigma = parse_double(e, path);
        else if (e.key == "ignore_border")
            spec.ignore_border = static_cast<int>(parse_int(e, path));
        else if (e.key == "fov_y_deg")
            spec.fov_y_deg = parse_double(e, path);
        else if (e.key == "seed")
            spec.seed = parse_u64(e, path);
        else if (e.key == "num_train")
            spec.num_train = static_cast<int>(parse_int(e, path));
        else if (e.key == "num_val")
            spec.num_val = static_cast<int>(parse_int(e, path));
        else
            throw ParseError(path, e.offset, e.key, "unknown key");
    }
}

TrainConfig load_train_config(const std::string& path) {
    TrainConfig cfg;
    apply_train_config(parse_kv(read_text_file(path), path), path, cfg);
    cfg.validate();
    return cfg;
}

SceneSpec load_scene_spec(const std::string& path) {
    SceneSpec spec;
    apply_scene_spec(parse_kv(read_text_file(path), path), path, spec);
    spec.validate();
    return spec;
}

}  // namespace geofuse
