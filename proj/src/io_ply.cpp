#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "geofuse/io.hpp"

namespace geofuse {

namespace {

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return std::move(ss).str();
}

// cursor over the raw bytes; keeps the offset for error reporting
struct Cursor {
    const std::string& buf;
    const std::string& path;
    std::size_t pos = 0;

    std::string line(const std::string& field) {
        if (pos >= buf.size()) throw ParseError(path, pos, field, "unexpected end of file");
        std::size_t start = pos;
        std::size_t nl = buf.find('\n', pos);
        if (nl == std::string::npos) throw ParseError(path, start, field, "unterminated line");
        pos = nl + 1;
        std::string s = buf.substr(start, nl - start);
        if (!s.empty() && s.back() == '\r') s.pop_back();
        return s;
    }
};

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream ss(s);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

bool is_float_type(const std::string& t) { return t == "float" || t == "float32"; }
bool is_uchar_type(const std::string& t) { return t == "uchar" || t == "uint8"; }

float le_float(const char* p) {
    std::uint32_t u = static_cast<std::uint8_t>(p[0]) |
                      (static_cast<std::uint32_t>(static_cast<std::uint8_t>(p[1])) << 8) |
                      (static_cast<std::uint32_t>(static_cast<std::uint8_t>(p[2])) << 16) |
                      (static_cast<std::uint32_t>(static_cast<std::uint8_t>(p[3])) << 24);
    float f;
    std::memcpy(&f, &u, 4);
    return f;
}

void put_le_float(std::string& out, float f) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    out.push_back(static_cast<char>(u & 0xFF));
    out.push_back(static_cast<char>((u >> 8) & 0xFF));
    out.push_back(static_cast<char>((u >> 16) & 0xFF));
    out.push_back(static_cast<char>((u >> 24) & 0xFF));
}

}  // namespace

void save_ply(const std::string& path, const PointCloud& cloud, bool binary) {
    cloud.validate();
    std::string out;
    out += "ply\n";
    out += binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n";
    out += "element vertex " + std::to_string(cloud.size()) + "\n";
    out += "property float x\nproperty float y\nproperty float z\n";
    if (cloud.has_colors())
        out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    out += "end_header\n";

    for (std::size_t i = 0; i < cloud.size(); ++i) {
        float x = static_cast<float>(cloud.positions[i].x());
        float y = static_cast<float>(cloud.positions[i].y());
        float z = static_cast<float>(cloud.positions[i].z());
        std::uint8_t rgb[3] = {0, 0, 0};
        if (cloud.has_colors())
            for (int ch = 0; ch < 3; ++ch)
                rgb[ch] = static_cast<std::uint8_t>(
                    std::lround(std::min(1.0f, std::max(0.0f, cloud.colors[i][ch])) * 255.0f));
        if (binary) {
            put_le_float(out, x);
            put_le_float(out, y);
            put_le_float(out, z);
            if (cloud.has_colors())
                for (int ch = 0; ch < 3; ++ch) out.push_back(static_cast<char>(rgb[ch]));
        } else {
            char buf[160];
            int n;
            if (cloud.has_colors())
                n = std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g %d %d %d\n", x, y, z, rgb[0],
                                  rgb[1], rgb[2]);
            else
                n = std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g\n", x, y, z);
            out.append(buf, static_cast<std::size_t>(n));
        }
    }
    write_text_file(path, out);
}

PointCloud load_ply(const std::string& path) {
    std::string buf = read_file(path);
    Cursor cur{buf, path};

    if (cur.line("magic") != "ply") throw ParseError(path, 0, "magic", "not a PLY file");
    bool binary = false;
    {
        std::size_t at = cur.pos;
        std::string fmt = cur.line("format");
        if (fmt == "format binary_little_endian 1.0")
            binary = true;
        else if (fmt != "format ascii 1.0")
            throw ParseError(path, at, "format", "unsupported format: " + fmt);
    }

    std::size_t count = 0;
    bool have_vertex = false;
    std::vector<std::string> props;
    for (;;) {
        std::size_t at = cur.pos;
        std::string ln = cur.line("header");
        std::vector<std::string> tok = split_ws(ln);
        if (tok.empty()) continue;
        if (tok[0] == "comment") continue;
        if (tok[0] == "end_header") break;
        if (tok[0] == "element") {
            if (tok.size() != 3 || tok[1] != "vertex")
                throw ParseError(path, at, "element", "only a vertex element is supported");
            if (have_vertex) throw ParseError(path, at, "element", "duplicate vertex element");
            have_vertex = true;
            try {
                count = std::stoull(tok[2]);
            } catch (const std::exception&) {
                throw ParseError(path, at, "element", "bad vertex count: " + tok[2]);
            }
            continue;
        }
        if (tok[0] == "property") {
            if (!have_vertex) throw ParseError(path, at, "property", "property before element");
            if (tok.size() != 3)
                throw ParseError(path, at, "property", "expected 'property <type> <name>'");
            props.push_back(tok[1] + " " + tok[2]);
            continue;
        }
        throw ParseError(path, at, "header", "unrecognized header line: " + ln);
    }
    if (!have_vertex) throw ParseError(path, cur.pos, "element", "missing vertex element");

    bool has_color;
    const char* want_xyz[3] = {"x", "y", "z"};
    const char* want_rgb[3] = {"red", "green", "blue"};
    if (props.size() == 3)
        has_color = false;
    else if (props.size() == 6)
        has_color = true;
    else
        throw ParseError(path, cur.pos, "property",
                         "expected x,y,z or x,y,z,red,green,blue properties");
    for (int i = 0; i < 3; ++i) {
        std::vector<std::string> tok = split_ws(props[static_cast<std::size_t>(i)]);
        if (!is_float_type(tok[0]) || tok[1] != want_xyz[i])
            throw ParseError(path, cur.pos, "property",
                             "property " + std::to_string(i) + " must be 'float " +
                                 want_xyz[i] + "'");
    }
    if (has_color)
        for (int i = 0; i < 3; ++i) {
            std::vector<std::string> tok = split_ws(props[static_cast<std::size_t>(3 + i)]);
            if (!is_uchar_type(tok[0]) || tok[1] != want_rgb[i])
                throw ParseError(path, cur.pos, "property",
                                 "property " + std::to_string(3 + i) + " must be 'uchar " +
                                     want_rgb[i] + "'");
        }

    PointCloud cloud;
    cloud.positions.reserve(count);
    if (has_color) cloud.colors.reserve(count);

    if (binary) {
        std::size_t stride = has_color ? 15 : 12;
        if (buf.size() - cur.pos < count * stride)
            throw ParseError(path, buf.size(), "payload", "truncated binary payload");
        for (std::size_t i = 0; i < count; ++i) {
            const char* p = buf.data() + cur.pos + i * stride;
            cloud.positions.emplace_back(le_float(p), le_float(p + 4), le_float(p + 8));
            if (has_color)
                cloud.colors.emplace_back(static_cast<std::uint8_t>(p[12]) / 255.0f,
                                          static_cast<std::uint8_t>(p[13]) / 255.0f,
                                          static_cast<std::uint8_t>(p[14]) / 255.0f);
        }
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            std::size_t at = cur.pos;
            std::vector<std::string> tok = split_ws(cur.line("vertex"));
            if (tok.size() != (has_color ? 6u : 3u))
                throw ParseError(path, at, "vertex", "wrong value count on vertex row");
            try {
                cloud.positions.emplace_back(std::stof(tok[0]), std::stof(tok[1]),
                                             std::stof(tok[2]));
                if (has_color) {
                    int r = std::stoi(tok[3]), g = std::stoi(tok[4]), b = std::stoi(tok[5]);
                    if (r < 0 || r > 255 || g < 0 || g > 255 || b < 0 || b > 255)
                        throw std::out_of_range("color byte");
                    cloud.colors.emplace_back(r / 255.0f, g / 255.0f, b / 255.0f);
                }
            } catch (const ParseError&) {
                throw;
            } catch (const std::exception& e) {
                throw ParseError(path, at, "vertex", e.what());
            }
        }
    }
    cloud.validate();
    return cloud;
}

void save_indices_u32(const std::string& path, const std::vector<std::uint32_t>& indices) {
    std::string out;
    out.reserve(indices.size() * 4);
    for (std::uint32_t v : indices) {
        out.push_back(static_cast<char>(v & 0xFF));
        out.push_back(static_cast<char>((v >> 8) & 0xFF));
        out.push_back(static_cast<char>((v >> 16) & 0xFF));
        out.push_back(static_cast<char>((v >> 24) & 0xFF));
    }
    write_text_file(path, out);
}

std::vector<std::uint32_t> load_indices_u32(const std::string& path) {
    std::string buf = read_file(path);
    if (buf.size() % 4 != 0)
        throw ParseError(path, buf.size(), "payload", "size is not a multiple of 4");
    std::vector<std::uint32_t> out(buf.size() / 4);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const char* p = buf.data() + i * 4;
        out[i] = static_cast<std::uint8_t>(p[0]) |
                 (static_cast<std::uint32_t>(static_cast<std::uint8_t>(p[1])) << 8) |
                 (static_cast<std::uint32_t>(static_cast<std::uint8_t>(p[2])) << 16) |
                 (static_cast<std::uint32_t>(static_cast<std::uint8_t>(p[3])) << 24);
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open for writing: " + path);
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    f.flush();
    if (!f) throw DataError("write failed: " + path);
}

std::string read_text_file(const std::string& path) { return read_file(path); }

}  // namespace geofuse
