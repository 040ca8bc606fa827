#include "geofuse/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#include "geofuse/errors.hpp"

namespace geofuse {

namespace {

// Scalars are written little-endian; the in-memory representation on the
// supported targets already is, so writes go through byte copies.

template <typename U>
void put(std::string& out, U v) {
    char buf[sizeof(U)];
    std::memcpy(buf, &v, sizeof(U));
    out.append(buf, sizeof(U));
}

struct Reader {
    const std::string path;
    std::string bytes;
    std::size_t pos = 0;

    explicit Reader(const std::string& p) : path(p) {
        std::ifstream in(p, std::ios::binary);
        if (!in) throw DataError("cannot open checkpoint '" + p + "'");
        bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }

    template <typename U>
    U get(const char* field) {
        if (pos + sizeof(U) > bytes.size())
            throw ParseError(path, pos, field, "checkpoint truncated in " + std::string(field));
        U v;
        std::memcpy(&v, bytes.data() + pos, sizeof(U));
        pos += sizeof(U);
        return v;
    }

    std::string get_name(std::size_t len) {
        if (pos + len > bytes.size())
            throw ParseError(path, pos, "name", "checkpoint truncated in tensor name");
        std::string s = bytes.substr(pos, len);
        pos += len;
        return s;
    }
};

void write_tensor(std::string& out, const std::string& name, const Tensor<float>& t) {
    if (name.size() > 0xFFFF) throw DataError("tensor name too long: '" + name + "'");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.append(name);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.shape.size()));
    for (int d : t.shape) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    std::size_t n = t.numel();
    std::size_t at = out.size();
    out.resize(at + n * sizeof(float));
    std::memcpy(out.data() + at, t.data(), n * sizeof(float));
}

std::map<std::string, Tensor<float>> read_container(const std::string& path) {
    Reader r(path);
    if (r.bytes.size() < 4 || r.bytes.compare(0, 4, "LPNT") != 0)
        throw ParseError(path, 0, "magic", "not a tensor container (bad magic)");
    r.pos = 4;
    std::uint32_t version = r.get<std::uint32_t>("version");
    if (version != 1)
        throw ParseError(path, 4, "version",
                         "unsupported container version " + std::to_string(version));
    std::uint32_t count = r.get<std::uint32_t>("count");
    std::map<std::string, Tensor<float>> out;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint16_t len = r.get<std::uint16_t>("name_len");
        std::string name = r.get_name(len);
        std::uint8_t rank = r.get<std::uint8_t>("rank");
        std::vector<int> shape(rank);
        std::size_t numel = 1;
        for (std::uint8_t d = 0; d < rank; ++d) {
            std::uint32_t dim = r.get<std::uint32_t>("dim");
            shape[d] = static_cast<int>(dim);
            numel *= dim;
        }
        if (r.pos + numel * sizeof(float) > r.bytes.size())
            throw ParseError(path, r.pos, "payload",
                             "checkpoint truncated in payload of '" + name + "'");
        Tensor<float> t(shape);
        std::memcpy(t.data(), r.bytes.data() + r.pos, numel * sizeof(float));
        r.pos += numel * sizeof(float);
        if (!out.emplace(name, std::move(t)).second)
            throw ParseError(path, r.pos, "name", "duplicate tensor '" + name + "'");
    }
    return out;
}

void write_container(const std::string& path, const std::string& body, std::uint32_t count) {
    std::string out;
    out.reserve(body.size() + 12);
    out.append("LPNT");
    put<std::uint32_t>(out, 1);
    put<std::uint32_t>(out, count);
    out.append(body);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write checkpoint '" + path + "'");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("write failed for checkpoint '" + path + "'");
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore<float>& params,
                     const VelocityMap* velocities) {
    std::string body;
    std::uint32_t count = 0;
    for (const auto& [name, p] : params) {
        write_tensor(body, name, p.value);
        ++count;
    }
    if (velocities) {
        for (const auto& [name, v] : *velocities) {
            write_tensor(body, "vel/" + name, v);
            ++count;
        }
    }
    write_container(path, body, count);
}

void load_checkpoint(const std::string& path, ParamStore<float>& params, VelocityMap* velocities) {
    auto tensors = read_container(path);
    std::size_t matched = 0;
    for (auto& [name, t] : tensors) {
        if (name.rfind("vel/", 0) == 0) {
            if (velocities) (*velocities)[name.substr(4)] = std::move(t);
            continue;
        }
        if (!params.has(name))
            throw DataError("checkpoint '" + path + "' holds tensor '" + name +
                            "' unknown to this architecture");
        Param<float>& p = params.at(name);
        if (t.shape != p.value.shape)
            throw DataError("checkpoint '" + path + "': shape mismatch for '" + name + "'");
        p.value = std::move(t);
        ++matched;
    }
    if (matched != params.size())
        throw DataError("checkpoint '" + path + "' is missing parameters for this architecture");
    if (velocities) {
        for (auto& [name, v] : *velocities) {
            if (!params.has(name))
                throw DataError("checkpoint '" + path + "': velocity for unknown param '" + name +
                                "'");
            if (v.shape != params.at(name).value.shape)
                throw DataError("checkpoint '" + path + "': velocity shape mismatch for '" + name +
                                "'");
        }
    }
}

void save_tensors(const std::string& path, const std::map<std::string, Tensor<float>>& tensors) {
    std::string body;
    for (const auto& [name, t] : tensors) write_tensor(body, name, t);
    write_container(path, body, static_cast<std::uint32_t>(tensors.size()));
}

std::map<std::string, Tensor<float>> load_tensors(const std::string& path) {
    return read_container(path);
}

}  // namespace geofuse
