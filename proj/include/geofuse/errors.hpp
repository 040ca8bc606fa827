#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace geofuse {

/// Malformed input file. Carries the byte offset and the field being parsed.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& path, std::size_t byte_offset, const std::string& field,
               const std::string& what)
        : std::runtime_error(path + ": parse error at byte " + std::to_string(byte_offset) +
                             " (field '" + field + "'): " + what),
          byte_offset(byte_offset),
          field(field) {}

    std::size_t byte_offset;
    std::string field;
};

/// Invalid data: bad dimensions, violated invariants, missing files.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace geofuse
