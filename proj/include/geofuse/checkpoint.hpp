#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "geofuse/params.hpp"
#include "geofuse/tensor.hpp"

// Flat binary tensor container. Header: magic "LPNT", version u32 (=1),
// tensor count u32. Per tensor: name length u16, UTF-8 name, rank u8, dims as
// u32s, float32 payload, everything little-endian. Velocity buffers are
// stored under "vel/<param name>".

namespace geofuse {

using VelocityMap = std::map<std::string, Tensor<float>>;

void save_checkpoint(const std::string& path, const ParamStore<float>& params,
                     const VelocityMap* velocities = nullptr);

/// Strict load into an existing store: every non-vel tensor in the file must
/// name a registered parameter with identical dims, and every registered
/// parameter must be present (architecture mismatch -> DataError). vel/
/// entries fill `velocities` when given and are ignored otherwise.
void load_checkpoint(const std::string& path, ParamStore<float>& params,
                     VelocityMap* velocities = nullptr);

/// Standalone dump of named tensors (feature/logit exports).
void save_tensors(const std::string& path, const std::map<std::string, Tensor<float>>& tensors);
std::map<std::string, Tensor<float>> load_tensors(const std::string& path);

}  // namespace geofuse
