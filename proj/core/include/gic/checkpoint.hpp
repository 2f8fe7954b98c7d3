#pragma once

#include <filesystem>

#include "gic/model.hpp"

namespace gic {

// Single-file checkpoint: 8-byte magic "GICKPT01", a little-endian u64 with
// the manifest length, a human-readable JSON manifest (configs, tasks,
// vocabulary, tensor directory with per-tensor shape/offset/byte length), and
// a contiguous little-endian float32 payload in parameter order. The manifest
// records an FNV-1a-64 checksum of the payload; load verifies the format
// version, the byte arithmetic of every entry and the checksum before any
// tensor is accepted.
void checkpoint_save(const ModelBundleF& bundle, const std::filesystem::path& path);
ModelBundleF checkpoint_load(const std::filesystem::path& path);

} // namespace gic
