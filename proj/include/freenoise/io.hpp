#pragma once

#include <map>
#include <string>
#include <vector>

#include "freenoise/array.hpp"

namespace freenoise {

// Video container: magic "FNV1"; little-endian u32 frames, channels, height,
// width; float32 payload ordered frame-major, then channel, then rows.

/// Writes video[C,M,H,W] to `path`.
void write_container(const Array& video, const std::string& path);

/// Reads a container back into [C,M,H,W]; write->read is bitwise identity.
Array read_container(const std::string& path);

/// One binary P6 image per frame of an RGB video [3,M,H,W], named
/// <prefix>_NNNN.ppm. Values are min-max normalized over the whole video,
/// clamped to [0,1] and scaled to 8 bit.
void export_frames_p6(const Array& video, const std::string& prefix);

/// Flat `key = value` config text: one pair per line, '#' starts a comment,
/// repeated keys accumulate in order.
std::map<std::string, std::vector<std::string>> parse_config_file(const std::string& path);

}  // namespace freenoise
