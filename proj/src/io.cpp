#include "freenoise/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "binio.hpp"

namespace freenoise {

void write_container(const Array& video, const std::string& path) {
  if (video.ndim() != 4) {
    throw ShapeError("container expects [C,M,H,W], got " + video.shape_str());
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open '" + path + "' for writing");
  const int c = video.extent(0), m = video.extent(1), h = video.extent(2), w = video.extent(3);
  os.write("FNV1", 4);
  binio::write_u32(os, static_cast<uint32_t>(m));
  binio::write_u32(os, static_cast<uint32_t>(c));
  binio::write_u32(os, static_cast<uint32_t>(h));
  binio::write_u32(os, static_cast<uint32_t>(w));
  const size_t plane = static_cast<size_t>(h) * w;
  for (int mi = 0; mi < m; ++mi) {
    for (int ci = 0; ci < c; ++ci) {
      binio::write_f32(os, video.data() + ci * video.stride(0) + mi * plane, plane);
    }
  }
  if (!os) throw FormatError("write to '" + path + "' failed");
}

Array read_container(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open '" + path + "'");
  const std::string what = "container '" + path + "'";
  size_t offset = 0;
  char magic[4];
  binio::read_exact(is, magic, 4, offset, what);
  offset += 4;
  if (std::string(magic, 4) != "FNV1") {
    throw FormatError(what + ": bad magic at byte 0 (expected FNV1)");
  }
  const uint32_t m = binio::read_u32(is, offset, what);
  const uint32_t c = binio::read_u32(is, offset, what);
  const uint32_t h = binio::read_u32(is, offset, what);
  const uint32_t w = binio::read_u32(is, offset, what);
  if (m == 0 || c == 0 || h == 0 || w == 0) {
    throw FormatError(what + ": zero extent in header (frames=" + std::to_string(m) +
                      " channels=" + std::to_string(c) + " height=" + std::to_string(h) +
                      " width=" + std::to_string(w) + ")");
  }
  if (static_cast<uint64_t>(m) * c * h * w > (1ull << 31)) {
    throw FormatError(what + ": header describes an implausibly large payload");
  }
  Array video({static_cast<int>(c), static_cast<int>(m), static_cast<int>(h),
               static_cast<int>(w)});
  const size_t plane = static_cast<size_t>(h) * w;
  for (uint32_t mi = 0; mi < m; ++mi) {
    for (uint32_t ci = 0; ci < c; ++ci) {
      binio::read_f32(is, video.data() + ci * video.stride(0) + mi * plane, plane, offset, what);
    }
  }
  return video;
}

void export_frames_p6(const Array& video, const std::string& prefix) {
  if (video.ndim() != 4 || video.extent(0) != 3) {
    throw InputError("frame export expects an RGB video [3,M,H,W], got " + video.shape_str());
  }
  const int m = video.extent(1), h = video.extent(2), w = video.extent(3);
  float lo = video.data()[0], hi = video.data()[0];
  for (size_t i = 0; i < video.size(); ++i) {
    lo = std::min(lo, video.data()[i]);
    hi = std::max(hi, video.data()[i]);
  }
  const float range = hi - lo;
  const size_t plane = static_cast<size_t>(h) * w;
  std::vector<unsigned char> pixels(3 * plane);
  for (int mi = 0; mi < m; ++mi) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        for (int c = 0; c < 3; ++c) {
          const float v = video.data()[c * video.stride(0) + mi * plane + y * w + x];
          float norm = range > 0.0f ? (v - lo) / range : 0.5f;
          norm = std::clamp(norm, 0.0f, 1.0f);
          pixels[(static_cast<size_t>(y) * w + x) * 3 + c] =
              static_cast<unsigned char>(std::lround(norm * 255.0f));
        }
      }
    }
    char name[32];
    std::snprintf(name, sizeof(name), "_%04d.ppm", mi);
    std::ofstream os(prefix + name, std::ios::binary);
    if (!os) throw FormatError("cannot open '" + prefix + name + "' for writing");
    os << "P6\n" << w << " " << h << "\n255\n";
    os.write(reinterpret_cast<const char*>(pixels.data()),
             static_cast<std::streamsize>(pixels.size()));
    if (!os) throw FormatError("write to '" + prefix + name + "' failed");
  }
}

std::map<std::string, std::vector<std::string>> parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  std::map<std::string, std::vector<std::string>> out;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return std::string();
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  };
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config file '" + path + "' line " + std::to_string(lineno) +
                        ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config file '" + path + "' line " + std::to_string(lineno) +
                        ": empty key");
    }
    // values may be quoted to preserve inner spaces
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    out[key].push_back(value);
  }
  return out;
}

}  // namespace freenoise
