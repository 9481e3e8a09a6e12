#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "locgan/errors.hpp"
#include "locgan/pose.hpp"

namespace locgan {

/**
 * @brief Geo-referenced image: channel-major float pixels in [0,1], a
 * meters-per-pixel scale, and the pose of the raster center.
 *
 * Pixel frame: row 0 is "forward" (the +x axis of the anchor pose), column 0
 * is "left" (+y axis). Pixel centers sit at half-integer offsets, so for odd
 * sizes the middle pixel is exactly on the anchor.
 */
struct Raster {
  int channels = 0;
  int height = 0;
  int width = 0;
  double resolution = 0.0;  // meters per pixel
  Pose2D anchor;            // pose of the raster center
  std::vector<float> data;  // [channel][row][col]

  Raster() = default;
  Raster(int channels_, int height_, int width_, double resolution_,
         Pose2D anchor_ = {})
      : channels(channels_),
        height(height_),
        width(width_),
        resolution(resolution_),
        anchor(anchor_),
        data(static_cast<size_t>(channels_) * height_ * width_, 0.0f) {
    if (channels_ <= 0 || height_ <= 0 || width_ <= 0 || resolution_ <= 0.0)
      throw DimensionError("raster dimensions and resolution must be positive");
  }

  float& at(int c, int r, int col) {
    return data[(static_cast<size_t>(c) * height + r) * width + col];
  }
  float at(int c, int r, int col) const {
    return data[(static_cast<size_t>(c) * height + r) * width + col];
  }

  bool in_bounds(int r, int col) const {
    return r >= 0 && r < height && col >= 0 && col < width;
  }

  /// Metric coordinates of a pixel center in the anchor frame.
  Vec2 pixel_to_local(double row, double col) const {
    return Vec2{(height * 0.5 - row - 0.5) * resolution,
                (width * 0.5 - col - 0.5) * resolution};
  }

  /// Continuous pixel-center coordinates of a local metric point.
  Vec2 local_to_pixel(Vec2 local) const {
    return Vec2{height * 0.5 - local.x / resolution - 0.5,
                width * 0.5 - local.y / resolution - 0.5};
  }

  Vec2 pixel_to_world(double row, double col) const {
    return se2_transform_point(anchor, pixel_to_local(row, col));
  }

  /// Index of the cell containing a local metric point (may be out of bounds).
  void local_to_cell(Vec2 local, int* row, int* col) const {
    *row = static_cast<int>(std::floor(height * 0.5 - local.x / resolution));
    *col = static_cast<int>(std::floor(width * 0.5 - local.y / resolution));
  }

  double footprint_meters() const { return width * resolution; }
};

// ---------------------------------------------------------------------------
// PGM persistence (binary P5, maxval 65535, big-endian samples) with a JSON
// sidecar for the geo data the image format cannot carry.
// ---------------------------------------------------------------------------

inline void write_pgm(const std::string& path, const Raster& raster,
                      int channel = 0) {
  if (channel < 0 || channel >= raster.channels)
    throw ContractError("write_pgm: channel out of range");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "P5\n" << raster.width << " " << raster.height << "\n65535\n";
  std::vector<unsigned char> row(static_cast<size_t>(raster.width) * 2);
  for (int r = 0; r < raster.height; ++r) {
    for (int c = 0; c < raster.width; ++c) {
      const float v = std::clamp(raster.at(channel, r, c), 0.0f, 1.0f);
      const uint16_t q = static_cast<uint16_t>(std::lround(v * 65535.0));
      row[static_cast<size_t>(c) * 2] = static_cast<unsigned char>(q >> 8);
      row[static_cast<size_t>(c) * 2 + 1] = static_cast<unsigned char>(q & 0xff);
    }
    os.write(reinterpret_cast<const char*>(row.data()),
             static_cast<std::streamsize>(row.size()));
  }
  if (!os) throw IoError("failed writing " + path);
}

inline Raster read_pgm(const std::string& path, double resolution = 1.0,
                       Pose2D anchor = {}) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  std::string magic;
  is >> magic;
  if (magic != "P5") throw IoError("unsupported PGM (want binary P5): " + path);
  auto next_int = [&is, &path]() {
    // skip whitespace and '#' comment lines
    while (true) {
      const int ch = is.peek();
      if (ch == '#') {
        std::string line;
        std::getline(is, line);
      } else if (std::isspace(ch)) {
        is.get();
      } else {
        break;
      }
    }
    int v = 0;
    if (!(is >> v)) throw IoError("malformed PGM header: " + path);
    return v;
  };
  const int w = next_int();
  const int h = next_int();
  const int maxval = next_int();
  if (maxval != 65535) throw IoError("expected 16-bit PGM: " + path);
  is.get();  // single whitespace after header
  Raster raster(1, h, w, resolution, anchor);
  std::vector<unsigned char> row(static_cast<size_t>(w) * 2);
  for (int r = 0; r < h; ++r) {
    is.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size()));
    if (!is) throw IoError("PGM payload truncated: " + path);
    for (int c = 0; c < w; ++c) {
      const uint16_t q = static_cast<uint16_t>(
          (row[static_cast<size_t>(c) * 2] << 8) | row[static_cast<size_t>(c) * 2 + 1]);
      raster.at(0, r, c) = static_cast<float>(q) / 65535.0f;
    }
  }
  return raster;
}

inline nlohmann::json pose_to_json(const Pose2D& p) {
  return nlohmann::json{{"x", p.x}, {"y", p.y}, {"heading", p.heading}};
}

inline Pose2D pose_from_json(const nlohmann::json& j) {
  return Pose2D{j.at("x").get<double>(), j.at("y").get<double>(),
                j.at("heading").get<double>()};
}

}  // namespace locgan
