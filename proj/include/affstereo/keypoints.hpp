#pragma once

#include "affstereo/core.hpp"

#include <filesystem>
#include <vector>

namespace affstereo {

// One keypoint channel of a heatmap-regression output. Values are row-major,
// value(u, v) is the activation of the pixel whose centre is at column u, row v.
class Heatmap {
public:
  Heatmap(int width, int height, double sigma, std::vector<float> values);
  Heatmap(int width, int height, double sigma);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  double sigma() const noexcept { return sigma_; }

  float at(int u, int v) const { return values_[static_cast<std::size_t>(v) * width_ + u]; }
  float& at(int u, int v) { return values_[static_cast<std::size_t>(v) * width_ + u]; }
  const std::vector<float>& values() const noexcept { return values_; }

private:
  int width_;
  int height_;
  double sigma_;
  std::vector<float> values_;
};

struct KeypointDetection {
  Point2 location;
  double peak_value = 0.0;
  int channel_index = 1;
};

// Sub-pixel keypoint: activation-weighted centroid of the pixels whose centres
// lie within 3*sigma of the global maximum. Ties for the maximum go to the
// smallest row-major index. Throws AllZeroHeatmap when nothing is active.
KeypointDetection extract_keypoint(const Heatmap& h, int channel_index);

// File format: ASCII header line "width height sigma\n" followed by
// width*height little-endian float32 values in row-major order.
Heatmap read_heatmap(const std::filesystem::path& path);
void write_heatmap(const std::filesystem::path& path, const Heatmap& h);

}  // namespace affstereo
