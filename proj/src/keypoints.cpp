#include "affstereo/keypoints.hpp"

#include "affstereo/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace affstereo {

Heatmap::Heatmap(int width, int height, double sigma, std::vector<float> values)
    : width_(width), height_(height), sigma_(sigma), values_(std::move(values)) {
  if (width <= 0 || height <= 0) fail(ErrorKind::InvalidArgument, "heatmap: empty grid");
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    fail(ErrorKind::InvalidArgument, "heatmap: sigma must be > 0");
  if (values_.size() != static_cast<std::size_t>(width) * height)
    fail(ErrorKind::InvalidArgument, "heatmap: value count does not match width*height");
  for (float x : values_)
    if (!std::isfinite(x) || x < 0.0f)
      fail(ErrorKind::InvalidArgument, "heatmap: activations must be finite and non-negative");
}

Heatmap::Heatmap(int width, int height, double sigma)
    : Heatmap(width, height, sigma,
              std::vector<float>(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0),
                                 0.0f)) {}

KeypointDetection extract_keypoint(const Heatmap& h, int channel_index) {
  const auto& vals = h.values();
  std::size_t best = 0;
  for (std::size_t i = 1; i < vals.size(); ++i)
    if (vals[i] > vals[best]) best = i;  // strict: first maximum wins
  if (vals[best] <= 0.0f) fail(ErrorKind::AllZeroHeatmap, "heatmap has no positive activation");

  const int cu = static_cast<int>(best % h.width());
  const int cv = static_cast<int>(best / h.width());
  const double radius = 3.0 * h.sigma();
  const double r2 = radius * radius;
  const int reach = static_cast<int>(std::floor(radius));

  double mass = 0.0, su = 0.0, sv = 0.0;
  for (int dv = -reach; dv <= reach; ++dv) {
    const int v = cv + dv;
    if (v < 0 || v >= h.height()) continue;
    for (int du = -reach; du <= reach; ++du) {
      const int u = cu + du;
      if (u < 0 || u >= h.width()) continue;
      if (static_cast<double>(du * du + dv * dv) > r2) continue;
      const double p = h.at(u, v);
      mass += p;
      su += p * du;
      sv += p * dv;
    }
  }
  // Offsets are accumulated relative to the peak so that integer shifts of the
  // heatmap shift the result exactly.
  KeypointDetection det;
  det.location = {cu + su / mass, cv + sv / mass};
  det.peak_value = vals[best];
  det.channel_index = channel_index;
  return det;
}

Heatmap read_heatmap(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open heatmap " + path.string());
  std::string header;
  if (!std::getline(in, header)) fail(ErrorKind::ParseError, "heatmap: missing header");
  std::istringstream hs(header);
  int width = 0, height = 0;
  double sigma = 0.0;
  if (!(hs >> width >> height >> sigma))
    fail(ErrorKind::ParseError, "heatmap: header must be 'width height sigma'");
  if (width <= 0 || height <= 0) fail(ErrorKind::ParseError, "heatmap: bad dimensions");

  const std::size_t count = static_cast<std::size_t>(width) * height;
  std::vector<float> values(count);
  std::vector<unsigned char> raw(count * 4);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size())
    fail(ErrorKind::ParseError, "heatmap: truncated payload");
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = std::uint32_t(raw[4 * i]) | std::uint32_t(raw[4 * i + 1]) << 8 |
                         std::uint32_t(raw[4 * i + 2]) << 16 | std::uint32_t(raw[4 * i + 3]) << 24;
    values[i] = std::bit_cast<float>(bits);
  }
  try {
    return Heatmap(width, height, sigma, std::move(values));
  } catch (const Error& e) {
    fail(ErrorKind::ParseError, e.what());
  }
}

void write_heatmap(const std::filesystem::path& path, const Heatmap& h) {
  std::string data = std::to_string(h.width()) + " " + std::to_string(h.height()) + " " +
                     format_double(h.sigma()) + "\n";
  data.reserve(data.size() + h.values().size() * 4);
  for (float x : h.values()) {
    const auto bits = std::bit_cast<std::uint32_t>(x);
    for (int b = 0; b < 4; ++b) data.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
  }
  write_file_atomic(path, data);
}

}  // namespace affstereo
