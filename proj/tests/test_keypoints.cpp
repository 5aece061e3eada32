#include "affstereo/keypoints.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace affstereo;

namespace {

Heatmap gaussian(int w, int h, double cu, double cv, double sigma, double amplitude = 1.0) {
  std::vector<float> vals(static_cast<std::size_t>(w) * h);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      vals[static_cast<std::size_t>(v) * w + u] = static_cast<float>(
          amplitude * std::exp(-((u - cu) * (u - cu) + (v - cv) * (v - cv)) / (2 * sigma * sigma)));
  return Heatmap(w, h, sigma, std::move(vals));
}

}  // namespace

TEST_CASE("keypoint: delta peak is returned exactly") {
  Heatmap h(40, 30, 2.0);
  h.at(10, 20) = 0.7f;
  const auto d = extract_keypoint(h, 2);
  CHECK(d.location.u == 10.0);
  CHECK(d.location.v == 20.0);
  CHECK(d.peak_value == doctest::Approx(0.7));
  CHECK(d.channel_index == 2);
}

TEST_CASE("keypoint: Gaussian target is localised sub-pixel and equals the exact disc centroid") {
  const Heatmap h = gaussian(64, 64, 15.4, 22.7, 5.0);
  const auto d = extract_keypoint(h, 1);
  CHECK(std::hypot(d.location.u - 15.4, d.location.v - 22.7) <= 0.1);
  const Point2 ref = oracle::disc_centroid(h.values(), 64, 64, 15, 23, 15.0);
  CHECK(d.location.u == doctest::Approx(ref.u).epsilon(1e-12));
  CHECK(d.location.v == doctest::Approx(ref.v).epsilon(1e-12));
}

TEST_CASE("keypoint: ties go to the smallest row-major index") {
  Heatmap h(50, 50, 1.0);
  h.at(30, 5) = 1.0f;   // index 5*50+30 = 280
  h.at(10, 6) = 1.0f;   // index 310
  h.at(2, 40) = 1.0f;
  const auto d = extract_keypoint(h, 1);
  CHECK(d.location.u == 30.0);
  CHECK(d.location.v == 5.0);
}

TEST_CASE("keypoint: all-zero heatmap is an error") {
  Heatmap h(8, 8, 1.0);
  CHECK_THROWS_AS(extract_keypoint(h, 1), Error);
  try {
    extract_keypoint(h, 1);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::AllZeroHeatmap);
  }
}

TEST_CASE("keypoint: integer translation shifts the result exactly") {
  const Heatmap a = gaussian(80, 80, 30.3, 31.8, 3.0);
  const Heatmap b = gaussian(80, 80, 37.3, 26.8, 3.0);
  const auto da = extract_keypoint(a, 1), db = extract_keypoint(b, 1);
  // Same samples, shifted by (7, -5): the float values are recomputed, so compare
  // through a heatmap built by literally shifting the array.
  std::vector<float> shifted(80 * 80, 0.0f);
  for (int v = 0; v < 80; ++v)
    for (int u = 0; u < 80; ++u) {
      const int su = u - 7, sv = v + 5;
      if (su >= 0 && su < 80 && sv >= 0 && sv < 80) shifted[v * 80 + u] = a.at(su, sv);
    }
  const auto ds = extract_keypoint(Heatmap(80, 80, 3.0, shifted), 1);
  CHECK(ds.location.u == da.location.u + 7.0);
  CHECK(ds.location.v == da.location.v - 5.0);
  CHECK(std::abs(db.location.u - ds.location.u) < 1e-4);
}

TEST_CASE("keypoint: symmetric pattern returns the centre pixel exactly") {
  Heatmap h(21, 21, 2.0);
  h.at(10, 10) = 1.0f;
  for (auto [du, dv] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) h.at(10 + du, 10 + dv) = 0.5f;
  for (auto [du, dv] : {std::pair{2, 2}, {-2, -2}, {2, -2}, {-2, 2}}) h.at(10 + du, 10 + dv) = 0.25f;
  const auto d = extract_keypoint(h, 1);
  CHECK(d.location.u == 10.0);
  CHECK(d.location.v == 10.0);
}

TEST_CASE("keypoint: result lies in the hull of active disc pixels, far pixels ignored") {
  Heatmap h(60, 60, 1.0);
  h.at(20, 20) = 1.0f;
  h.at(21, 20) = 0.5f;
  h.at(50, 50) = 0.9f;  // outside the 3-px disc
  const auto d = extract_keypoint(h, 1);
  CHECK(d.location.u == doctest::Approx(20.0 + 0.5 / 1.5));
  CHECK(d.location.v == 20.0);
}

TEST_CASE("keypoint: disc boundary is inclusive") {
  Heatmap h(30, 30, 1.0);
  h.at(10, 10) = 1.0f;
  h.at(13, 10) = 0.5f;  // exactly 3 sigma away
  h.at(12, 13) = 0.5f;  // sqrt(13) > 3
  const auto d = extract_keypoint(h, 1);
  CHECK(d.location.u == doctest::Approx(11.0));
  CHECK(d.location.v == 10.0);
}

TEST_CASE("heatmap: validation and file round trip") {
  CHECK_THROWS_AS(Heatmap(0, 3, 1.0), Error);
  CHECK_THROWS_AS(Heatmap(3, 3, 0.0), Error);
  CHECK_THROWS_AS(Heatmap(2, 1, 1.0, {1.0f, -1.0f}), Error);
  CHECK_THROWS_AS(Heatmap(2, 1, 1.0, {1.0f}), Error);

  const Heatmap h = gaussian(17, 9, 4.2, 3.3, 1.5);
  const auto path = std::filesystem::temp_directory_path() / "affstereo_test_heatmap.bin";
  write_heatmap(path, h);
  const Heatmap back = read_heatmap(path);
  CHECK(back.width() == 17);
  CHECK(back.height() == 9);
  CHECK(back.sigma() == 1.5);
  CHECK(back.values() == h.values());
  std::filesystem::resize_file(path, 30);
  CHECK_THROWS_AS(read_heatmap(path), Error);
  std::filesystem::remove(path);
}
