#include <random>

#include "doctest.h"
#include "laeo/core.hpp"

using laeo::BoundingBox;

namespace {

BoundingBox RandomBox(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(-50.0, 150.0);
  std::uniform_real_distribution<double> size(0.5, 80.0);
  const double x = pos(rng), y = pos(rng);
  return BoundingBox(x, y, x + size(rng), y + size(rng));
}

}  // namespace

TEST_CASE("iou worked examples") {
  const BoundingBox b(3, 4, 20, 30);
  CHECK(laeo::Iou(b, b) == 1.0);
  CHECK(laeo::Iou({0, 0, 10, 10}, {20, 20, 30, 30}) == 0.0);
  // intersection 50, union 150
  CHECK(laeo::Iou({0, 0, 10, 10}, {5, 0, 15, 10}) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("intersection over head area worked examples") {
  CHECK(laeo::IntersectionOverHeadArea({10, 10, 20, 20}, {0, 0, 100, 100}) ==
        1.0);
  CHECK(laeo::IntersectionOverHeadArea({0, 0, 10, 10}, {50, 50, 60, 60}) ==
        0.0);
  CHECK(laeo::IntersectionOverHeadArea({0, 0, 10, 10}, {5, 0, 100, 100}) ==
        0.5);
}

TEST_CASE("degenerate boxes are rejected") {
  CHECK_THROWS_AS(BoundingBox(0, 0, 0, 10), std::invalid_argument);
  CHECK_THROWS_AS(BoundingBox(5, 0, 1, 10), std::invalid_argument);
  CHECK_THROWS_AS(BoundingBox(0, 3, 10, 3), std::invalid_argument);
  CHECK(BoundingBox::FromXYWH(1, 2, 3, 4) == BoundingBox(1, 2, 4, 6));
}

TEST_CASE("overlap measures stay in [0,1] and iou is symmetric") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 5000; ++i) {
    const BoundingBox a = RandomBox(rng);
    const BoundingBox b = RandomBox(rng);
    const double ab = laeo::Iou(a, b);
    CHECK(ab == laeo::Iou(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    const double h = laeo::IntersectionOverHeadArea(a, b);
    CHECK(h >= 0.0);
    CHECK(h <= 1.0);
  }
}

TEST_CASE("left/right ordering uses center x then center y") {
  CHECK(laeo::IsLeftOf({0, 0, 10, 10}, {20, 0, 30, 10}));
  CHECK_FALSE(laeo::IsLeftOf({20, 0, 30, 10}, {0, 0, 10, 10}));
  CHECK(laeo::IsLeftOf({0, 0, 10, 10}, {0, 20, 10, 30}));
}

TEST_CASE("pose angles validate range and normalize by pi") {
  CHECK_THROWS(laeo::PoseAngles(4.0, 0.0, 0.0));
  const auto p = laeo::PoseAngles::FromNormalized(0.5, -0.25, 0.0);
  const auto n = p.normalized();
  CHECK(n[0] == doctest::Approx(0.5));
  CHECK(n[1] == doctest::Approx(-0.25));
}

TEST_CASE("crop and resize") {
  laeo::Image gray(100, 120, 3, 128.0f);

  SUBCASE("64x64 box on a constant frame gives a constant crop") {
    const auto crop = laeo::CropAndResize(gray, {10, 20, 74, 84});
    REQUIRE(crop.height() == 64);
    REQUIRE(crop.width() == 64);
    for (float v : crop.data()) CHECK(v == 128.0f);
  }

  SUBCASE("128x128 box yields a 64x64x3 crop") {
    laeo::Image big(200, 200, 3, 7.0f);
    const auto crop = laeo::CropAndResize(big, {0, 0, 128, 128});
    CHECK(crop.height() == 64);
    CHECK(crop.width() == 64);
    CHECK(crop.channels() == 3);
  }

  SUBCASE("box half outside the frame is zero padded on that half") {
    laeo::Image frame(64, 64, 3, 128.0f);
    const auto crop = laeo::CropAndResize(frame, {-32, 0, 32, 64});
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) {
        for (int c = 0; c < 3; ++c) {
          CHECK(crop.at(y, x, c) == (x < 32 ? 0.0f : 128.0f));
        }
      }
    }
  }

  SUBCASE("box fully outside the frame is an error") {
    CHECK_THROWS_AS(laeo::CropAndResize(gray, {200, 200, 264, 264}),
                    std::invalid_argument);
  }

  SUBCASE("identity crop reproduces the source pixels") {
    laeo::Image src(64, 64, 3);
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        for (int c = 0; c < 3; ++c) src.at(y, x, c) = float(x * 3 + y + c);
    CHECK(laeo::CropAndResize(src, {0, 0, 64, 64}) == src);
  }
}

TEST_CASE("crop normalization maps [0,255] to [-1,1]") {
  laeo::Image im(1, 2, 3);
  im.at(0, 0, 0) = 0.0f;
  im.at(0, 1, 0) = 255.0f;
  const auto n = laeo::NormalizeCrop(im);
  CHECK(n.at(0, 0, 0) == -1.0f);
  CHECK(n.at(0, 1, 0) == 1.0f);
}

TEST_CASE("head track validation") {
  laeo::HeadTrack t;
  CHECK_THROWS_AS(t.Validate(), std::logic_error);
  t.boxes = {BoundingBox(0, 0, 1, 1)};
  t.per_frame_scores = {0.5};
  t.interpolated_mask = {false};
  t.source_detection = {0};
  CHECK_NOTHROW(t.Validate());
  t.per_frame_scores.push_back(0.2);
  CHECK_THROWS_AS(t.Validate(), std::logic_error);
}
