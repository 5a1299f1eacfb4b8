#include <algorithm>
#include <map>
#include <random>
#include <vector>

#include "doctest.h"
#include "laeo/tracker.hpp"
#include "oracles.hpp"

using laeo::BoundingBox;
using laeo::DetectionSequence;
using laeo::HeadDetection;
using laeo::HeadTrack;
using laeo::LinkerConfig;
using laeo::oracle::OracleLink;
using laeo::oracle::RandomInstance;
using laeo::oracle::SameTracks;

namespace {

LinkerConfig Forward(double tau = 0.3, int max_gap = 5) {
  LinkerConfig c;
  c.overlap_threshold = tau;
  c.max_gap = max_gap;
  c.direction = laeo::LinkDirection::kForward;
  return c;
}

DetectionSequence Chain(int frames, double x0, double step, double score) {
  DetectionSequence seq;
  for (int f = 0; f < frames; ++f) {
    const double x = x0 + step * f;
    seq.frames.push_back({HeadDetection(f, {x, 10, x + 40, 50}, score)});
  }
  return seq;
}

void CheckTrackInvariants(const std::vector<HeadTrack>& tracks) {
  CHECK(laeo::oracle::TrackInvariantsHold(tracks));
}

void CheckNoDoubleClaims(const std::vector<HeadTrack>& tracks) {
  CHECK(laeo::oracle::NoDoubleClaims(tracks));
}

}  // namespace

TEST_CASE("filter top n") {
  DetectionSequence seq;
  seq.frames.resize(1);
  for (int i = 0; i < 12; ++i) {
    seq.frames[0].emplace_back(0, BoundingBox(i * 10, 0, i * 10 + 5, 5),
                               (i + 1) / 12.0);
  }
  const auto kept = laeo::FilterTopN(seq, 10);
  REQUIRE(kept.frames[0].size() == 10);
  for (const auto& d : kept.frames[0]) CHECK(d.score >= 3 / 12.0);

  DetectionSequence small;
  small.frames = {{HeadDetection(0, {0, 0, 5, 5}, 0.3),
                   HeadDetection(0, {9, 0, 15, 5}, 0.9),
                   HeadDetection(0, {5, 0, 10, 5}, 0.9)}};
  const auto all = laeo::FilterTopN(small, 10);
  REQUIRE(all.frames[0].size() == 3);
  CHECK(all.frames[0][0].box.x1() == 5);
  CHECK(all.frames[0][1].box.x1() == 9);
  CHECK(all.frames[0][2].score == 0.3);
}

TEST_CASE("link tracks examples") {
  SUBCASE("one overlapping chain gives one track") {
    const auto tracks = laeo::LinkTracks(Chain(8, 0, 2, 0.9), Forward());
    REQUIRE(tracks.size() == 1);
    CHECK(tracks[0].length() == 8);
  }

  SUBCASE("two disjoint chains give two tracks") {
    auto a = Chain(6, 0, 1, 0.9);
    const auto b = Chain(6, 300, 1, 0.8);
    for (size_t f = 0; f < a.frames.size(); ++f)
      a.frames[f].push_back(b.frames[f][0]);
    CHECK(laeo::LinkTracks(a, Forward()).size() == 2);
  }

  SUBCASE("short gap is interpolated") {
    auto seq = Chain(5, 0, 4, 0.8);
    seq.frames[2].clear();
    const auto tracks = laeo::LinkTracks(seq, Forward(0.3, 2));
    REQUIRE(tracks.size() == 1);
    const auto& t = tracks[0];
    CHECK(t.length() == 5);
    CHECK(t.interpolated_mask[2]);
    CHECK(t.boxes[2] == BoundingBox(8, 10, 48, 50));
    CHECK(t.score() == doctest::Approx(0.8));
  }

  SUBCASE("gap of max_gap frames ends the track") {
    auto seq = Chain(6, 0, 0, 0.8);
    seq.frames[2].clear();
    seq.frames[3].clear();
    const auto tracks = laeo::LinkTracks(seq, Forward(0.3, 2));
    REQUIRE(tracks.size() == 2);
    CHECK(tracks[0].end_frame() == 1);
    CHECK(tracks[1].start_frame == 4);
  }

  SUBCASE("empty input") {
    CHECK(laeo::LinkTracks(DetectionSequence{}, Forward()).empty());
  }
}

TEST_CASE("linker config validation") {
  LinkerConfig c;
  c.overlap_threshold = 1.0;
  CHECK_THROWS_AS(c.Validate(), std::invalid_argument);
  c = LinkerConfig{};
  c.top_n = 0;
  CHECK_THROWS_AS(c.Validate(), std::invalid_argument);
  c = LinkerConfig{};
  c.max_gap = 0;
  CHECK_THROWS_AS(c.Validate(), std::invalid_argument);
}

TEST_CASE("link tracks matches the brute-force oracle") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 500; ++trial) {
    const auto seq = RandomInstance(rng);
    LinkerConfig c = Forward(0.2 + 0.1 * (trial % 4), 1 + trial % 3);
    const auto got = laeo::LinkTracks(seq, c);
    const auto want = OracleLink(seq, c);
    REQUIRE(SameTracks(got, want));
    CheckTrackInvariants(got);
    CheckNoDoubleClaims(got);
  }
}

TEST_CASE("bidirectional linking") {
  SUBCASE("static head merges into one unchanged track") {
    LinkerConfig c;
    const auto seq = Chain(6, 50, 0, 0.7);
    const auto tracks = laeo::LinkBidirectional(seq, c);
    REQUIRE(tracks.size() == 1);
    CHECK(tracks[0].boxes == laeo::LinkTracks(seq, c).front().boxes);
  }

  SUBCASE("paired frames hold the corner-wise mean") {
    // Reference merge from the one-directional results.
    std::mt19937_64 rng(5);
    int corrected = 0;
    for (int trial = 0; trial < 500; ++trial) {
      const auto seq = RandomInstance(rng);
      LinkerConfig c;
      c.overlap_threshold = 0.4;
      c.max_gap = 1 + trial % 2;
      c.direction = laeo::LinkDirection::kForward;
      const auto original = laeo::RunLinker(seq, c);
      c.direction = laeo::LinkDirection::kBackward;
      const auto bwd = laeo::RunLinker(seq, c);
      const auto want = laeo::oracle::OracleMerge(original, bwd, c);
      c.direction = laeo::LinkDirection::kBidirectional;
      const auto got = laeo::RunLinker(seq, c);
      REQUIRE(SameTracks(got, want));
      if (!SameTracks(got, original)) ++corrected;
    }
    CHECK(corrected > 0);
  }

  SUBCASE("invariants on random instances") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 500; ++trial) {
      const auto seq = RandomInstance(rng);
      LinkerConfig c;
      c.max_gap = 1 + trial % 3;
      const auto tracks = laeo::LinkBidirectional(seq, c);
      CheckTrackInvariants(tracks);
      CheckNoDoubleClaims(tracks);
      CHECK(SameTracks(tracks, laeo::LinkBidirectional(seq, c)));
    }
  }
}

TEST_CASE("pair windows") {
  auto make = [](int start, int len, double x) {
    HeadTrack t;
    t.start_frame = start;
    for (int i = 0; i < len; ++i) {
      t.boxes.emplace_back(x, 0, x + 10, 10);
      t.per_frame_scores.push_back(1);
      t.interpolated_mask.push_back(false);
      t.source_detection.push_back(0);
    }
    return t;
  };
  CHECK(laeo::ExtractPairWindows({make(0, 10, 0), make(0, 10, 50)}, 10)
            .size() == 1);
  const auto w =
      laeo::ExtractPairWindows({make(0, 20, 80), make(5, 12, 10)}, 10);
  REQUIRE(w.size() == 3);
  CHECK(w[0].left_track == 1);
  CHECK(w[0].right_track == 0);
  CHECK(w[0].start_frame == 5);
  CHECK(w[2].center_frame() == 12);
  CHECK(laeo::ExtractPairWindows({make(0, 5, 0), make(5, 5, 50)}, 3).empty());
  CHECK(laeo::ExtractPairWindows({make(0, 12, 0), make(0, 12, 50)}, 10, 2)
            .size() == 2);
}
