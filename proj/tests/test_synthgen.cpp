#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "modewise/kinematics.hpp"
#include "modewise/pipeline.hpp"
#include "modewise/synthgen.hpp"

using namespace modewise;

namespace {

std::vector<GpsPoint> raw_points(const Trip& trip) {
  std::vector<GpsPoint> out;
  for (const auto& lp : trip.points) out.push_back(lp.point);
  return out;
}

}  // namespace

TEST(Synthgen, ExpectedChunks) {
  EXPECT_EQ(expected_chunks(200, 200, 10), 1u);
  EXPECT_EQ(expected_chunks(450, 200, 10), 3u);
  EXPECT_EQ(expected_chunks(405, 200, 10), 2u);
  EXPECT_EQ(expected_chunks(410, 200, 10), 3u);
  EXPECT_EQ(expected_chunks(9, 200, 10), 0u);
}

TEST(Synthgen, SingleWalkTrackGivesOneSample) {
  SynthConfig cfg;
  cfg.per_mode = 1;
  cfg.points_per_track = 200;
  cfg.seed = 11;
  const auto tracks = generate(cfg);
  ASSERT_EQ(tracks.size(), kNumModes);
  EXPECT_EQ(tracks[0].trip.points.front().mode, ModeLabel::Walk);
  const auto ds = build_trip_samples(tracks[0].trip, PipelineConfig{});
  EXPECT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.samples[0].label, ModeLabel::Walk);
  EXPECT_EQ(ds.samples[0].valid_len, 200u);
}

TEST(Synthgen, SampleCountMatchesBookkeeping) {
  SynthConfig cfg;
  cfg.per_mode = 100;
  cfg.points_per_track = 450;
  cfg.seed = 5;
  const auto tracks = generate(cfg);
  std::vector<Trip> trips;
  std::size_t expected = 0;
  for (const auto& t : tracks) {
    trips.push_back(t.trip);
    expected += t.expected_samples;
  }
  EXPECT_EQ(expected, 1500u);
  BuildStats stats;
  const auto ds = build_dataset(trips, PipelineConfig{}, &stats);
  EXPECT_EQ(ds.size(), 1500u);
  EXPECT_EQ(stats.points_dropped_speed + stats.points_dropped_accel, 0u);
  for (auto c : ds.class_counts()) EXPECT_EQ(c, 300u);
}

TEST(Synthgen, NoiseSpikeIsExactlyTheDroppedPoint) {
  SynthConfig cfg;
  cfg.per_mode = 20;
  cfg.points_per_track = 120;
  cfg.noise = true;
  cfg.seed = 9;
  const Thresholds th;
  for (const auto& track : generate(cfg)) {
    ASSERT_TRUE(track.spike_index.has_value());
    const auto mode = track.trip.points.front().mode;
    auto want = raw_points(track.trip);
    const auto got = filter_kinematic_outliers(want, th[mode]);
    want.erase(want.begin() + static_cast<std::ptrdiff_t>(*track.spike_index));
    ASSERT_EQ(got, want) << track.trip.user_id;
    EXPECT_EQ(track.expected_samples, expected_chunks(119, 200, 10));
  }
}

TEST(Synthgen, CleanTracksRespectTheirBands) {
  SynthConfig cfg;
  cfg.per_mode = 30;
  cfg.points_per_track = 300;
  cfg.seed = 21;
  const Thresholds th;
  constexpr double tol = 1e-3;
  for (const auto& track : generate(cfg)) {
    const auto mode = track.trip.points.front().mode;
    const auto& p = cfg.profiles[static_cast<std::size_t>(mode)];
    const auto pts = raw_points(track.trip);
    std::vector<double> v;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      ASSERT_EQ(pts[i].t - pts[i - 1].t, p.interval_s);
      v.push_back(speed(pts[i - 1], pts[i]));
    }
    for (double s : v) {
      const double lo = p.stop_probability > 0.0 ? 0.0 : p.min_speed;
      ASSERT_GE(s, lo - tol) << track.trip.user_id;
      ASSERT_LE(s, p.max_speed + tol) << track.trip.user_id;
      ASSERT_LE(s, th[mode].max_speed);
    }
    for (std::size_t i = 1; i < v.size(); ++i) {
      ASSERT_LE(std::abs(v[i] - v[i - 1]) / p.interval_s, p.max_accel + tol) << track.trip.user_id;
    }
    for (const auto& lp : track.trip.points) ASSERT_EQ(lp.mode, mode);
  }
}

TEST(Synthgen, DeterministicAcrossJobsAndSerializable) {
  SynthConfig cfg;
  cfg.per_mode = 6;
  cfg.points_per_track = 250;
  cfg.seed = 77;
  cfg.noise = true;
  const auto a = generate(cfg);
  cfg.jobs = 3;
  const auto b = generate(cfg);
  ASSERT_EQ(a.size(), b.size());
  std::vector<Trip> trips;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].trip, b[i].trip);
    EXPECT_EQ(a[i].spike_index, b[i].spike_index);
    trips.push_back(a[i].trip);
  }
  std::stringstream ss;
  write_trips(ss, trips);
  const auto back = read_trips(ss);
  ASSERT_EQ(back.size(), trips.size());
  for (std::size_t i = 0; i < trips.size(); ++i) {
    ASSERT_EQ(back[i].user_id, trips[i].user_id);
    ASSERT_EQ(back[i].points.size(), trips[i].points.size());
    for (std::size_t j = 0; j < trips[i].points.size(); ++j) {
      EXPECT_EQ(back[i].points[j], trips[i].points[j]);
    }
  }
  cfg.seed = 78;
  EXPECT_NE(generate(cfg)[0].trip, a[0].trip);
}
