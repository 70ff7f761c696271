#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "modewise/ingest.hpp"

namespace modewise {

/// Kinematic envelope for one synthetic mode. Bands sit strictly inside the
/// per-mode outlier caps so clean tracks never lose points in the pipeline.
struct ModeProfile {
  double min_speed = 0.0;        // m/s, cruise speed band
  double max_speed = 0.0;
  double max_accel = 0.0;        // m/s^2, |speed change| / interval
  double turn_sigma_deg = 0.0;   // heading random-walk step
  double stop_probability = 0.0; // per step, chance to begin a stop
  std::size_t stop_steps = 0;    // dwell length of a stop
  double interval_s = 2.0;       // sampling interval
};

std::array<ModeProfile, kNumModes> default_profiles();

struct SynthConfig {
  std::array<ModeProfile, kNumModes> profiles = default_profiles();
  std::size_t per_mode = 1;
  std::size_t points_per_track = 200;
  std::uint64_t seed = 0;
  /// Injects one over-cap position spike into the middle of every track.
  bool noise = false;
  std::size_t segment_len = 200;  // for the expected-count bookkeeping
  std::size_t min_points = 10;
  std::size_t jobs = 1;
};

struct SynthTrack {
  Trip trip;
  std::optional<std::size_t> spike_index;  // point displaced by noise mode
  std::size_t expected_samples = 0;        // chunk count after the pipeline
};

/// Tracks are ordered mode-major (all walk tracks, then bike, ...). Track j of
/// mode m draws from derive_seed(seed, m * per_mode + j).
std::vector<SynthTrack> generate(const SynthConfig& config);

/// Chunks a clean track of n points produces: n / M full chunks plus one
/// padded chunk when the remainder has at least min_pts points.
std::size_t expected_chunks(std::size_t n, std::size_t M, std::size_t min_pts);

}  // namespace modewise
