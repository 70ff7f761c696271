#include "modewise/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "modewise/parallel.hpp"
#include "modewise/pipeline.hpp"
#include "modewise/rng.hpp"

namespace modewise {
namespace {

constexpr double kA = 6378137.0;
constexpr double kF = 1.0 / 298.257223563;
constexpr double kE2 = kF * (2.0 - kF);
constexpr double kDeg = std::numbers::pi / 180.0;

// Moves (lat, lon) by (north, east) meters using the local WGS-84 radii.
void step_flat(double& lat, double& lon, double north, double east) {
  const double s = std::sin(lat * kDeg);
  const double w = 1.0 - kE2 * s * s;
  const double meridional = kA * (1.0 - kE2) / (w * std::sqrt(w));
  const double normal = kA / std::sqrt(w);
  lat += north / meridional / kDeg;
  lon += east / (normal * std::cos(lat * kDeg)) / kDeg;
}

SynthTrack make_track(const ModeProfile& p, ModeLabel mode, std::size_t index,
                      const SynthConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t K = config.points_per_track;
  SynthTrack track;
  track.trip.user_id = "synth_" + std::string(mode_name(mode)) + "_" + std::to_string(index);
  track.trip.points.reserve(K);

  double lat = 39.9 + rng.uniform(-0.1, 0.1);
  double lon = 116.4 + rng.uniform(-0.1, 0.1);
  double t = 1.2e9 + std::floor(rng.uniform(0.0, 1e7));
  double heading = rng.uniform(0.0, 360.0);
  double v = rng.uniform(p.min_speed, p.max_speed);
  const double dv_max = p.max_accel * p.interval_s;

  // Stop state machine: decelerate to 0, dwell, accelerate back into the band.
  enum class Stop { Cruise, Braking, Dwell, Leaving } stop = Stop::Cruise;
  std::size_t dwell_left = 0;

  for (std::size_t i = 0; i < K; ++i) {
    track.trip.points.push_back({{lat, lon, t}, mode});
    if (i + 1 == K) break;
    switch (stop) {
      case Stop::Cruise:
        if (p.stop_probability > 0.0 && rng.uniform() < p.stop_probability) {
          stop = Stop::Braking;
        } else {
          v = std::clamp(v + rng.uniform(-dv_max, dv_max), p.min_speed, p.max_speed);
        }
        break;
      case Stop::Braking:
        break;
      case Stop::Dwell:
        if (dwell_left == 0) stop = Stop::Leaving;
        break;
      case Stop::Leaving:
        break;
    }
    if (stop == Stop::Braking) {
      v = std::max(0.0, v - dv_max);
      if (v == 0.0) {
        stop = Stop::Dwell;
        dwell_left = p.stop_steps;
      }
    } else if (stop == Stop::Dwell) {
      --dwell_left;
    } else if (stop == Stop::Leaving) {
      v = std::min(p.min_speed, v + dv_max);
      if (v >= p.min_speed) stop = Stop::Cruise;
    }
    if (v > 0.0) heading += rng.normal() * p.turn_sigma_deg;
    heading = std::fmod(heading + 360.0, 360.0);
    const double d = v * p.interval_s;
    step_flat(lat, lon, d * std::cos(heading * kDeg), d * std::sin(heading * kDeg));
    t += p.interval_s;
  }

  std::size_t n_kept = K;
  if (config.noise && K >= 3) {
    const std::size_t m = K / 2;
    const double cap = Thresholds{}[mode].max_speed;
    // Perpendicular offset large enough that both links to the neighbours
    // exceed the cap by at least 1 m/s.
    const double offset = (cap + 1.0) * p.interval_s + p.max_speed * p.interval_s;
    auto& pt = track.trip.points[m].point;
    const double side = heading + 90.0;
    step_flat(pt.lat, pt.lon, offset * std::cos(side * kDeg), offset * std::sin(side * kDeg));
    track.spike_index = m;
    n_kept = K - 1;
  }
  track.expected_samples = expected_chunks(n_kept, config.segment_len, config.min_points);
  return track;
}

}  // namespace

std::array<ModeProfile, kNumModes> default_profiles() {
  std::array<ModeProfile, kNumModes> p{};
  p[static_cast<std::size_t>(ModeLabel::Walk)] = {0.5, 2.0, 0.5, 30.0, 0.0, 0, 2.0};
  p[static_cast<std::size_t>(ModeLabel::Bike)] = {2.0, 6.0, 1.0, 10.0, 0.0, 0, 2.0};
  p[static_cast<std::size_t>(ModeLabel::Bus)] = {3.0, 15.0, 1.0, 4.0, 0.03, 10, 2.0};
  p[static_cast<std::size_t>(ModeLabel::Driving)] = {5.0, 25.0, 3.0, 6.0, 0.0, 0, 2.0};
  p[static_cast<std::size_t>(ModeLabel::Train)] = {10.0, 30.0, 0.5, 0.3, 0.0, 0, 2.0};
  return p;
}

std::size_t expected_chunks(std::size_t n, std::size_t M, std::size_t min_pts) {
  const std::size_t rem = n % M;
  return n / M + ((rem > 0 && rem >= min_pts) ? 1 : 0);
}

std::vector<SynthTrack> generate(const SynthConfig& config) {
  const std::size_t total = kNumModes * config.per_mode;
  return parallel_map<SynthTrack>(total, config.jobs, [&](std::size_t k) {
    const std::size_t m = k / config.per_mode;
    const auto mode = static_cast<ModeLabel>(m);
    return make_track(config.profiles[m], mode, k % config.per_mode, config,
                      derive_seed(config.seed, k));
  });
}

}  // namespace modewise
