#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "modewise/features.hpp"
#include "modewise/ingest.hpp"
#include "modewise/kinematics.hpp"

namespace modewise {

inline constexpr std::size_t kNumChannels = 4;  // speed, accel, jerk, bearing rate

/// One model input: a 4 x M channel-major float block plus its label.
struct ChannelStack {
  std::vector<float> data;  // kNumChannels * M, channel-major
  ModeLabel label = ModeLabel::Walk;
  std::uint32_t valid_len = 0;

  std::size_t length() const { return data.size() / kNumChannels; }
  float at(std::size_t channel, std::size_t i) const { return data[channel * length() + i]; }

  friend bool operator==(const ChannelStack&, const ChannelStack&) = default;
};

struct ModeCaps {
  double max_speed = 0.0;  // m/s
  double max_accel = 0.0;  // m/s^2, applied to |a|
};

/// Per-mode outlier caps.
struct Thresholds {
  std::array<ModeCaps, kNumModes> caps = {{
      {7.0, 3.0},    // walk
      {12.0, 3.0},   // bike
      {34.0, 2.0},   // bus
      {50.0, 10.0},  // driving
      {34.0, 3.0},   // train
  }};
  /// Used for unlabeled tracks, where the mode is unknown.
  ModeCaps global = {50.0, 10.0};

  const ModeCaps& operator[](ModeLabel mode) const {
    return caps[static_cast<std::size_t>(mode)];
  }
};

struct PipelineConfig {
  double max_gap_s = kDefaultTripGapSeconds;
  std::size_t segment_len = 200;  // M
  std::size_t min_points = 10;
  std::size_t sg_window = 9;
  std::size_t sg_order = 3;
  bool wrap_bearing = false;
  Thresholds thresholds;
  std::size_t jobs = 1;
};

struct Dataset {
  std::size_t M = 0;
  std::vector<ChannelStack> samples;
  /// Optional, parallel to `samples`: hand-crafted features of each chunk's points.
  std::vector<HandcraftedFeatures> features;
  std::string provenance;

  std::size_t size() const { return samples.size(); }
  bool has_features() const { return !features.empty(); }
  /// Subset in the given index order, carrying features along.
  Dataset subset(const std::vector<std::size_t>& indices) const;
  std::array<std::size_t, kNumModes> class_counts() const;
};

/// Keeps a point only if its timestamp is strictly greater than the last kept one.
std::vector<GpsPoint> drop_time_disorder(const std::vector<GpsPoint>& points);

struct FilterStats {
  std::size_t speed_drops = 0;
  std::size_t accel_drops = 0;
  std::size_t passes = 0;
};

/// Removes points until every inter-point speed is <= caps.max_speed and every
/// |acceleration| is <= caps.max_accel. Speed violations: a point shared by two
/// consecutive over-speed links is dropped; an isolated over-speed link drops the
/// point carrying that speed (the endpoint when the link touches the last point).
/// Acceleration violations drop the middle point of the offending triple.
/// Input must have strictly increasing timestamps.
std::vector<GpsPoint> filter_kinematic_outliers(const std::vector<GpsPoint>& points,
                                                const ModeCaps& caps,
                                                FilterStats* stats = nullptr);
Segment filter_kinematic_outliers(const Segment& segment, const Thresholds& thresholds,
                                  FilterStats* stats = nullptr);

std::vector<Segment> drop_short(std::vector<Segment> segments, std::size_t min_pts = 10);

/// Channels of a cleaned segment after smoothing and cap clamping, each of the segment's length.
struct SmoothedChannels {
  std::array<std::vector<double>, kNumChannels> channels;
  std::size_t size() const { return channels[0].size(); }
};

SmoothedChannels smoothed_channels(const std::vector<GpsPoint>& points, const ModeCaps& caps,
                                   const PipelineConfig& config);

struct ChunkResult {
  std::vector<ChannelStack> samples;
  std::vector<std::size_t> starts;     // index of each sample's first point in the segment
  std::size_t discarded_remainder = 0;  // points in a dropped short final chunk
};

/// Splits full-length channels into consecutive M-point chunks; a final short
/// chunk is zero-padded if it has at least min_pts points, otherwise discarded.
ChunkResult chunk_segment(const SmoothedChannels& channels, ModeLabel label, std::size_t M = 200,
                          std::size_t min_pts = 10);

struct BuildStats {
  std::size_t trips = 0;
  std::size_t segments_in = 0;
  std::size_t segments_kept = 0;
  std::size_t points_dropped_disorder = 0;
  std::size_t points_dropped_speed = 0;
  std::size_t points_dropped_accel = 0;
  std::size_t remainder_points_discarded = 0;
};

/// Cleans and chunks one trip's segments. Exposed for tests and per-trip parallelism.
Dataset build_trip_samples(const Trip& trip, const PipelineConfig& config,
                           BuildStats* stats = nullptr);

/// Full pipeline over all trips; samples are pooled in trip order, then chunk order.
/// Throws DataError("no usable segments") if nothing survives.
Dataset build_dataset(const std::vector<Trip>& trips, const PipelineConfig& config,
                      BuildStats* stats = nullptr);

/// Seeded uniform split at sample level. The train part holds round(frac * n) samples.
std::pair<Dataset, Dataset> split_train_test(const Dataset& dataset, double frac,
                                             std::uint64_t seed);

// Dataset file: "TMSG", u32 version = 1, u32 n_samples, u32 channels = 4, u32 M, then per
// sample u8 label, u32 valid_len, 4*M f32 channel-major. Everything little-endian.
void write_dataset(std::ostream& out, const Dataset& dataset);
Dataset read_dataset(std::istream& in);
void write_dataset_file(const std::filesystem::path& path, const Dataset& dataset);
/// Also loads the `<path>.feat` sidecar when present.
Dataset read_dataset_file(const std::filesystem::path& path);

}  // namespace modewise
