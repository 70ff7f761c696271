#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "modewise/ingest.hpp"

namespace modewise {

/// Event thresholds for the rate features.
struct FeatureOptions {
  double heading_change_deg = 19.0;   // bearing change above this is a heading-change event
  double stop_speed = 3.4;            // point speed below this is a stop event, m/s
  double velocity_change_ratio = 0.26;  // |dV| / V above this is a velocity-change event
  double rate_distance_m = 1000.0;    // rates are events per this many meters
};

struct HandcraftedFeatures {
  double length = 0.0;             // m
  double mean_speed = 0.0;         // total distance / total duration
  double expectation_speed = 0.0;  // arithmetic mean of point speeds
  double var_speed = 0.0;          // population variance of point speeds
  std::array<double, 3> top_speeds{};  // descending, zero-filled
  std::array<double, 3> top_accels{};  // descending |a|, zero-filled
  double heading_change_rate = 0.0;
  double stop_rate = 0.0;
  double velocity_change_rate = 0.0;
  bool degenerate = false;  // zero distance, rates forced to 0

  static constexpr std::size_t kDims = 13;
  std::array<double, kDims> to_vector() const;
  static HandcraftedFeatures from_vector(std::span<const double> v);

  friend bool operator==(const HandcraftedFeatures&, const HandcraftedFeatures&) = default;
};

/// Requires at least 2 points with strictly increasing time.
HandcraftedFeatures extract_handcrafted(std::span<const GpsPoint> points,
                                        const FeatureOptions& options = {});

// Sidecar file with one JSON array of kDims numbers per line, parallel to a dataset file.
void write_features_file(const std::filesystem::path& path,
                         const std::vector<HandcraftedFeatures>& features);
std::vector<HandcraftedFeatures> read_features_file(const std::filesystem::path& path);

}  // namespace modewise
