#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "modewise/ingest.hpp"

namespace modewise {

/// Geodesic and bearing constants in one place.
struct GeodesicConstants {
  static constexpr double kSemiMajorAxis = 6378137.0;             // WGS-84 a, meters
  static constexpr double kFlattening = 1.0 / 298.257223563;      // WGS-84 f
  static constexpr double kMeanRadius = 6371008.8;                // haversine fallback, meters
  static constexpr double kLambdaTolerance = 1e-12;               // radians
  static constexpr int kMaxIterations = 200;
};

struct GeodesicResult {
  double meters = 0.0;
  int iterations = 0;
  bool fallback = false;  // Vincenty did not converge; haversine distance returned
};

/// Inverse geodesic distance on the WGS-84 ellipsoid (Vincenty's iteration).
/// Throws NumericError on non-finite coordinates.
GeodesicResult vincenty_inverse_detail(const GpsPoint& p1, const GpsPoint& p2);
double vincenty_inverse(const GpsPoint& p1, const GpsPoint& p2);

double haversine(const GpsPoint& p1, const GpsPoint& p2);

/// Meters per second between two fixes; requires p2.t > p1.t.
double speed(const GpsPoint& p1, const GpsPoint& p2);
/// (s2 - s1) / dt; requires dt > 0. Deceleration is negative.
double acceleration(double s1, double s2, double dt);
/// (a2 - a1) / dt; requires dt > 0.
double jerk(double a1, double a2, double dt);

/// Initial great-circle bearing from p1 to p2 in degrees, normalized to [0, 360).
/// Coincident points give 0.
double bearing(const GpsPoint& p1, const GpsPoint& p2);

/// |b2 - b1| as written; with `wrap` the result is folded into [0, 180].
double bearing_rate(double b1, double b2, bool wrap = false);

/// Four per-point channels, index-aligned with the input points. A feature
/// assigned to point i uses points i, i+1, ...; entries that run past the end
/// of the sequence are 0.
struct KinematicSeries {
  std::vector<double> speed;
  std::vector<double> accel;
  std::vector<double> jerk;
  std::vector<double> bearing_rate;

  std::size_t size() const { return speed.size(); }
};

struct KinematicsOptions {
  bool wrap_bearing = false;
};

/// Requires at least 2 points with strictly increasing timestamps.
KinematicSeries compute_series(std::span<const GpsPoint> points,
                               const KinematicsOptions& options = {});

}  // namespace modewise
