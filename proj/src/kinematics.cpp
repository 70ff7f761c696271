#include "modewise/kinematics.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <tuple>

#include "modewise/error.hpp"

namespace modewise {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

void require_finite(const GpsPoint& p) {
  if (!std::isfinite(p.lat) || !std::isfinite(p.lon)) {
    throw NumericError("non-finite coordinates in geodesic computation");
  }
}

double wrap_pi(double x) {
  x = std::remainder(x, 2.0 * std::numbers::pi);
  return x;
}

GeodesicResult vincenty_ordered(const GpsPoint& p1, const GpsPoint& p2) {
  using C = GeodesicConstants;
  constexpr double a = C::kSemiMajorAxis;
  constexpr double f = C::kFlattening;
  constexpr double b = (1.0 - f) * a;

  GeodesicResult result;
  const double L = wrap_pi((p2.lon - p1.lon) * kDegToRad);
  const double U1 = std::atan((1.0 - f) * std::tan(p1.lat * kDegToRad));
  const double U2 = std::atan((1.0 - f) * std::tan(p2.lat * kDegToRad));
  const double sinU1 = std::sin(U1), cosU1 = std::cos(U1);
  const double sinU2 = std::sin(U2), cosU2 = std::cos(U2);

  double lambda = L;
  double sin_sigma = 0.0, cos_sigma = 0.0, sigma = 0.0;
  double cos_sq_alpha = 0.0, cos_2sigma_m = 0.0;
  bool converged = false;
  for (int iter = 1; iter <= C::kMaxIterations; ++iter) {
    result.iterations = iter;
    const double sin_lambda = std::sin(lambda), cos_lambda = std::cos(lambda);
    const double t1 = cosU2 * sin_lambda;
    const double t2 = cosU1 * sinU2 - sinU1 * cosU2 * cos_lambda;
    sin_sigma = std::sqrt(t1 * t1 + t2 * t2);
    if (sin_sigma == 0.0) {
      return result;  // coincident points
    }
    cos_sigma = sinU1 * sinU2 + cosU1 * cosU2 * cos_lambda;
    sigma = std::atan2(sin_sigma, cos_sigma);
    const double sin_alpha = cosU1 * cosU2 * sin_lambda / sin_sigma;
    cos_sq_alpha = 1.0 - sin_alpha * sin_alpha;
    // Equatorial lines have cos^2(alpha) = 0.
    cos_2sigma_m = cos_sq_alpha != 0.0 ? cos_sigma - 2.0 * sinU1 * sinU2 / cos_sq_alpha : 0.0;
    const double Cc = f / 16.0 * cos_sq_alpha * (4.0 + f * (4.0 - 3.0 * cos_sq_alpha));
    const double previous = lambda;
    lambda = L + (1.0 - Cc) * f * sin_alpha *
                     (sigma + Cc * sin_sigma *
                                  (cos_2sigma_m + Cc * cos_sigma *
                                                      (-1.0 + 2.0 * cos_2sigma_m * cos_2sigma_m)));
    if (std::abs(lambda) > std::numbers::pi) break;  // diverging near the antipode
    if (std::abs(lambda - previous) < C::kLambdaTolerance) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    result.meters = haversine(p1, p2);
    result.fallback = true;
    return result;
  }

  const double u_sq = cos_sq_alpha * (a * a - b * b) / (b * b);
  const double A = 1.0 + u_sq / 16384.0 * (4096.0 + u_sq * (-768.0 + u_sq * (320.0 - 175.0 * u_sq)));
  const double B = u_sq / 1024.0 * (256.0 + u_sq * (-128.0 + u_sq * (74.0 - 47.0 * u_sq)));
  const double c2 = cos_2sigma_m * cos_2sigma_m;
  const double delta_sigma =
      B * sin_sigma *
      (cos_2sigma_m + B / 4.0 *
                          (cos_sigma * (-1.0 + 2.0 * c2) -
                           B / 6.0 * cos_2sigma_m * (-3.0 + 4.0 * sin_sigma * sin_sigma) *
                               (-3.0 + 4.0 * c2)));
  result.meters = b * A * (sigma - delta_sigma);
  return result;
}

}  // namespace

double haversine(const GpsPoint& p1, const GpsPoint& p2) {
  const double phi1 = p1.lat * kDegToRad, phi2 = p2.lat * kDegToRad;
  const double dphi = phi2 - phi1;
  const double dlambda = (p2.lon - p1.lon) * kDegToRad;
  const double h = std::sin(dphi / 2) * std::sin(dphi / 2) +
                   std::cos(phi1) * std::cos(phi2) * std::sin(dlambda / 2) * std::sin(dlambda / 2);
  return 2.0 * GeodesicConstants::kMeanRadius * std::asin(std::min(1.0, std::sqrt(h)));
}

GeodesicResult vincenty_inverse_detail(const GpsPoint& p1, const GpsPoint& p2) {
  require_finite(p1);
  require_finite(p2);
  // A fixed argument order makes the distance exactly symmetric.
  if (std::tie(p2.lat, p2.lon) < std::tie(p1.lat, p1.lon)) return vincenty_ordered(p2, p1);
  return vincenty_ordered(p1, p2);
}

double vincenty_inverse(const GpsPoint& p1, const GpsPoint& p2) {
  return vincenty_inverse_detail(p1, p2).meters;
}

double speed(const GpsPoint& p1, const GpsPoint& p2) {
  const double dt = p2.t - p1.t;
  if (!(dt > 0.0)) {
    throw DataError("speed requires strictly increasing timestamps (dt = " + std::to_string(dt) +
                    ")");
  }
  return vincenty_inverse(p1, p2) / dt;
}

double acceleration(double s1, double s2, double dt) {
  if (!(dt > 0.0)) throw DataError("acceleration requires dt > 0");
  return (s2 - s1) / dt;
}

double jerk(double a1, double a2, double dt) {
  if (!(dt > 0.0)) throw DataError("jerk requires dt > 0");
  return (a2 - a1) / dt;
}

double bearing(const GpsPoint& p1, const GpsPoint& p2) {
  const double lat1 = p1.lat * kDegToRad, lat2 = p2.lat * kDegToRad;
  const double dlon = (p2.lon - p1.lon) * kDegToRad;
  const double y = std::sin(dlon) * std::cos(lat2);
  const double x = std::cos(lat1) * std::sin(lat2) - std::sin(lat1) * std::cos(lat2) * std::cos(dlon);
  if (x == 0.0 && y == 0.0) return 0.0;
  double deg = std::atan2(y, x) / kDegToRad;
  if (deg < 0.0) deg += 360.0;
  if (deg >= 360.0) deg = 0.0;
  return deg;
}

double bearing_rate(double b1, double b2, bool wrap) {
  const double d = std::abs(b2 - b1);
  return wrap && d > 180.0 ? 360.0 - d : d;
}

KinematicSeries compute_series(std::span<const GpsPoint> points, const KinematicsOptions& options) {
  const std::size_t n = points.size();
  if (n < 2) throw DataError("kinematic series needs at least 2 points");
  KinematicSeries s;
  s.speed.assign(n, 0.0);
  s.accel.assign(n, 0.0);
  s.jerk.assign(n, 0.0);
  s.bearing_rate.assign(n, 0.0);

  std::vector<double> dt(n - 1);
  std::vector<double> bearings(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    dt[i] = points[i + 1].t - points[i].t;
    s.speed[i] = speed(points[i], points[i + 1]);
    bearings[i] = bearing(points[i], points[i + 1]);
  }
  for (std::size_t i = 0; i + 2 < n; ++i) {
    s.accel[i] = acceleration(s.speed[i], s.speed[i + 1], dt[i]);
    s.bearing_rate[i] = bearing_rate(bearings[i], bearings[i + 1], options.wrap_bearing);
  }
  for (std::size_t i = 0; i + 3 < n; ++i) {
    s.jerk[i] = jerk(s.accel[i], s.accel[i + 1], dt[i]);
  }
  return s;
}

}  // namespace modewise
