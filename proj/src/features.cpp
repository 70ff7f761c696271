#include "modewise/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <string>

#include <nlohmann/json.hpp>

#include "modewise/error.hpp"
#include "modewise/kinematics.hpp"

namespace modewise {
namespace {

std::array<double, 3> top_three(std::vector<double> values) {
  std::sort(values.begin(), values.end(), std::greater<>());
  std::array<double, 3> top{};
  for (std::size_t i = 0; i < top.size() && i < values.size(); ++i) top[i] = values[i];
  return top;
}

}  // namespace

std::array<double, HandcraftedFeatures::kDims> HandcraftedFeatures::to_vector() const {
  return {length,        mean_speed,    expectation_speed, var_speed,
          top_speeds[0], top_speeds[1], top_speeds[2],     top_accels[0],
          top_accels[1], top_accels[2], heading_change_rate, stop_rate,
          velocity_change_rate};
}

HandcraftedFeatures HandcraftedFeatures::from_vector(std::span<const double> v) {
  if (v.size() != kDims) throw DataError("feature vector must have 13 entries");
  HandcraftedFeatures f;
  f.length = v[0];
  f.mean_speed = v[1];
  f.expectation_speed = v[2];
  f.var_speed = v[3];
  f.top_speeds = {v[4], v[5], v[6]};
  f.top_accels = {v[7], v[8], v[9]};
  f.heading_change_rate = v[10];
  f.stop_rate = v[11];
  f.velocity_change_rate = v[12];
  f.degenerate = f.length == 0.0;
  return f;
}

HandcraftedFeatures extract_handcrafted(std::span<const GpsPoint> points,
                                        const FeatureOptions& options) {
  const std::size_t n = points.size();
  if (n < 2) throw DataError("hand-crafted features need at least 2 points");
  HandcraftedFeatures f;

  std::vector<double> speeds(n - 1), bearings(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double d = vincenty_inverse(points[i], points[i + 1]);
    const double dt = points[i + 1].t - points[i].t;
    if (!(dt > 0.0)) throw DataError("hand-crafted features need strictly increasing time");
    f.length += d;
    speeds[i] = d / dt;
    bearings[i] = bearing(points[i], points[i + 1]);
  }
  const double duration = points[n - 1].t - points[0].t;
  f.mean_speed = f.length / duration;

  double sum = 0.0;
  for (double s : speeds) sum += s;
  f.expectation_speed = sum / static_cast<double>(speeds.size());
  double sq = 0.0;
  for (double s : speeds) sq += (s - f.expectation_speed) * (s - f.expectation_speed);
  f.var_speed = sq / static_cast<double>(speeds.size());
  f.top_speeds = top_three(speeds);

  std::vector<double> accels;
  std::size_t heading_events = 0, velocity_events = 0, stop_events = 0;
  for (std::size_t i = 0; i + 2 < n; ++i) {
    const double dt = points[i + 1].t - points[i].t;
    accels.push_back(std::abs(speeds[i + 1] - speeds[i]) / dt);
    if (bearing_rate(bearings[i], bearings[i + 1], true) > options.heading_change_deg) {
      ++heading_events;
    }
    if (speeds[i] > 0.0 &&
        std::abs(speeds[i + 1] - speeds[i]) / speeds[i] > options.velocity_change_ratio) {
      ++velocity_events;
    }
  }
  for (double s : speeds) {
    if (s < options.stop_speed) ++stop_events;
  }
  f.top_accels = top_three(accels);

  if (f.length > 0.0) {
    const double units = f.length / options.rate_distance_m;
    f.heading_change_rate = static_cast<double>(heading_events) / units;
    f.stop_rate = static_cast<double>(stop_events) / units;
    f.velocity_change_rate = static_cast<double>(velocity_events) / units;
  } else {
    f.degenerate = true;
  }
  return f;
}

void write_features_file(const std::filesystem::path& path,
                         const std::vector<HandcraftedFeatures>& features) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& f : features) {
    const auto v = f.to_vector();
    out << nlohmann::json(std::vector<double>(v.begin(), v.end())).dump() << '\n';
  }
}

std::vector<HandcraftedFeatures> read_features_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<HandcraftedFeatures> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto v = nlohmann::json::parse(line).get<std::vector<double>>();
      out.push_back(HandcraftedFeatures::from_vector(v));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("bad feature line: ") + e.what());
    }
  }
  return out;
}

}  // namespace modewise
