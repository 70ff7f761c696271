#pragma once

// Shared fixtures for the unit tests: temp directories and small random generators.

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "modewise/ingest.hpp"
#include "modewise/rng.hpp"

namespace testing_support {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("modewise_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Random walk of n fixes with strictly increasing time; steps up to `step_m` meters.
inline std::vector<modewise::GpsPoint> random_track(modewise::Rng& rng, std::size_t n,
                                                    double step_m = 20.0, double dt = 2.0) {
  std::vector<modewise::GpsPoint> pts;
  double lat = rng.uniform(-60.0, 60.0), lon = rng.uniform(-170.0, 170.0), t = 1e9;
  for (std::size_t i = 0; i < n; ++i) {
    pts.push_back({lat, lon, t});
    const double h = rng.uniform(0.0, 2.0 * M_PI);
    const double d = rng.uniform(0.0, step_m);
    lat += d * std::cos(h) / 111000.0;
    lon += d * std::sin(h) / (111000.0 * std::cos(lat * M_PI / 180.0));
    t += rng.uniform(0.5, 1.5) * dt;
  }
  return pts;
}

}  // namespace testing_support
