#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace modewise {

/// One timestamped fix. `t` is seconds since the Unix epoch, read as naive UTC.
struct GpsPoint {
  double lat = 0.0;
  double lon = 0.0;
  double t = 0.0;

  friend bool operator==(const GpsPoint&, const GpsPoint&) = default;
};

/// Integer codes are part of every file format; do not reorder.
enum class ModeLabel : std::uint8_t { Walk = 0, Bike = 1, Bus = 2, Driving = 3, Train = 4 };

inline constexpr std::size_t kNumModes = 5;
inline constexpr std::array<std::string_view, kNumModes> kModeNames = {"walk", "bike", "bus",
                                                                        "driving", "train"};

std::string_view mode_name(ModeLabel mode);
/// Checked conversion from an integer code; throws DataError outside 0..4.
ModeLabel mode_from_code(int code);

struct LabelInterval {
  double start = 0.0;
  double end = 0.0;
  std::optional<ModeLabel> mode;  // nullopt: raw mode is not a ground mode, points are excluded
};

struct LabeledPoint {
  GpsPoint point;
  ModeLabel mode = ModeLabel::Walk;

  friend bool operator==(const LabeledPoint&, const LabeledPoint&) = default;
};

struct Trip {
  std::string user_id;
  std::vector<LabeledPoint> points;

  friend bool operator==(const Trip&, const Trip&) = default;
};

struct Segment {
  std::vector<GpsPoint> points;
  ModeLabel mode = ModeLabel::Walk;
  std::string trip_ref;
};

struct PltParseResult {
  std::vector<GpsPoint> points;
  std::size_t skipped_lines = 0;
  bool truncated_header = false;  // fewer than 6 lines in the file
};

struct LabelParseResult {
  std::vector<LabelInterval> intervals;
  std::size_t skipped_lines = 0;
};

/// Seconds since epoch for a proleptic Gregorian UTC date/time.
double epoch_seconds(int year, int month, int day, int hour, int minute, int second);

/// Parses a GeoLife trajectory file: six header lines, then
/// `lat,lon,0,alt_ft,days_since_1899-12-30,YYYY-MM-DD,HH:MM:SS`.
PltParseResult parse_plt(std::string_view text);

/// Parses a GeoLife labels.txt (`Start Time\tEnd Time\tTransportation Mode`, one header line).
LabelParseResult parse_labels(std::string_view text);

/// walk, bike, bus -> themselves; car, taxi -> Driving; train, subway, railway -> Train;
/// anything else -> nullopt. Case-insensitive, surrounding whitespace ignored.
std::optional<ModeLabel> map_mode(std::string_view raw);

/// Each point takes the mode of the first interval (file order) containing its timestamp,
/// bounds inclusive. Unlabeled points and points in excluded-mode intervals are dropped.
std::vector<LabeledPoint> attach_labels(const std::vector<GpsPoint>& points,
                                        const std::vector<LabelInterval>& intervals);

inline constexpr double kDefaultTripGapSeconds = 1200.0;

/// Starts a new trip whenever consecutive points are more than `gap_s` apart.
std::vector<Trip> split_trips(const std::vector<LabeledPoint>& points, const std::string& user_id,
                              double gap_s = kDefaultTripGapSeconds);

/// Maximal label-homogeneous runs of a trip, in order.
std::vector<Segment> split_segments(const Trip& trip, const std::string& trip_ref = {});

/// Concatenates neighbouring segments that share a mode.
std::vector<Segment> merge_adjacent(std::vector<Segment> segments);

// Trips file: one JSON object per line, {"user": ..., "points": [[lat, lon, t, mode], ...]}.
std::string trip_to_json_line(const Trip& trip);
Trip trip_from_json_line(std::string_view line);
void write_trips(std::ostream& out, const std::vector<Trip>& trips);
std::vector<Trip> read_trips(std::istream& in);
void write_trips_file(const std::filesystem::path& path, const std::vector<Trip>& trips);
std::vector<Trip> read_trips_file(const std::filesystem::path& path);

struct IngestStats {
  std::size_t users = 0;
  std::size_t plt_files = 0;
  std::size_t points = 0;
  std::size_t labeled_points = 0;
  std::size_t skipped_lines = 0;
  std::size_t trips = 0;
};

/// Walks `<root>/Data/<user>/Trajectory/*.plt` (or `<root>/<user>/...` when `root`
/// is itself the Data directory). Users without labels.txt contribute nothing.
/// Users are processed in sorted order; `jobs` > 1 parses users concurrently.
std::vector<Trip> ingest_geolife(const std::filesystem::path& root, double gap_s,
                                 std::size_t jobs, IngestStats* stats = nullptr);

}  // namespace modewise
