#include "modewise/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "modewise/error.hpp"
#include "modewise/log.hpp"
#include "modewise/parallel.hpp"

namespace modewise {
namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = end + 1;
  }
  return lines;
}

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (true) {
    const std::size_t end = line.find(sep, pos);
    if (end == std::string_view::npos) {
      fields.push_back(line.substr(pos));
      return fields;
    }
    fields.push_back(line.substr(pos, end - pos));
    pos = end + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

bool parse_int(std::string_view s, int& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

// "YYYY?MM?DD" with any single-character separator.
bool parse_date(std::string_view s, int& y, int& m, int& d) {
  s = trim(s);
  if (s.size() != 10) return false;
  if (!parse_int(s.substr(0, 4), y) || !parse_int(s.substr(5, 2), m) ||
      !parse_int(s.substr(8, 2), d)) {
    return false;
  }
  return m >= 1 && m <= 12 && d >= 1 && d <= 31;
}

bool parse_time(std::string_view s, int& hh, int& mm, int& ss) {
  s = trim(s);
  if (s.size() != 8 || s[2] != ':' || s[5] != ':') return false;
  if (!parse_int(s.substr(0, 2), hh) || !parse_int(s.substr(3, 2), mm) ||
      !parse_int(s.substr(6, 2), ss)) {
    return false;
  }
  return hh >= 0 && hh < 24 && mm >= 0 && mm < 60 && ss >= 0 && ss < 61;
}

// "YYYY/MM/DD HH:MM:SS"
bool parse_datetime(std::string_view s, double& t) {
  s = trim(s);
  const std::size_t space = s.find(' ');
  if (space == std::string_view::npos) return false;
  int y, mo, d, h, mi, se;
  if (!parse_date(s.substr(0, space), y, mo, d) || !parse_time(s.substr(space + 1), h, mi, se)) {
    return false;
  }
  t = epoch_seconds(y, mo, d, h, mi, se);
  return true;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

std::string_view mode_name(ModeLabel mode) { return kModeNames[static_cast<std::size_t>(mode)]; }

ModeLabel mode_from_code(int code) {
  if (code < 0 || code >= static_cast<int>(kNumModes)) {
    throw DataError("mode code out of range: " + std::to_string(code));
  }
  return static_cast<ModeLabel>(code);
}

double epoch_seconds(int year, int month, int day, int hour, int minute, int second) {
  using namespace std::chrono;
  const sys_days days{std::chrono::year{year} / month / day};
  return static_cast<double>(days.time_since_epoch().count()) * 86400.0 + hour * 3600.0 +
         minute * 60.0 + second;
}

PltParseResult parse_plt(std::string_view text) {
  PltParseResult result;
  const auto lines = split_lines(text);
  if (lines.size() < 6) {
    result.truncated_header = true;
    spdlog::warn("trajectory file has {} lines, expected a 6-line header", lines.size());
    return result;
  }
  for (std::size_t i = 6; i < lines.size(); ++i) {
    const std::string_view line = lines[i];
    if (trim(line).empty()) continue;
    const auto f = split_fields(line, ',');
    GpsPoint p;
    int y, mo, d, h, mi, s;
    if (f.size() < 7 || !parse_double(f[0], p.lat) || !parse_double(f[1], p.lon) ||
        !parse_date(f[5], y, mo, d) || !parse_time(f[6], h, mi, s) || p.lat < -90.0 ||
        p.lat > 90.0 || p.lon < -180.0 || p.lon > 180.0) {
      ++result.skipped_lines;
      continue;
    }
    p.t = epoch_seconds(y, mo, d, h, mi, s);
    if (p.t < 0.0) {
      ++result.skipped_lines;
      continue;
    }
    result.points.push_back(p);
  }
  if (result.skipped_lines > 0) {
    spdlog::warn("skipped {} malformed trajectory lines", result.skipped_lines);
  }
  return result;
}

std::optional<ModeLabel> map_mode(std::string_view raw) {
  std::string mode(trim(raw));
  std::transform(mode.begin(), mode.end(), mode.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (mode == "walk") return ModeLabel::Walk;
  if (mode == "bike") return ModeLabel::Bike;
  if (mode == "bus") return ModeLabel::Bus;
  if (mode == "car" || mode == "taxi") return ModeLabel::Driving;
  if (mode == "train" || mode == "subway" || mode == "railway") return ModeLabel::Train;
  return std::nullopt;
}

LabelParseResult parse_labels(std::string_view text) {
  LabelParseResult result;
  const auto lines = split_lines(text);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto f = split_fields(lines[i], '\t');
    LabelInterval interval;
    if (f.size() < 3 || !parse_datetime(f[0], interval.start) ||
        !parse_datetime(f[1], interval.end)) {
      ++result.skipped_lines;
      continue;
    }
    if (interval.end < interval.start) {
      spdlog::warn("label interval ends before it starts, dropped: {}", lines[i]);
      ++result.skipped_lines;
      continue;
    }
    interval.mode = map_mode(f[2]);
    result.intervals.push_back(interval);
  }
  return result;
}

std::vector<LabeledPoint> attach_labels(const std::vector<GpsPoint>& points,
                                        const std::vector<LabelInterval>& intervals) {
  std::vector<LabeledPoint> out;
  if (intervals.empty()) return out;

  auto label_of = [&](std::size_t interval) -> std::optional<ModeLabel> {
    return intervals[interval].mode;
  };

  const bool ordered = std::is_sorted(points.begin(), points.end(),
                                      [](const GpsPoint& a, const GpsPoint& b) { return a.t < b.t; });
  if (!ordered) {
    for (const auto& p : points) {
      for (std::size_t k = 0; k < intervals.size(); ++k) {
        if (p.t >= intervals[k].start && p.t <= intervals[k].end) {
          if (auto mode = label_of(k)) out.push_back({p, *mode});
          break;
        }
      }
    }
    return out;
  }

  // Sweep: intervals enter by start time; the active set is ordered by file index.
  std::vector<std::size_t> by_start(intervals.size());
  for (std::size_t k = 0; k < by_start.size(); ++k) by_start[k] = k;
  std::stable_sort(by_start.begin(), by_start.end(), [&](std::size_t a, std::size_t b) {
    return intervals[a].start < intervals[b].start;
  });
  using EndEntry = std::pair<double, std::size_t>;
  std::priority_queue<EndEntry, std::vector<EndEntry>, std::greater<>> ends;
  std::set<std::size_t> active;
  std::size_t next = 0;
  for (const auto& p : points) {
    while (next < by_start.size() && intervals[by_start[next]].start <= p.t) {
      active.insert(by_start[next]);
      ends.emplace(intervals[by_start[next]].end, by_start[next]);
      ++next;
    }
    while (!ends.empty() && ends.top().first < p.t) {
      active.erase(ends.top().second);
      ends.pop();
    }
    if (active.empty()) continue;
    if (auto mode = label_of(*active.begin())) out.push_back({p, *mode});
  }
  return out;
}

std::vector<Trip> split_trips(const std::vector<LabeledPoint>& points, const std::string& user_id,
                              double gap_s) {
  std::vector<Trip> trips;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i == 0 || points[i].point.t - points[i - 1].point.t > gap_s) {
      trips.push_back(Trip{user_id, {}});
    }
    trips.back().points.push_back(points[i]);
  }
  return trips;
}

std::vector<Segment> split_segments(const Trip& trip, const std::string& trip_ref) {
  std::vector<Segment> segments;
  for (std::size_t i = 0; i < trip.points.size(); ++i) {
    const auto& lp = trip.points[i];
    if (i == 0 || lp.mode != trip.points[i - 1].mode) {
      segments.push_back(Segment{{}, lp.mode, trip_ref});
    }
    segments.back().points.push_back(lp.point);
  }
  return segments;
}

std::vector<Segment> merge_adjacent(std::vector<Segment> segments) {
  std::vector<Segment> merged;
  for (auto& seg : segments) {
    if (!merged.empty() && merged.back().mode == seg.mode) {
      auto& dst = merged.back().points;
      dst.insert(dst.end(), seg.points.begin(), seg.points.end());
    } else {
      merged.push_back(std::move(seg));
    }
  }
  return merged;
}

std::string trip_to_json_line(const Trip& trip) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& lp : trip.points) {
    points.push_back({lp.point.lat, lp.point.lon, lp.point.t, static_cast<int>(lp.mode)});
  }
  nlohmann::json j;
  j["user"] = trip.user_id;
  j["points"] = std::move(points);
  return j.dump();
}

Trip trip_from_json_line(std::string_view line) {
  Trip trip;
  try {
    const auto j = nlohmann::json::parse(line);
    trip.user_id = j.at("user").get<std::string>();
    for (const auto& row : j.at("points")) {
      if (!row.is_array() || row.size() != 4) throw DataError("trip point must be [lat,lon,t,mode]");
      LabeledPoint lp;
      lp.point = {row[0].get<double>(), row[1].get<double>(), row[2].get<double>()};
      lp.mode = mode_from_code(row[3].get<int>());
      trip.points.push_back(lp);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad trip line: ") + e.what());
  }
  return trip;
}

void write_trips(std::ostream& out, const std::vector<Trip>& trips) {
  for (const auto& trip : trips) out << trip_to_json_line(trip) << '\n';
}

std::vector<Trip> read_trips(std::istream& in) {
  std::vector<Trip> trips;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    trips.push_back(trip_from_json_line(line));
  }
  return trips;
}

void write_trips_file(const std::filesystem::path& path, const std::vector<Trip>& trips) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_trips(out, trips);
}

std::vector<Trip> read_trips_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_trips(in);
}

std::vector<Trip> ingest_geolife(const std::filesystem::path& root, double gap_s,
                                 std::size_t jobs, IngestStats* stats) {
  namespace fs = std::filesystem;
  fs::path data_dir = fs::exists(root / "Data") ? root / "Data" : root;
  if (!fs::is_directory(data_dir)) throw DataError("not a directory: " + data_dir.string());

  std::vector<fs::path> users;
  for (const auto& entry : fs::directory_iterator(data_dir)) {
    if (entry.is_directory()) users.push_back(entry.path());
  }
  std::sort(users.begin(), users.end());

  struct UserResult {
    std::vector<Trip> trips;
    IngestStats stats;
  };
  const auto results = parallel_map<UserResult>(users.size(), jobs, [&](std::size_t u) {
    UserResult r;
    const fs::path& dir = users[u];
    const std::string user = dir.filename().string();
    r.stats.users = 1;
    const fs::path labels_path = dir / "labels.txt";
    if (!fs::exists(labels_path)) return r;

    std::vector<fs::path> files;
    const fs::path traj = dir / "Trajectory";
    if (fs::is_directory(traj)) {
      for (const auto& entry : fs::directory_iterator(traj)) {
        if (entry.path().extension() == ".plt") files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    std::vector<GpsPoint> points;
    for (const auto& file : files) {
      auto parsed = parse_plt(read_text(file));
      r.stats.skipped_lines += parsed.skipped_lines;
      points.insert(points.end(), parsed.points.begin(), parsed.points.end());
    }
    r.stats.plt_files = files.size();
    r.stats.points = points.size();
    const auto labels = parse_labels(read_text(labels_path));
    r.stats.skipped_lines += labels.skipped_lines;
    const auto labeled = attach_labels(points, labels.intervals);
    r.stats.labeled_points = labeled.size();
    r.trips = split_trips(labeled, user, gap_s);
    r.stats.trips = r.trips.size();
    return r;
  });

  std::vector<Trip> trips;
  IngestStats total;
  for (const auto& r : results) {
    trips.insert(trips.end(), r.trips.begin(), r.trips.end());
    total.users += r.stats.users;
    total.plt_files += r.stats.plt_files;
    total.points += r.stats.points;
    total.labeled_points += r.stats.labeled_points;
    total.skipped_lines += r.stats.skipped_lines;
    total.trips += r.stats.trips;
  }
  if (stats) *stats = total;
  return trips;
}

}  // namespace modewise
