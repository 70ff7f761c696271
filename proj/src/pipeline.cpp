#include "modewise/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "binary_io.hpp"
#include "modewise/error.hpp"
#include "modewise/parallel.hpp"
#include "modewise/rng.hpp"
#include "modewise/savgol.hpp"

namespace modewise {
namespace {

constexpr std::string_view kDatasetMagic = "TMSG";
constexpr std::uint32_t kDatasetVersion = 1;

std::vector<GpsPoint> remove_marked(const std::vector<GpsPoint>& points,
                                    const std::vector<bool>& drop) {
  std::vector<GpsPoint> out;
  out.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!drop[i]) out.push_back(points[i]);
  }
  return out;
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".feat");
}

}  // namespace

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.M = M;
  out.provenance = provenance;
  out.samples.reserve(indices.size());
  for (std::size_t i : indices) out.samples.push_back(samples.at(i));
  if (has_features()) {
    out.features.reserve(indices.size());
    for (std::size_t i : indices) out.features.push_back(features.at(i));
  }
  return out;
}

std::array<std::size_t, kNumModes> Dataset::class_counts() const {
  std::array<std::size_t, kNumModes> counts{};
  for (const auto& s : samples) ++counts[static_cast<std::size_t>(s.label)];
  return counts;
}

std::vector<GpsPoint> drop_time_disorder(const std::vector<GpsPoint>& points) {
  std::vector<GpsPoint> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    if (out.empty() || p.t > out.back().t) out.push_back(p);
  }
  return out;
}

std::vector<GpsPoint> filter_kinematic_outliers(const std::vector<GpsPoint>& points,
                                                const ModeCaps& caps, FilterStats* stats) {
  std::vector<GpsPoint> pts = points;
  FilterStats local;
  while (pts.size() >= 2) {
    ++local.passes;
    const std::size_t n = pts.size();
    const auto series = compute_series(pts);
    std::vector<bool> drop(n, false);

    // Speed: runs of consecutive over-cap links.
    bool any = false;
    std::size_t i = 0;
    while (i + 1 < n) {
      if (!(series.speed[i] > caps.max_speed)) {
        ++i;
        continue;
      }
      std::size_t end = i;
      while (end + 2 < n && series.speed[end + 1] > caps.max_speed) ++end;
      if (end > i) {
        for (std::size_t k = i + 1; k <= end; ++k) drop[k] = true;
      } else if (i + 2 == n) {
        drop[n - 1] = true;
      } else {
        drop[i] = true;
      }
      any = true;
      i = end + 1;
    }
    if (any) {
      const auto before = pts.size();
      pts = remove_marked(pts, drop);
      local.speed_drops += before - pts.size();
      continue;
    }

    for (std::size_t k = 0; k + 2 < n; ++k) {
      if (std::abs(series.accel[k]) > caps.max_accel) {
        drop[k + 1] = true;
        any = true;
      }
    }
    if (any) {
      const auto before = pts.size();
      pts = remove_marked(pts, drop);
      local.accel_drops += before - pts.size();
      continue;
    }
    break;
  }
  if (stats) {
    stats->speed_drops += local.speed_drops;
    stats->accel_drops += local.accel_drops;
    stats->passes += local.passes;
  }
  return pts;
}

Segment filter_kinematic_outliers(const Segment& segment, const Thresholds& thresholds,
                                  FilterStats* stats) {
  Segment out = segment;
  out.points = filter_kinematic_outliers(segment.points, thresholds[segment.mode], stats);
  return out;
}

std::vector<Segment> drop_short(std::vector<Segment> segments, std::size_t min_pts) {
  std::erase_if(segments, [&](const Segment& s) { return s.points.size() < min_pts; });
  return segments;
}

SmoothedChannels smoothed_channels(const std::vector<GpsPoint>& points, const ModeCaps& caps,
                                   const PipelineConfig& config) {
  const auto series = compute_series(points, {config.wrap_bearing});
  SmoothedChannels out;
  out.channels[0] = savgol_smooth(series.speed, config.sg_window, config.sg_order);
  out.channels[1] = savgol_smooth(series.accel, config.sg_window, config.sg_order);
  out.channels[2] = savgol_smooth(series.jerk, config.sg_window, config.sg_order);
  out.channels[3] = savgol_smooth(series.bearing_rate, config.sg_window, config.sg_order);
  // Smoothing can overshoot; emitted channels stay within the caps.
  for (auto& v : out.channels[0]) v = std::clamp(v, 0.0, caps.max_speed);
  for (auto& v : out.channels[1]) v = std::clamp(v, -caps.max_accel, caps.max_accel);
  for (auto& v : out.channels[3]) v = std::clamp(v, 0.0, 360.0);
  return out;
}

ChunkResult chunk_segment(const SmoothedChannels& channels, ModeLabel label, std::size_t M,
                          std::size_t min_pts) {
  ChunkResult result;
  const std::size_t n = channels.size();
  for (std::size_t start = 0; start < n; start += M) {
    const std::size_t len = std::min(M, n - start);
    if (len < M && len < min_pts) {
      result.discarded_remainder = len;
      break;
    }
    ChannelStack stack;
    stack.label = label;
    stack.valid_len = static_cast<std::uint32_t>(len);
    stack.data.assign(kNumChannels * M, 0.0f);
    for (std::size_t c = 0; c < kNumChannels; ++c) {
      for (std::size_t i = 0; i < len; ++i) {
        stack.data[c * M + i] = static_cast<float>(channels.channels[c][start + i]);
      }
    }
    result.samples.push_back(std::move(stack));
    result.starts.push_back(start);
  }
  return result;
}

Dataset build_trip_samples(const Trip& trip, const PipelineConfig& config, BuildStats* stats) {
  BuildStats local;
  local.trips = 1;
  Dataset out;
  out.M = config.segment_len;

  auto clean = [&](const Segment& seg) {
    Segment s = seg;
    const auto ordered = drop_time_disorder(s.points);
    local.points_dropped_disorder += s.points.size() - ordered.size();
    FilterStats fs;
    s.points = ordered.size() >= 2
                   ? filter_kinematic_outliers(ordered, config.thresholds[s.mode], &fs)
                   : ordered;
    local.points_dropped_speed += fs.speed_drops;
    local.points_dropped_accel += fs.accel_drops;
    return s;
  };

  const auto raw = split_segments(trip, trip.user_id);
  local.segments_in = raw.size();
  std::vector<Segment> cleaned;
  for (const auto& seg : raw) cleaned.push_back(clean(seg));
  cleaned = drop_short(std::move(cleaned), config.min_points);

  // Removing a short segment can leave same-mode neighbours; merge and re-clean the junctions.
  const std::size_t before_merge = cleaned.size();
  auto merged = merge_adjacent(std::move(cleaned));
  if (merged.size() != before_merge) {
    for (auto& seg : merged) seg = clean(seg);
    merged = drop_short(std::move(merged), config.min_points);
  }
  local.segments_kept = merged.size();

  for (const auto& seg : merged) {
    if (seg.points.size() < 2) continue;
    const ModeCaps& caps = config.thresholds[seg.mode];
    const auto channels = smoothed_channels(seg.points, caps, config);
    auto chunks = chunk_segment(channels, seg.mode, config.segment_len, config.min_points);
    local.remainder_points_discarded += chunks.discarded_remainder;
    for (std::size_t k = 0; k < chunks.samples.size(); ++k) {
      const std::size_t len = chunks.samples[k].valid_len;
      const std::span<const GpsPoint> part(seg.points.data() + chunks.starts[k], len);
      HandcraftedFeatures f;
      if (len >= 2) f = extract_handcrafted(part);
      out.features.push_back(f);
      out.samples.push_back(std::move(chunks.samples[k]));
    }
  }
  if (stats) *stats = local;
  return out;
}

Dataset build_dataset(const std::vector<Trip>& trips, const PipelineConfig& config,
                      BuildStats* stats) {
  struct TripResult {
    Dataset data;
    BuildStats stats;
  };
  const auto parts = parallel_map<TripResult>(trips.size(), config.jobs, [&](std::size_t i) {
    TripResult r;
    r.data = build_trip_samples(trips[i], config, &r.stats);
    return r;
  });
  Dataset out;
  out.M = config.segment_len;
  out.provenance = "pipeline over " + std::to_string(trips.size()) + " trips";
  BuildStats total;
  for (const auto& p : parts) {
    out.samples.insert(out.samples.end(), p.data.samples.begin(), p.data.samples.end());
    out.features.insert(out.features.end(), p.data.features.begin(), p.data.features.end());
    total.trips += p.stats.trips;
    total.segments_in += p.stats.segments_in;
    total.segments_kept += p.stats.segments_kept;
    total.points_dropped_disorder += p.stats.points_dropped_disorder;
    total.points_dropped_speed += p.stats.points_dropped_speed;
    total.points_dropped_accel += p.stats.points_dropped_accel;
    total.remainder_points_discarded += p.stats.remainder_points_discarded;
  }
  if (stats) *stats = total;
  if (out.samples.empty()) throw DataError("no usable segments");
  return out;
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& dataset, double frac,
                                             std::uint64_t seed) {
  if (!(frac >= 0.0 && frac <= 1.0)) throw UsageError("split fraction must be in [0, 1]");
  const std::size_t n = dataset.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  const auto n_train = static_cast<std::size_t>(std::llround(frac * static_cast<double>(n)));
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {dataset.subset(train), dataset.subset(test)};
}

void write_dataset(std::ostream& out, const Dataset& dataset) {
  std::string buf;
  buf.append(kDatasetMagic);
  detail::put_u32(buf, kDatasetVersion);
  detail::put_u32(buf, static_cast<std::uint32_t>(dataset.size()));
  detail::put_u32(buf, static_cast<std::uint32_t>(kNumChannels));
  detail::put_u32(buf, static_cast<std::uint32_t>(dataset.M));
  for (const auto& s : dataset.samples) {
    if (s.data.size() != kNumChannels * dataset.M) {
      throw DataError("sample length does not match dataset M");
    }
    detail::put_u8(buf, static_cast<std::uint8_t>(s.label));
    detail::put_u32(buf, s.valid_len);
    for (float v : s.data) detail::put_f32(buf, v);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("failed writing dataset");
}

Dataset read_dataset(std::istream& in) {
  const std::string bytes = detail::slurp(in);
  detail::ByteReader r(bytes);
  if (r.take(4) != kDatasetMagic) throw DataError("not a TMSG dataset (bad magic)");
  if (const auto v = r.u32(); v != kDatasetVersion) {
    throw DataError("unsupported TMSG version " + std::to_string(v));
  }
  const std::uint32_t n = r.u32();
  const std::uint32_t channels = r.u32();
  const std::uint32_t M = r.u32();
  if (channels != kNumChannels) throw DataError("TMSG channel count must be 4");
  Dataset out;
  out.M = M;
  out.samples.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    ChannelStack s;
    s.label = mode_from_code(r.u8());
    s.valid_len = r.u32();
    if (s.valid_len > M) throw DataError("TMSG sample valid_len exceeds M");
    s.data.resize(kNumChannels * M);
    for (auto& v : s.data) v = r.f32();
    out.samples.push_back(std::move(s));
  }
  if (r.remaining() != 0) throw DataError("trailing bytes after TMSG samples");
  return out;
}

void write_dataset_file(const std::filesystem::path& path, const Dataset& dataset) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_dataset(out, dataset);
  if (dataset.has_features()) {
    write_features_file(sidecar_path(path), dataset.features);
  } else {
    std::filesystem::remove(sidecar_path(path));
  }
}

Dataset read_dataset_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  Dataset out = read_dataset(in);
  out.provenance = path.string();
  if (std::filesystem::exists(sidecar_path(path))) {
    out.features = read_features_file(sidecar_path(path));
    if (out.features.size() != out.samples.size()) {
      throw DataError("feature sidecar size does not match " + path.string());
    }
  }
  return out;
}

}  // namespace modewise
