// modewise command-line tool.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "modewise/baselines.hpp"
#include "modewise/error.hpp"
#include "modewise/features.hpp"
#include "modewise/ingest.hpp"
#include "modewise/log.hpp"
#include "modewise/manifest.hpp"
#include "modewise/metrics.hpp"
#include "modewise/model.hpp"
#include "modewise/pipeline.hpp"
#include "modewise/rng.hpp"
#include "modewise/synthgen.hpp"
#include "modewise/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace modewise;

namespace {

std::vector<std::string> g_argv;

RunManifest manifest(std::vector<std::uint64_t> seeds, std::vector<fs::path> inputs) {
  RunManifest m;
  m.command_line = g_argv;
  m.seeds = std::move(seeds);
  m.inputs = std::move(inputs);
  return m;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// Writes to the file when a path was given, else to stdout.
void emit_json(const std::string& path, const json& j) {
  if (path.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    write_json(path, j);
  }
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  try {
    if (text.find(':') != std::string::npos) {
      std::vector<double> parts;
      std::stringstream ss(text);
      std::string tok;
      while (std::getline(ss, tok, ':')) parts.push_back(std::stod(tok));
      if (parts.size() != 3 || parts[2] <= 0.0 || parts[1] < parts[0]) {
        throw UsageError("grid must be start:stop:step with step > 0");
      }
      const auto n = static_cast<std::size_t>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
      for (std::size_t i = 0; i <= n; ++i) {
        out.push_back(std::round((parts[0] + i * parts[2]) * 1e12) / 1e12);
      }
    } else {
      std::stringstream ss(text);
      std::string tok;
      while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    }
  } catch (const std::invalid_argument&) {
    throw UsageError("cannot parse grid '" + text + "'");
  }
  if (out.empty()) throw UsageError("empty grid");
  return out;
}

struct ModelFlags {
  std::string config = "G";
  std::vector<std::size_t> filters = {32, 64, 128, 256};
  std::size_t pool_stride = 2;
  double dropout = 0.5;
  std::size_t epochs = 62;
  std::size_t batch = 64;
  std::size_t patience = 0;
  std::string early_stop = "val";
  double lr = 0.001;

  void add(CLI::App* app) {
    app->add_option("--config", config, "Architecture A..I")->capture_default_str();
    app->add_option("--filters", filters, "Filters of the four conv groups")
        ->delimiter(',')
        ->expected(4);
    app->add_option("--pool-stride", pool_stride)->capture_default_str();
    app->add_option("--dropout", dropout, "Dropout probability")->capture_default_str();
    app->add_option("--epochs", epochs)->capture_default_str();
    app->add_option("--batch-size", batch)->capture_default_str();
    app->add_option("--patience", patience, "0 disables early halting")->capture_default_str();
    app->add_option("--early-stop-on", early_stop, "val|test|none")->capture_default_str();
    app->add_option("--lr", lr)->capture_default_str();
  }

  NetworkSpec spec(std::size_t length) const {
    ConfigOptions o;
    o.length = length;
    o.filter_ladder = filters;
    o.pool_stride = pool_stride;
    o.dropout = dropout;
    return build_config(config, o);
  }

  TrainConfig train_config(std::uint64_t seed) const {
    TrainConfig c;
    c.max_epochs = epochs;
    c.batch_size = batch;
    c.patience = patience;
    c.early_stop = parse_early_stop(early_stop);
    c.seed = seed;
    c.adam.lr = lr;
    return c;
  }
};

FeatureMatrix handcrafted_matrix(const Dataset& d, const std::string& file) {
  if (!d.has_features()) {
    throw DataError(file + " has no .feat sidecar; rerun preprocess or use --features channels");
  }
  FeatureMatrix m{d.size(), HandcraftedFeatures::kDims, {}};
  for (const auto& f : d.features) {
    const auto v = f.to_vector();
    m.values.insert(m.values.end(), v.begin(), v.end());
  }
  return m;
}

FeatureMatrix channel_matrix(const Dataset& d) {
  FeatureMatrix m{d.size(), kNumChannels * d.M, {}};
  for (const auto& s : d.samples) m.values.insert(m.values.end(), s.data.begin(), s.data.end());
  return m;
}

std::vector<std::uint8_t> labels_of(const Dataset& d) {
  std::vector<std::uint8_t> y;
  for (const auto& s : d.samples) y.push_back(static_cast<std::uint8_t>(s.label));
  return y;
}

std::vector<std::size_t> range(std::size_t lo, std::size_t hi) {
  std::vector<std::size_t> v(hi - lo + 1);
  std::iota(v.begin(), v.end(), lo);
  return v;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Transportation-mode classification from GPS trajectories"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  std::size_t jobs = 1;
  std::uint64_t seed = 0;
  auto add_jobs = [&](CLI::App* c) { c->add_option("--jobs", jobs, "Worker threads")->capture_default_str(); };
  auto add_seed = [&](CLI::App* c) { c->add_option("--seed", seed, "Master seed")->capture_default_str(); };

  // ingest
  std::string geolife_dir, out, in;
  double max_gap_min = kDefaultTripGapSeconds / 60.0;
  auto* ingest = app.add_subcommand("ingest", "Parse a GeoLife tree into labeled trips (JSON lines)");
  ingest->add_option("--geolife-dir", geolife_dir)->required();
  ingest->add_option("--out", out)->required();
  ingest->add_option("--max-gap-min", max_gap_min)->capture_default_str();
  add_jobs(ingest);

  // preprocess
  PipelineConfig pipe;
  auto* preprocess = app.add_subcommand("preprocess", "Clean, smooth and chunk trips into a TMSG dataset");
  preprocess->add_option("--in", in)->required();
  preprocess->add_option("--out", out)->required();
  preprocess->add_option("--max-gap-min", max_gap_min)->capture_default_str();
  preprocess->add_option("--segment-len", pipe.segment_len)->capture_default_str();
  preprocess->add_option("--min-points", pipe.min_points)->capture_default_str();
  preprocess->add_option("--sg-window", pipe.sg_window)->capture_default_str();
  preprocess->add_option("--sg-order", pipe.sg_order)->capture_default_str();
  preprocess->add_flag("--wrap-bearing", pipe.wrap_bearing, "Fold bearing rate into [0, 180]");
  add_jobs(preprocess);

  // split
  double frac = 0.8;
  std::string out_train, out_test;
  auto* split = app.add_subcommand("split", "Seeded sample-level train/test split");
  split->add_option("--in", in)->required();
  split->add_option("--frac", frac)->capture_default_str();
  split->add_option("--out-train", out_train)->required();
  split->add_option("--out-test", out_test)->required();
  add_seed(split);

  // train / ensemble-train
  ModelFlags mf;
  std::string train_file, monitor_file, report;
  std::size_t members = 7;
  auto* train_cmd = app.add_subcommand("train", "Train one network");
  train_cmd->add_option("--train", train_file)->required();
  train_cmd->add_option("--monitor", monitor_file, "Dataset monitored with --early-stop-on test");
  train_cmd->add_option("--out", out)->required();
  train_cmd->add_option("--report", report);
  mf.add(train_cmd);
  add_seed(train_cmd);

  auto* ens_cmd = app.add_subcommand("ensemble-train", "Train bootstrap ensemble members");
  ens_cmd->add_option("--train", train_file)->required();
  ens_cmd->add_option("--monitor", monitor_file);
  ens_cmd->add_option("--out", out, "Output directory")->required();
  ens_cmd->add_option("--report", report);
  ens_cmd->add_option("--n", members)->capture_default_str();
  mf.add(ens_cmd);
  add_seed(ens_cmd);
  add_jobs(ens_cmd);

  // evaluate
  std::string model_path, test_file;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a model or ensemble directory");
  eval_cmd->add_option("--model", model_path)->required();
  eval_cmd->add_option("--test", test_file)->required();
  eval_cmd->add_option("--report", report);

  // gridsearch-dropout
  std::string grid_text = "0.2:0.8:0.1";
  std::size_t folds = 5;
  auto* grid_cmd = app.add_subcommand("gridsearch-dropout", "k-fold grid search over dropout rates");
  grid_cmd->add_option("--train", train_file)->required();
  grid_cmd->add_option("--grid", grid_text, "start:stop:step or a comma list")->capture_default_str();
  grid_cmd->add_option("--folds", folds)->capture_default_str();
  grid_cmd->add_option("--report", report);
  mf.add(grid_cmd);
  add_seed(grid_cmd);
  add_jobs(grid_cmd);

  // baseline
  std::string algo, feature_kind = "handcrafted";
  bool search = false;
  std::size_t k = 5, depth = 10;
  auto* base_cmd = app.add_subcommand("baseline", "KNN or decision-tree baseline");
  base_cmd->add_option("--algo", algo)->required()->check(CLI::IsMember({"knn", "dt"}));
  base_cmd->add_option("--train", train_file)->required();
  base_cmd->add_option("--test", test_file)->required();
  base_cmd->add_flag("--search", search, "Pick k or depth by cross-validation");
  base_cmd->add_option("--k", k)->capture_default_str();
  base_cmd->add_option("--depth", depth)->capture_default_str();
  base_cmd->add_option("--folds", folds)->capture_default_str();
  base_cmd->add_option("--features", feature_kind, "handcrafted|channels")
      ->check(CLI::IsMember({"handcrafted", "channels"}))
      ->capture_default_str();
  base_cmd->add_option("--report", report);
  add_seed(base_cmd);

  // predict
  std::string plt_file;
  auto* pred_cmd = app.add_subcommand("predict", "Classify an unlabeled .plt track chunk by chunk");
  pred_cmd->add_option("--model", model_path)->required();
  pred_cmd->add_option("--plt", plt_file)->required();
  pred_cmd->add_option("--min-points", pipe.min_points)->capture_default_str();
  pred_cmd->add_option("--out", out);

  // synth
  SynthConfig synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate labeled synthetic tracks (JSON lines)");
  synth_cmd->add_option("--per-mode", synth.per_mode)->capture_default_str();
  synth_cmd->add_option("--points", synth.points_per_track)->capture_default_str();
  synth_cmd->add_flag("--noise", synth.noise, "Inject one position spike per track");
  synth_cmd->add_option("--out", out);
  add_seed(synth_cmd);
  add_jobs(synth_cmd);

  // spec show
  std::string spec_name;
  std::size_t spec_length = 200;
  auto* spec_cmd = app.add_subcommand("spec", "Architecture descriptions");
  spec_cmd->require_subcommand(1);
  auto* show = spec_cmd->add_subcommand("show", "Print a configuration as JSON");
  show->add_option("name", spec_name, "A..I")->required();
  show->add_option("--length", spec_length)->capture_default_str();
  show->add_option("--filters", mf.filters)->delimiter(',')->expected(4);
  show->add_option("--pool-stride", mf.pool_stride)->capture_default_str();
  show->add_option("--dropout", mf.dropout)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  if (jobs == 0) throw UsageError("--jobs must be at least 1");

  if (*ingest) {
    IngestStats stats;
    const auto trips = ingest_geolife(geolife_dir, max_gap_min * 60.0, jobs, &stats);
    write_trips_file(out, trips);
    write_manifest(out, manifest({}, {}));
    spdlog::info("ingest: {} users, {} plt files, {} points, {} labeled, {} skipped lines, {} trips",
                 stats.users, stats.plt_files, stats.points, stats.labeled_points,
                 stats.skipped_lines, stats.trips);
  } else if (*preprocess) {
    pipe.max_gap_s = max_gap_min * 60.0;
    pipe.jobs = jobs;
    const auto trips = read_trips_file(in);
    BuildStats stats;
    const auto ds = build_dataset(trips, pipe, &stats);
    write_dataset_file(out, ds);
    write_manifest(out, manifest({}, {in}));
    const auto counts = ds.class_counts();
    spdlog::info("preprocess: {} trips, {}/{} segments kept, dropped {} disorder / {} speed / {} accel, "
                 "{} samples (walk {} bike {} bus {} driving {} train {})",
                 stats.trips, stats.segments_kept, stats.segments_in, stats.points_dropped_disorder,
                 stats.points_dropped_speed, stats.points_dropped_accel, ds.size(), counts[0],
                 counts[1], counts[2], counts[3], counts[4]);
  } else if (*split) {
    if (!(frac > 0.0 && frac < 1.0)) throw UsageError("--frac must be in (0, 1)");
    const auto ds = read_dataset_file(in);
    const auto [a, b] = split_train_test(ds, frac, seed);
    write_dataset_file(out_train, a);
    write_dataset_file(out_test, b);
    write_manifest(out_train, manifest({seed}, {in}));
    write_manifest(out_test, manifest({seed}, {in}));
    std::cout << json{{"train", a.size()}, {"test", b.size()}}.dump() << '\n';
  } else if (*train_cmd || *ens_cmd) {
    const auto train_set = read_dataset_file(train_file);
    const auto spec = mf.spec(train_set.M);
    const auto config = mf.train_config(seed);
    std::optional<Dataset> monitor;
    std::vector<fs::path> inputs = {train_file};
    if (!monitor_file.empty()) {
      monitor = read_dataset_file(monitor_file);
      inputs.push_back(monitor_file);
    }
    if (config.early_stop == EarlyStop::Test && !monitor) {
      throw UsageError("--early-stop-on test needs --monitor");
    }
    const Dataset* mon = monitor ? &*monitor : nullptr;
    if (*train_cmd) {
      const auto result = train(spec, train_set, config, mon);
      write_model_file(out, result.model);
      write_manifest(out, manifest({seed}, inputs));
      auto j = train_report_json(result, spec, seed);
      if (!report.empty()) write_json(report, j);
      spdlog::info("best epoch {} of {}, {:.1f} s", result.best_epoch, result.epochs.size(),
                   result.seconds);
    } else {
      if (members == 0) throw UsageError("--n must be at least 1");
      const auto result = train_ensemble(spec, train_set, config, members, mon, jobs);
      fs::create_directories(out);
      json reports = json::array();
      std::vector<std::uint64_t> seeds = {seed};
      for (std::size_t i = 0; i < result.members.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "member_%02zu.tmmd", i);
        write_model_file(fs::path(out) / name, result.members[i].model);
        seeds.push_back(derive_seed(seed, i));
        reports.push_back(train_report_json(result.members[i], spec, derive_seed(seed, i)));
      }
      write_manifest(fs::path(out) / "ensemble", manifest(seeds, inputs));
      if (!report.empty()) write_json(report, json{{"members", reports}, {"seed", seed}});
    }
  } else if (*eval_cmd) {
    auto predictor = load_predictor(model_path);
    const auto test = read_dataset_file(test_file);
    const auto r = evaluate(predictor, test);
    auto j = report_to_json(r);
    j["members"] = predictor.size();
    if (!report.empty()) {
      write_json(report, j);
      write_manifest(report, manifest({}, {test_file}));
    }
    std::cout << confusion_table(r);
  } else if (*grid_cmd) {
    const auto train_set = read_dataset_file(train_file);
    const auto grid = parse_grid(grid_text);
    const auto spec = mf.spec(train_set.M);
    const auto result = grid_search_dropout(spec, train_set, grid, folds, mf.train_config(seed), jobs);
    json cells = json::array();
    for (const auto& c : result.cells) {
      cells.push_back({{"ps", c.ps}, {"fold_accuracy", c.fold_accuracy}, {"mean_accuracy", c.mean_accuracy}});
    }
    const json j = {{"config", spec.name}, {"grid", grid}, {"folds", folds}, {"seed", seed},
                    {"cells", cells}, {"best", result.best}};
    emit_json(report, j);
    if (!report.empty()) write_manifest(report, manifest({seed}, {train_file}));
  } else if (*base_cmd) {
    const auto a = read_dataset_file(train_file);
    const auto b = read_dataset_file(test_file);
    if (a.M != b.M) throw DataError("train and test segment lengths differ");
    const bool hand = feature_kind == "handcrafted";
    const auto xa = hand ? handcrafted_matrix(a, train_file) : channel_matrix(a);
    const auto xb = hand ? handcrafted_matrix(b, test_file) : channel_matrix(b);
    const auto ya = labels_of(a);
    const auto yb = labels_of(b);
    json j = {{"algo", algo}, {"features", feature_kind}, {"seed", seed}};
    std::vector<std::uint8_t> pred;
    if (algo == "knn") {
      if (search) {
        const auto t = tune_knn(xa, ya, range(3, std::min<std::size_t>(40, a.size() - a.size() / folds)), folds, seed);
        k = t.best;
        j["search"] = t.scores;
      }
      Standardizer s;
      s.fit(xa);
      pred = knn_predict(s.transform(xa), ya, k, s.transform(xb));
      j["k"] = k;
    } else {
      if (search) {
        const auto t = tune_tree(xa, ya, range(1, 40), folds, seed);
        depth = t.best;
        j["search"] = t.scores;
      }
      DecisionTree tree;
      tree.fit(xa, ya, depth);
      pred = tree.predict(xb);
      j["max_depth"] = depth;
    }
    const auto r = evaluate_predictions(yb, pred);
    j["report"] = report_to_json(r);
    if (!report.empty()) {
      write_json(report, j);
      write_manifest(report, manifest({seed}, {train_file, test_file}));
    }
    std::cout << confusion_table(r);
  } else if (*pred_cmd) {
    auto predictor = load_predictor(model_path);
    const std::size_t M = predictor.members().front().spec().length;
    const auto parsed = parse_plt(read_text(plt_file));
    const Thresholds th;
    auto pts = filter_kinematic_outliers(drop_time_disorder(parsed.points), th.global);
    if (pts.size() < pipe.min_points || pts.size() < 2) {
      throw DataError(plt_file + ": fewer than " + std::to_string(pipe.min_points) +
                      " usable points");
    }
    PipelineConfig cfg = pipe;
    cfg.segment_len = M;
    const auto channels = smoothed_channels(pts, th.global, cfg);
    const auto chunks = chunk_segment(channels, ModeLabel::Walk, M, pipe.min_points);
    Dataset ds;
    ds.M = M;
    ds.samples = chunks.samples;
    json out_chunks = json::array();
    if (ds.size() > 0) {
      std::vector<std::size_t> idx(ds.size());
      std::iota(idx.begin(), idx.end(), 0);
      const auto probs = predictor.predict(to_batch(ds, idx));
      for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto item = probs.item(i);
        const std::vector<double> row(item.begin(), item.end());
        const auto label = std::max_element(row.begin(), row.end()) - row.begin();
        out_chunks.push_back({{"index", i},
                              {"start", chunks.starts[i]},
                              {"valid_len", ds.samples[i].valid_len},
                              {"label", label},
                              {"mode", mode_name(static_cast<ModeLabel>(label))},
                              {"probabilities", row}});
      }
    }
    const json j = {{"points_read", parsed.points.size()},
                    {"points_kept", pts.size()},
                    {"segment_len", M},
                    {"chunks", out_chunks}};
    emit_json(out, j);
    if (!out.empty()) write_manifest(out, manifest({}, {plt_file}));
  } else if (*synth_cmd) {
    synth.seed = seed;
    synth.jobs = jobs;
    std::vector<Trip> trips;
    for (auto& t : generate(synth)) trips.push_back(std::move(t.trip));
    if (out.empty()) {
      write_trips(std::cout, trips);
    } else {
      write_trips_file(out, trips);
      write_manifest(out, manifest({seed}, {}));
    }
  } else if (*spec_cmd) {
    ConfigOptions o;
    o.length = spec_length;
    o.filter_ladder = mf.filters;
    o.pool_stride = mf.pool_stride;
    o.dropout = mf.dropout;
    std::cout << spec_to_json(build_config(spec_name, o)).dump(2) << '\n';
  }
  return 0;
}

int main(int argc, char** argv) {
  init_logging();
  g_argv.assign(argv, argv + argc);
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const DataError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const NumericError& e) {
    spdlog::error("{}", e.what());
    return 3;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
}
