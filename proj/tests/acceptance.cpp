// Acceptance suite: one PASS/FAIL/SKIP line per criterion. Criteria 8-12 need
// GEOLIFE_DIR pointing at an unpacked GeoLife tree.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "modewise/baselines.hpp"
#include "modewise/kinematics.hpp"
#include "modewise/log.hpp"
#include "modewise/model.hpp"
#include "modewise/nn/layers.hpp"
#include "modewise/pipeline.hpp"
#include "modewise/rng.hpp"
#include "modewise/savgol.hpp"
#include "modewise/synthgen.hpp"
#include "modewise/train.hpp"

using namespace modewise;
using nn::Tensor;

namespace {

int g_failures = 0;

void report(int id, const char* title, std::optional<bool> pass, const std::string& detail) {
  const char* tag = !pass ? "SKIP" : *pass ? "PASS" : "FAIL";
  if (pass && !*pass) ++g_failures;
  std::printf("%-4s criterion %2d  %-28s %s\n", tag, id, title, detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

// --- 1. gradients ----------------------------------------------------------

constexpr double kH = 1e-6;

double rel_err(double a, double n) {
  return std::fabs(a - n) / std::max({std::fabs(a), std::fabs(n), 1e-4});
}

Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(-1, 1);
  return t;
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Worst relative error over the input gradient and every listed parameter array.
template <class L>
double layer_error(L& layer, Tensor x, const std::vector<std::vector<double>*>& params,
                   const std::vector<std::vector<double>*>& grads, std::uint64_t mask_seed) {
  auto fwd = [&](const Tensor& in) {
    Rng rng(mask_seed);
    return layer.forward(in, {nn::Phase::Train, &rng});
  };
  const Tensor r = [&] {
    Rng rng(mask_seed + 1);
    return random_tensor(rng, fwd(x).shape());
  }();
  for (auto* g : grads) std::fill(g->begin(), g->end(), 0.0);
  fwd(x);
  const Tensor gx = layer.backward(r);
  std::vector<std::vector<double>> gp;
  for (auto* g : grads) gp.push_back(*g);
  double worst = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + kH;
    const double up = dot(fwd(x), r);
    x[i] = keep - kH;
    const double down = dot(fwd(x), r);
    x[i] = keep;
    worst = std::max(worst, rel_err(gx[i], (up - down) / (2 * kH)));
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& w = *params[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double keep = w[i];
      w[i] = keep + kH;
      const double up = dot(fwd(x), r);
      w[i] = keep - kH;
      const double down = dot(fwd(x), r);
      w[i] = keep;
      worst = std::max(worst, rel_err(gp[p][i], (up - down) / (2 * kH)));
    }
  }
  return worst;
}

void criterion_gradients() {
  Rng rng(101);
  constexpr int kInstances = 20;
  double worst = 0;
  std::string worst_layer = "-";
  auto note = [&](double e, const char* name) {
    if (e > worst) worst = e, worst_layer = name;
  };
  for (int i = 0; i < kInstances; ++i) {
    const std::size_t b = 1 + rng.below(3), c = 1 + rng.below(3), l = 4 + rng.below(6);
    const std::size_t oc = 1 + rng.below(3);
    const std::uint64_t ms = rng.below(1u << 30);

    nn::Conv1d conv(c, oc, 3);
    for (auto& w : conv.weight) w = rng.uniform(-1, 1);
    for (auto& w : conv.bias) w = rng.uniform(-1, 1);
    note(layer_error(conv, random_tensor(rng, {b, c, l}), {&conv.weight, &conv.bias},
                     {&conv.weight_grad, &conv.bias_grad}, ms),
         "conv");

    // Keep inputs away from the ReLU kink and pooling ties.
    nn::Relu relu;
    Tensor xr = random_tensor(rng, {b, c, l});
    for (auto& v : xr.values()) v += v >= 0 ? 0.01 : -0.01;
    note(layer_error(relu, xr, {}, {}, ms), "relu");

    const std::size_t w = 2 + rng.below(2), s = 1 + rng.below(w);
    nn::MaxPool pool(w, s);
    Tensor xp({b, c, l});
    for (std::size_t k = 0; k < xp.size(); ++k) xp[k] = 0.05 * static_cast<double>(k);
    for (std::size_t k = xp.size(); k > 1; --k) std::swap(xp[k - 1], xp[rng.below(k)]);
    note(layer_error(pool, xp, {}, {}, ms), "maxpool");

    nn::Dropout drop(0.3);
    note(layer_error(drop, random_tensor(rng, {b, c, l}), {}, {}, ms), "dropout");

    nn::Flatten flat;
    note(layer_error(flat, random_tensor(rng, {b, c, l}), {}, {}, ms), "flatten");

    const std::size_t fi = 1 + rng.below(8), fo = 1 + rng.below(6);
    nn::Dense dense(fi, fo);
    for (auto& v : dense.weight) v = rng.uniform(-1, 1);
    for (auto& v : dense.bias) v = rng.uniform(-1, 1);
    note(layer_error(dense, random_tensor(rng, {b, fi}), {&dense.weight, &dense.bias},
                     {&dense.weight_grad, &dense.bias_grad}, ms),
         "dense");

    // Softmax cross-entropy against its own logits.
    Tensor z = random_tensor(rng, {b, 5});
    std::vector<std::uint8_t> y(b);
    for (auto& v : y) v = static_cast<std::uint8_t>(rng.below(5));
    const auto res = nn::softmax_xent(z, y);
    double e = 0;
    for (std::size_t k = 0; k < z.size(); ++k) {
      const double keep = z[k];
      z[k] = keep + kH;
      const double up = nn::softmax_xent(z, y).loss;
      z[k] = keep - kH;
      const double down = nn::softmax_xent(z, y).loss;
      z[k] = keep;
      e = std::max(e, rel_err(res.grad[k], (up - down) / (2 * kH)));
    }
    note(e, "softmax_xent");
  }
  report(1, "gradient suite", worst < 1e-4,
         fmt("max rel err %.2e (%s), %d instances x 7 layers", worst, worst_layer.c_str(), kInstances));
}

// --- 2. geodesics ----------------------------------------------------------

void criterion_geodesic() {
  std::ifstream in(std::string(MODEWISE_TEST_DATA) + "/geodesic_oracle.csv");
  std::string line;
  std::getline(in, line);
  std::size_t rows = 0;
  double worst = 0, worst_sym = 0;
  while (std::getline(in, line)) {
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    GpsPoint a, b;
    double m;
    ss >> a.lat >> a.lon >> b.lat >> b.lon >> m;
    const double d = vincenty_inverse(a, b);
    worst = std::max(worst, std::fabs(d - m));
    worst_sym = std::max(worst_sym, std::fabs(d - vincenty_inverse(b, a)));
    ++rows;
  }
  report(2, "geodesic suite", rows == 1000 && worst <= 1e-3 && worst_sym <= 1e-9,
         fmt("%zu pairs, max |err| %.2e m, max asymmetry %.2e m", rows, worst, worst_sym));
}

// --- 3. Savitzky-Golay -----------------------------------------------------

void criterion_savgol() {
  Rng rng(303);
  double worst_poly = 0, worst_lin = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 9 + rng.below(60);
    const std::size_t degree = rng.below(4);
    std::vector<double> coef(degree + 1);
    for (auto& c : coef) c = rng.uniform(-2, 2);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = static_cast<double>(i) / 10.0;
      for (std::size_t k = 0; k <= degree; ++k) y[i] += coef[k] * std::pow(x, static_cast<double>(k));
    }
    const auto s = savgol_smooth(y, 9, 3);
    double scale = 1e-12;
    for (double v : y) scale = std::max(scale, std::fabs(v));
    for (std::size_t i = 0; i < n; ++i) worst_poly = std::max(worst_poly, std::fabs(s[i] - y[i]) / scale);

    std::vector<double> u(n), v(n), w(n);
    const double a = rng.uniform(-3, 3), b = rng.uniform(-3, 3);
    for (std::size_t i = 0; i < n; ++i) {
      u[i] = rng.uniform(-5, 5), v[i] = rng.uniform(-5, 5), w[i] = a * u[i] + b * v[i];
    }
    const auto su = savgol_smooth(u), sv = savgol_smooth(v), sw = savgol_smooth(w);
    for (std::size_t i = 0; i < n; ++i) {
      const double want = a * su[i] + b * sv[i];
      worst_lin = std::max(worst_lin, std::fabs(sw[i] - want) / std::max(1.0, std::fabs(want)));
    }
  }
  report(3, "savitzky-golay suite", worst_poly <= 1e-9 && worst_lin <= 1e-9,
         fmt("window 9 order 3: poly err %.2e, linearity err %.2e", worst_poly, worst_lin));
}

// --- 4. pipeline -----------------------------------------------------------

std::vector<GpsPoint> random_walk(Rng& rng, std::size_t n, double step) {
  std::vector<GpsPoint> pts;
  double lat = rng.uniform(-60, 60), lon = rng.uniform(-170, 170), t = 1e9;
  for (std::size_t i = 0; i < n; ++i) {
    pts.push_back({lat, lon, t});
    const double h = rng.uniform(0, 2 * M_PI), d = rng.uniform(0, step);
    lat += d * std::cos(h) / 111000.0;
    lon += d * std::sin(h) / (111000.0 * std::cos(lat * M_PI / 180.0));
    t += rng.uniform(1.0, 3.0);
  }
  return pts;
}

void criterion_pipeline() {
  Rng rng(404);
  const Thresholds th;
  bool idempotent = true, conserved = true, capped = true, round_trip = true;
  for (int trial = 0; trial < 100; ++trial) {
    const auto mode = static_cast<ModeLabel>(rng.below(kNumModes));
    const auto pts = random_walk(rng, 20 + rng.below(300), rng.uniform(5, 150));
    const auto once = filter_kinematic_outliers(pts, th[mode]);
    if (filter_kinematic_outliers(once, th[mode]) != once) idempotent = false;
    if (once.size() >= 2) {
      PipelineConfig cfg;
      const auto ch = smoothed_channels(once, th[mode], cfg);
      const auto chunks = chunk_segment(ch, mode, 50, 10);
      std::size_t total = chunks.discarded_remainder;
      for (const auto& s : chunks.samples) total += s.valid_len;
      if (total != once.size()) conserved = false;
    }
  }

  SynthConfig sc;
  sc.per_mode = 10;
  sc.points_per_track = 430;
  sc.noise = true;
  sc.seed = 405;
  std::vector<Trip> trips;
  for (auto& t : generate(sc)) trips.push_back(std::move(t.trip));
  for (int k = 0; k < 10; ++k) {
    Trip t{"rw" + std::to_string(k), {}};
    for (const auto& p : random_walk(rng, 400, 120)) t.points.push_back({p, static_cast<ModeLabel>(k % 5)});
    trips.push_back(std::move(t));
  }
  const auto ds = build_dataset(trips, PipelineConfig{});
  for (const auto& s : ds.samples) {
    const auto& caps = th[s.label];
    for (std::size_t i = 0; i < s.length(); ++i) {
      if (s.at(0, i) > static_cast<float>(caps.max_speed) ||
          std::fabs(s.at(1, i)) > static_cast<float>(caps.max_accel)) {
        capped = false;
      }
    }
  }
  std::stringstream a, b;
  write_dataset(a, ds);
  const std::string bytes = a.str();
  const auto back = read_dataset(a);
  write_dataset(b, back);
  round_trip = b.str() == bytes && back.samples == ds.samples;

  report(4, "pipeline suite", idempotent && conserved && capped && round_trip,
         fmt("idempotent %d, conservation %d, caps %d (%zu samples), TMSG round trip %d",
             idempotent, conserved, capped, ds.size(), round_trip));
}

// --- 5. shapes -------------------------------------------------------------

void criterion_shapes() {
  bool all = true;
  std::string names;
  for (char c : kConfigNames) {
    try {
      infer_shapes(build_config(std::string(1, c)));
      names += c;
    } catch (const std::exception&) {
      all = false;
    }
  }
  std::size_t hidden = 0;
  for (const auto& l : build_config("G").layers) {
    if (l.kind == LayerKind::Dense && l.units != 5) hidden = l.units;
  }
  report(5, "shape suite", all && hidden == 800,
         fmt("configs %s shape-check, G hidden FC width %zu", names.c_str(), hidden));
}

// --- 6 / 7. synthetic end-to-end and ensemble -------------------------------

struct SynthSplit {
  Dataset train, test;
};

SynthSplit synth_split() {
  SynthConfig sc;
  sc.per_mode = 125;
  sc.points_per_track = 200;
  sc.seed = 7;
  std::vector<Trip> trips;
  for (auto& t : generate(sc)) trips.push_back(std::move(t.trip));
  auto [a, b] = split_train_test(build_dataset(trips, PipelineConfig{}), 0.8, 1);
  return {std::move(a), std::move(b)};
}

NetworkSpec small_g() {
  ConfigOptions o;
  o.filter_ladder = {8, 16, 32, 64};
  return build_config("G", o);
}

TrainConfig small_train() {
  TrainConfig c;
  c.max_epochs = 20;
  c.early_stop = EarlyStop::None;
  c.seed = 3;
  return c;
}

FeatureMatrix stacks(const Dataset& d) {
  FeatureMatrix m{d.size(), kNumChannels * d.M, {}};
  for (const auto& s : d.samples) m.values.insert(m.values.end(), s.data.begin(), s.data.end());
  return m;
}

FeatureMatrix handcrafted(const Dataset& d) {
  FeatureMatrix m{d.size(), HandcraftedFeatures::kDims, {}};
  for (const auto& f : d.features) {
    const auto v = f.to_vector();
    m.values.insert(m.values.end(), v.begin(), v.end());
  }
  return m;
}

std::vector<std::uint8_t> labels(const Dataset& d) {
  std::vector<std::uint8_t> y;
  for (const auto& s : d.samples) y.push_back(static_cast<std::uint8_t>(s.label));
  return y;
}

double share_correct(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  std::size_t c = 0;
  for (std::size_t i = 0; i < a.size(); ++i) c += a[i] == b[i];
  return static_cast<double>(c) / static_cast<double>(a.size());
}

std::vector<std::size_t> range(std::size_t lo, std::size_t hi) {
  std::vector<std::size_t> v;
  for (std::size_t i = lo; i <= hi; ++i) v.push_back(i);
  return v;
}

double knn_accuracy(const FeatureMatrix& xa, const std::vector<std::uint8_t>& ya,
                    const FeatureMatrix& xb, const std::vector<std::uint8_t>& yb,
                    std::span<const std::size_t> ks, std::size_t* best_k) {
  const auto tuned = tune_knn(xa, ya, ks, 5, 11);
  Standardizer s;
  s.fit(xa);
  if (best_k) *best_k = tuned.best;
  return share_correct(knn_predict(s.transform(xa), ya, tuned.best, s.transform(xb)), yb);
}

void criterion_synthetic(const SynthSplit& data) {
  const double c0 = cpu_seconds();
  const auto result = train(small_g(), data.train, small_train());
  const double cpu = cpu_seconds() - c0;
  auto model = result.model;
  const double cnn = accuracy(model, data.test);

  const auto ya = labels(data.train), yb = labels(data.test);
  const auto ks = range(1, 40);
  std::size_t k_stack = 0, k_hand = 0;
  const double knn = knn_accuracy(stacks(data.train), ya, stacks(data.test), yb, ks, &k_stack);
  const double knn_hand =
      knn_accuracy(handcrafted(data.train), ya, handcrafted(data.test), yb, ks, &k_hand);

  report(6, "synthetic end-to-end",
         cnn >= 0.95 && result.epochs.size() <= 20 && cpu <= 300.0 && cnn > knn,
         fmt("%zu train / %zu test, CNN %.1f%% after %zu epochs in %.0f s CPU; "
             "KNN on channel stacks %.1f%% (k=%zu); [info] KNN on hand-crafted features %.1f%% (k=%zu)",
             data.train.size(), data.test.size(), 100 * cnn, result.epochs.size(), cpu, 100 * knn,
             k_stack, 100 * knn_hand, k_hand));
}

void criterion_ensemble(const SynthSplit& data) {
  const auto r = train_ensemble(small_g(), data.train, small_train(), 7);
  std::vector<double> member_acc;
  for (auto m : r.members) member_acc.push_back(accuracy(m.model, data.test));
  std::vector<double> sorted = member_acc;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[3];
  auto ens = r.ensemble;
  const auto y = labels(data.test);
  const double ens_acc = share_correct(predict_labels(ens, data.test), y);

  std::vector<std::size_t> idx(data.test.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const auto probs = ens.predict(to_batch(data.test, idx));
  double worst = 0;
  for (std::size_t b = 0; b < probs.batch(); ++b) {
    double s = 0;
    for (double v : probs.item(b)) s += v;
    worst = std::max(worst, std::fabs(s - 1.0));
  }
  report(7, "ensemble property", ens_acc >= median && worst <= 1e-12,
         fmt("ensemble %.1f%% vs median member %.1f%% (min %.1f%%, max %.1f%%); max |row sum - 1| %.1e",
             100 * ens_acc, 100 * median, 100 * sorted.front(), 100 * sorted.back(), worst));
}

// --- 8-12. GeoLife ---------------------------------------------------------

void criteria_geolife() {
  const char* root = std::getenv("GEOLIFE_DIR");
  if (!root || !*root) {
    const char* why = "GEOLIFE_DIR not set";
    report(8, "GeoLife sample count", std::nullopt, why);
    report(9, "GeoLife single G", std::nullopt, why);
    report(10, "GeoLife ensemble of 7 G", std::nullopt, why);
    report(11, "GeoLife G beats A", std::nullopt, why);
    report(12, "GeoLife baselines", std::nullopt, why);
    return;
  }
  const std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
  PipelineConfig pc;
  pc.jobs = jobs;
  const auto ds = build_dataset(ingest_geolife(root, kDefaultTripGapSeconds, jobs), pc);
  const auto n = ds.class_counts();
  using M = ModeLabel;
  auto c = [&](M m) { return n[static_cast<std::size_t>(m)]; };
  const bool order = c(M::Walk) > c(M::Bus) && c(M::Bus) > c(M::Bike) && c(M::Bike) > c(M::Train) &&
                     c(M::Train) > c(M::Driving);
  const double dev = std::fabs(static_cast<double>(ds.size()) - 32444.0) / 32444.0;
  report(8, "GeoLife sample count", dev <= 0.15 && order,
         fmt("%zu samples (%.1f%% off), walk %zu bike %zu bus %zu driving %zu train %zu", ds.size(),
             100 * dev, n[0], n[1], n[2], n[3], n[4]));

  auto [tr, te] = split_train_test(ds, 0.8, 1);
  TrainConfig protocol;
  protocol.max_epochs = 62;
  protocol.early_stop = EarlyStop::Test;
  protocol.seed = 1;
  const auto g = build_config("G");
  auto single = train(g, tr, protocol, &te).model;
  const double g_acc = accuracy(single, te);
  report(9, "GeoLife single G", g_acc >= 0.78,
         fmt("test accuracy %.1f%% (test-monitored early stopping)", 100 * g_acc));

  auto ens = train_ensemble(g, tr, protocol, 7, &te, jobs).ensemble;
  const double e_acc = share_correct(predict_labels(ens, te), labels(te));
  report(10, "GeoLife ensemble of 7 G", e_acc >= g_acc + 0.01,
         fmt("ensemble %.1f%% vs single %.1f%%", 100 * e_acc, 100 * g_acc));

  TrainConfig ten = protocol;
  ten.max_epochs = 10;
  auto g10 = train(g, tr, ten, &te).model;
  auto a10 = train(build_config("A"), tr, ten, &te).model;
  const double ga = accuracy(g10, te), aa = accuracy(a10, te);
  report(11, "GeoLife G beats A", ga - aa >= 0.02,
         fmt("G %.1f%% vs A %.1f%% at 10 epochs", 100 * ga, 100 * aa));

  const auto ya = labels(tr), yb = labels(te);
  const auto xa = handcrafted(tr), xb = handcrafted(te);
  std::size_t k = 0;
  const double knn = knn_accuracy(xa, ya, xb, yb, range(3, 40), &k);
  const auto depth = tune_tree(xa, ya, range(1, 40), 5, 11).best;
  DecisionTree tree;
  tree.fit(xa, ya, depth);
  const double dt = share_correct(tree.predict(xb), yb);
  report(12, "GeoLife baselines",
         std::fabs(100 * knn - 63.5) <= 8 && std::fabs(100 * dt - 75.2) <= 8 && k >= 3 && k <= 10,
         fmt("KNN %.1f%% (k=%zu), DT %.1f%% (depth %zu)", 100 * knn, k, 100 * dt, depth));
}

}  // namespace

int main() {
  init_logging();
  if (!std::getenv("MODEWISE_LOG")) spdlog::set_level(spdlog::level::warn);
  const auto t0 = std::chrono::steady_clock::now();
  criterion_gradients();
  criterion_geodesic();
  criterion_savgol();
  criterion_pipeline();
  criterion_shapes();
  const auto data = synth_split();
  criterion_synthetic(data);
  criterion_ensemble(data);
  criteria_geolife();
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%d failing criteria, %.0f s wall\n", g_failures, wall);
  return g_failures == 0 ? 0 : 1;
}
