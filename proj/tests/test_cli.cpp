#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <ctime>
#include <memory>

#include <nlohmann/json.hpp>

#include "modewise/pipeline.hpp"
#include "modewise/synthgen.hpp"
#include "support.hpp"

using namespace modewise;
using testing_support::TempDir;
using testing_support::read_bytes;
using testing_support::write_text;

namespace {

struct RunResult {
  int status = -1;
  std::string out;
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(MODEWISE_CLI) + " " + args;
  RunResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int raw = ::pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

std::string to_plt(const Trip& trip) {
  std::string s = "Geolife trajectory\nWGS 84\nAltitude is in Feet\nReserved 3\n"
                  "0,2,255,My Track,0,0,2,8421376\n0\n";
  for (const auto& lp : trip.points) {
    const auto secs = static_cast<std::time_t>(lp.point.t);
    std::tm tm{};
    ::gmtime_r(&secs, &tm);
    char line[160];
    std::snprintf(line, sizeof line, "%.9f,%.9f,0,100,%.10f,%04d-%02d-%02d,%02d:%02d:%02d\n",
                  lp.point.lat, lp.point.lon, lp.point.t / 86400.0 + 25569.0, tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
    s += line;
  }
  return s;
}

// One small synthetic corpus and model shared by the tests in this file.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = std::make_unique<TempDir>();
    const auto& d = *dir_;
    ASSERT_EQ(run("synth --per-mode 16 --points 200 --seed 4 --out " + q(d / "trips.jsonl")).status, 0);
    ASSERT_EQ(run("preprocess --in " + q(d / "trips.jsonl") + " --out " + q(d / "all.tmsg")).status, 0);
    ASSERT_EQ(run("split --in " + q(d / "all.tmsg") + " --frac 0.8 --seed 1 --out-train " +
                  q(d / "a.tmsg") + " --out-test " + q(d / "b.tmsg"))
                  .status,
              0);
    ASSERT_EQ(run("train --train " + q(d / "a.tmsg") +
                  " --config G --filters 8,16,32,64 --batch-size 8 --epochs 15 --early-stop-on none --seed 3 --out " +
                  q(d / "model.tmmd") + " --report " + q(d / "run.json"))
                  .status,
              0);
  }
  static void TearDownTestSuite() { dir_.reset(); }

  static std::unique_ptr<TempDir> dir_;
};

std::unique_ptr<TempDir> CliTest::dir_;

}  // namespace

TEST_F(CliTest, SpecShowG) {
  const auto r = run("spec show G");
  ASSERT_EQ(r.status, 0);
  const auto j = nlohmann::json::parse(r.out);
  std::string kinds;
  for (const auto& l : j["layers"]) kinds += l["kind"].get<std::string>() + " ";
  EXPECT_NE(kinds.find("conv"), std::string::npos);
  std::vector<std::size_t> dense;
  for (const auto& l : j["layers"]) {
    if (l["kind"] == "dense") dense.push_back(l["units"]);
  }
  EXPECT_EQ(dense, (std::vector<std::size_t>{800, 5}));
  EXPECT_EQ(run("spec show Z 2>/dev/null").status, 1);
}

TEST_F(CliTest, SplitTenSamples) {
  const auto& d = *dir_;
  const auto all = read_dataset_file(d / "all.tmsg");
  ASSERT_GE(all.size(), 10u);
  std::vector<std::size_t> idx(10);
  for (std::size_t i = 0; i < 10; ++i) idx[i] = i;
  write_dataset_file(d / "ten.tmsg", all.subset(idx));
  const auto r = run("split --in " + q(d / "ten.tmsg") + " --frac 0.8 --seed 2 --out-train " +
                     q(d / "t8.tmsg") + " --out-test " + q(d / "t2.tmsg"));
  ASSERT_EQ(r.status, 0);
  const auto a = read_dataset_file(d / "t8.tmsg");
  const auto b = read_dataset_file(d / "t2.tmsg");
  EXPECT_EQ(a.size(), 8u);
  EXPECT_EQ(b.size(), 2u);
  EXPECT_TRUE(a.has_features());
  EXPECT_TRUE(std::filesystem::exists(d / "t8.tmsg.manifest.json"));
}

TEST_F(CliTest, ExitCodes) {
  const auto& d = *dir_;
  EXPECT_EQ(run("split --bogus 2>/dev/null").status, 1);
  EXPECT_EQ(run("2>/dev/null").status, 1);
  EXPECT_EQ(run("split --in " + q(d / "missing.tmsg") + " --out-train x --out-test y 2>/dev/null").status, 2);
  write_text(d / "bad.tmsg", "XXXX0000000000000000");
  EXPECT_EQ(run("evaluate --model " + q(d / "model.tmmd") + " --test " + q(d / "bad.tmsg") + " 2>/dev/null").status, 2);
  EXPECT_EQ(run("evaluate --model " + q(d / "a.tmsg") + " --test " + q(d / "b.tmsg") + " 2>/dev/null").status, 2);
  EXPECT_EQ(run("train --train " + q(d / "a.tmsg") + " --early-stop-on test --out x 2>/dev/null").status, 1);
  EXPECT_EQ(run("--help").status, 0);
}

TEST_F(CliTest, EvaluateAndReports) {
  const auto& d = *dir_;
  const auto r = run("evaluate --model " + q(d / "model.tmmd") + " --test " + q(d / "b.tmsg") +
                     " --report " + q(d / "eval.json"));
  ASSERT_EQ(r.status, 0);
  const auto j = nlohmann::json::parse(read_bytes(d / "eval.json"));
  EXPECT_EQ(j["total"], read_dataset_file(d / "b.tmsg").size());
  EXPECT_GT(j["accuracy"].get<double>(), 0.6);
  const auto run_j = nlohmann::json::parse(read_bytes(d / "run.json"));
  EXPECT_EQ(run_j["epochs"].size(), 15u);
  const auto m = nlohmann::json::parse(read_bytes(d / "model.tmmd.manifest.json"));
  EXPECT_EQ(m["inputs"][0]["sha256"].get<std::string>().size(), 64u);
  EXPECT_EQ(m["seeds"][0], 3);
}

TEST_F(CliTest, PredictWalkTrack) {
  const auto& d = *dir_;
  SynthConfig cfg;
  cfg.per_mode = 1;
  cfg.points_per_track = 200;
  cfg.seed = 999;
  write_text(d / "walk.plt", to_plt(generate(cfg)[0].trip));
  const auto r = run("predict --model " + q(d / "model.tmmd") + " --plt " + q(d / "walk.plt"));
  ASSERT_EQ(r.status, 0);
  const auto j = nlohmann::json::parse(r.out);
  ASSERT_EQ(j["chunks"].size(), 1u);
  const auto& c = j["chunks"][0];
  EXPECT_EQ(c["label"], 0);
  EXPECT_EQ(c["mode"], "walk");
  const auto p = c["probabilities"].get<std::vector<double>>();
  ASSERT_EQ(p.size(), 5u);
  double sum = 0;
  for (double v : p) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-9);
  EXPECT_EQ(std::max_element(p.begin(), p.end()) - p.begin(), 0);
}

TEST_F(CliTest, OutputsAreDeterministic) {
  const auto& d = *dir_;
  ASSERT_EQ(run("synth --per-mode 3 --points 220 --seed 8 --noise --out " + q(d / "s1.jsonl")).status, 0);
  ASSERT_EQ(run("synth --per-mode 3 --points 220 --seed 8 --noise --jobs 2 --out " + q(d / "s2.jsonl")).status, 0);
  EXPECT_EQ(read_bytes(d / "s1.jsonl"), read_bytes(d / "s2.jsonl"));
  ASSERT_EQ(run("preprocess --in " + q(d / "s1.jsonl") + " --out " + q(d / "p1.tmsg")).status, 0);
  ASSERT_EQ(run("preprocess --in " + q(d / "s2.jsonl") + " --out " + q(d / "p2.tmsg")).status, 0);
  EXPECT_EQ(read_bytes(d / "p1.tmsg"), read_bytes(d / "p2.tmsg"));
  for (const char* name : {"m1.tmmd", "m2.tmmd"}) {
    ASSERT_EQ(run("train --train " + q(d / "p1.tmsg") +
                  " --config A --filters 2,2,2,2 --epochs 2 --seed 5 --out " + q(d / name))
                  .status,
              0);
  }
  EXPECT_EQ(read_bytes(d / "m1.tmmd"), read_bytes(d / "m2.tmmd"));
}

TEST_F(CliTest, BaselineAndEnsemble) {
  const auto& d = *dir_;
  const auto r = run("baseline --algo dt --train " + q(d / "a.tmsg") + " --test " + q(d / "b.tmsg") +
                     " --report " + q(d / "dt.json"));
  ASSERT_EQ(r.status, 0);
  const auto j = nlohmann::json::parse(read_bytes(d / "dt.json"));
  EXPECT_EQ(j["max_depth"], 10);
  ASSERT_EQ(run("baseline --algo knn --features channels --search --folds 3 --train " + q(d / "a.tmsg") +
                " --test " + q(d / "b.tmsg"))
                .status,
            0);
  ASSERT_EQ(run("ensemble-train --n 2 --config A --filters 2,2,2,2 --epochs 1 --early-stop-on none --train " +
                q(d / "a.tmsg") + " --out " + q(d / "ens"))
                .status,
            0);
  EXPECT_TRUE(std::filesystem::exists(d / "ens" / "member_00.tmmd"));
  EXPECT_TRUE(std::filesystem::exists(d / "ens" / "member_01.tmmd"));
  EXPECT_EQ(run("evaluate --model " + q(d / "ens") + " --test " + q(d / "b.tmsg")).status, 0);
}
