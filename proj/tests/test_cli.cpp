#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "geosub/cli.hpp"
#include "geosub/experiments.hpp"
#include "geosub/serialization.hpp"
#include "temp_dir.hpp"

using namespace geosub;
using geosub::testing::TempDir;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

json read_json(const fs::path& p) { return json::parse(io::read_file(p)); }

std::vector<std::string> read_lines(const fs::path& p) {
  std::istringstream in(io::read_file(p));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

std::string small_transport(const TempDir& dir) {
  const std::string d = (dir / "transport").string();
  EXPECT_EQ(run({"generate", "transport", "--grid-points", "200", "--snapshots", "80", "--out", d})
                .code,
            0);
  return d;
}

}  // namespace

TEST(CliGenerate, TransportDefaults) {
  TempDir dir;
  const std::string d = (dir / "d").string();
  const CliResult r = run({"generate", "transport", "--out", d});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "d" / "snapshots.bin"));
  EXPECT_TRUE(fs::exists(dir / "d" / "snapshots.json"));
  const json m = read_json(dir / "d" / "manifest.json");
  EXPECT_EQ(m.at("command"), "generate");
  EXPECT_EQ(m.at("status"), "ok");
  EXPECT_EQ(m.at("config").at("grid_points"), 1024);
  EXPECT_EQ(m.at("config").at("snapshots"), 500);
  EXPECT_DOUBLE_EQ(m.at("config").at("wave_speed").get<double>(), 10.0);
  EXPECT_TRUE(m.contains("started_at"));
  EXPECT_TRUE(m.contains("wall_time_s"));
  EXPECT_EQ(m.at("format_version"), io::kFormatVersion);
}

TEST(CliGenerate, Parabola) {
  TempDir dir;
  ASSERT_EQ(run({"generate", "parabola", "--out", dir.path().string()}).code, 0);
  const SnapshotSet s = io::load_snapshots(dir.path());
  EXPECT_EQ(s.Q.rows(), 2);
  EXPECT_EQ(s.Q.cols(), 25);
  EXPECT_EQ(s.times.size(), 25u);
}

TEST(CliGenerate, OverrideEchoedAndReadBackMatches) {
  TempDir dir;
  ASSERT_EQ(run({"generate", "transport", "--snapshots", "100", "--out", dir.path().string()}).code,
            0);
  EXPECT_EQ(read_json(dir / "manifest.json").at("config").at("snapshots"), 100);
  TransportConfig c;
  c.snapshot_count = 100;
  const SnapshotSet expected = gen_transport(c);
  const SnapshotSet back = io::load_snapshots(dir.path());
  EXPECT_EQ(back.Q, expected.Q);
  EXPECT_EQ(back.times, expected.times);
}

TEST(CliGenerate, UsageErrors) {
  TempDir dir;
  EXPECT_EQ(run({"generate", "vortex", "--out", dir.path().string()}).code, 1);
  EXPECT_EQ(run({"generate", "transport", "--snapshots", "7", "--out", dir.path().string()}).code,
            1);
  EXPECT_EQ(run({"generate", "transport", "--snapshots", "many"}).code, 1);
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(CliFit, ParabolaObjectiveAndTrainingEvaluation) {
  TempDir dir;
  const std::string data = (dir / "p").string();
  const std::string model = (dir / "m").string();
  ASSERT_EQ(run({"generate", "parabola", "--out", data}).code, 0);
  const CliResult f = run({"fit", "--data", data, "--rank", "1", "--features", "2", "--out", model});
  ASSERT_EQ(f.code, 0) << f.err;
  const json report = read_json(dir / "m" / "fit_report.json");
  const double final_objective = report.at("final_objective").get<double>();
  EXPECT_NEAR(final_objective, 0.011, 0.001);
  for (const char* name : {"params.json", "params_T.bin", "features.json", "features_basis.bin",
                           "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir / "m" / name)) << name;
  }

  const std::string ev = (dir / "e").string();
  const CliResult e = run({"evaluate", "--model", model, "--data", data, "--tau", "0.25", "--out", ev});
  ASSERT_EQ(e.code, 0) << e.err;
  const json summary = read_json(dir / "e" / "summary.json");
  EXPECT_NEAR(summary.at("aggregate_error").get<double>(), final_objective, 1e-12);
  EXPECT_NEAR(summary.at("pod_error_r").get<double>(), 0.278, 0.005);
  const auto lines = read_lines(dir / "e" / "errors.csv");
  EXPECT_EQ(lines.front(), "index,time,tau,abs_error,rel_error");
  EXPECT_EQ(lines.size(), 26u);
  EXPECT_TRUE(fs::exists(dir / "e" / "basis_tau_0.bin"));
  EXPECT_EQ(summary.at("bases").at(0).at("tau"), 0.25);
}

TEST(CliFit, Reconstruction) {
  TempDir dir;
  const std::string data = (dir / "p").string();
  const std::string model = (dir / "m").string();
  ASSERT_EQ(run({"generate", "parabola", "--out", data}).code, 0);
  ASSERT_EQ(run({"fit", "--data", data, "--rank", "1", "--features", "2", "--out", model}).code, 0);
  ASSERT_EQ(run({"evaluate", "--model", model, "--data", data, "--reconstruct", "--out",
                 (dir / "e").string()})
                .code,
            0);
  const SnapshotSet rec = io::load_snapshots(dir / "e" / "reconstruction");
  const SnapshotSet orig = io::load_snapshots(data);
  EXPECT_EQ(rec.Q.cols(), 25);
  EXPECT_NEAR((rec.Q - orig.Q).norm() / orig.Q.norm(), 0.011, 0.001);
}

TEST(CliFit, SeededRunsAreIdentical) {
  TempDir dir;
  const std::string data = small_transport(dir);
  for (const char* out : {"a", "b"}) {
    ASSERT_EQ(run({"fit", "--data", data, "--rank", "2", "--features", "8", "--restarts", "1",
                   "--seed", "7", "--max-iters", "200", "--out", (dir / out).string()})
                  .code,
              0);
  }
  for (const char* name : {"params.json", "params_T.bin", "features.json", "features_basis.bin",
                           "features_qref.bin", "features_coords.bin", "fit_report.json"}) {
    EXPECT_EQ(io::read_file(dir / "a" / name), io::read_file(dir / "b" / name)) << name;
  }
  const json ma = read_json(dir / "a" / "manifest.json");
  EXPECT_EQ(ma.at("config").at("seed"), 7);
  EXPECT_EQ(ma.at("config").at("solver").at("rng_seed"), rank_seed(7, 2));
}

TEST(CliFit, NumericalFailureWritesDiagnostics) {
  TempDir dir;
  std::ofstream(dir / "flat.csv") << "0,1,2,3\n1,1,1,1\n2,2,2,2\n";
  const std::string out = (dir / "o").string();
  const CliResult r = run({"fit", "--data", (dir / "flat.csv").string(), "--rank", "1", "--features",
                     "1", "--reference", "mean", "--out", out});
  EXPECT_EQ(r.code, 2);
  const json diag = read_json(dir / "o" / "diagnostics.json");
  EXPECT_EQ(diag.at("kind"), "numerical");
  EXPECT_EQ(diag.at("details").at("usable_rank"), 0);
  EXPECT_EQ(read_json(dir / "o" / "manifest.json").at("status"), "numerical_failure");
}

TEST(CliFit, RankAboveDataRankNeedsFlag) {
  TempDir dir;
  const std::string data = small_transport(dir);
  const std::vector<std::string> base{"fit",      "--data",      data, "--rank",
                                      "1",        "--features",  "40", "--restarts",
                                      "1",        "--max-iters", "20"};
  auto strict = base;
  strict.insert(strict.end(), {"--out", (dir / "s").string()});
  EXPECT_EQ(run(strict).code, 2);
  EXPECT_TRUE(read_json(dir / "s" / "diagnostics.json").at("details").contains("usable_rank"));
  auto padded = base;
  padded.insert(padded.end(), {"--allow-rank-deficient", "--out", (dir / "p").string()});
  EXPECT_EQ(run(padded).code, 0);
}

TEST(CliEvaluate, DimensionMismatchNamesDims) {
  TempDir dir;
  const std::string p = (dir / "p").string();
  const std::string model = (dir / "m").string();
  ASSERT_EQ(run({"generate", "parabola", "--out", p}).code, 0);
  ASSERT_EQ(run({"fit", "--data", p, "--rank", "1", "--features", "2", "--out", model}).code, 0);
  const std::string t = small_transport(dir);
  const CliResult r = run({"evaluate", "--model", model, "--data", t, "--out", (dir / "e").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("200"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("2x2"), std::string::npos) << r.err;
}

TEST(CliSweep, DeterministicAndConsistentWithFit) {
  TempDir dir;
  const std::string data = small_transport(dir);
  const std::vector<std::string> solver{"--restarts", "2", "--seed", "3", "--max-iters", "150"};
  for (const char* out : {"s1", "s2"}) {
    std::vector<std::string> args{"sweep",      "--data", data, "--ranks", "2:4:2", "--features",
                                  "10",         "--out",  (dir / out).string()};
    args.insert(args.end(), solver.begin(), solver.end());
    const CliResult r = run(args);
    ASSERT_EQ(r.code, 0) << r.err;
  }
  const std::string csv = io::read_file(dir / "s1" / "sweep.csv");
  EXPECT_EQ(csv, io::read_file(dir / "s2" / "sweep.csv"));
  const auto lines = read_lines(dir / "s1" / "sweep.csv");
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0], "r,pod_r,pod_2r,dyn_mean,dyn_best,iters_mean");
  EXPECT_EQ(read_json(dir / "s1" / "manifest.json").at("command"), "sweep");

  // Single-rank sweep equals fit on the training split + evaluate on the test split.
  std::vector<std::string> one{"sweep", "--data", data, "--ranks", "3", "--features", "10",
                               "--out", (dir / "one").string()};
  one.insert(one.end(), solver.begin(), solver.end());
  ASSERT_EQ(run(one).code, 0);
  std::vector<std::string> fit{"fit",       "--data",  data, "--split", "train", "--rank", "3",
                               "--features", "10",     "--out", (dir / "fit").string()};
  fit.insert(fit.end(), solver.begin(), solver.end());
  ASSERT_EQ(run(fit).code, 0);
  ASSERT_EQ(run({"evaluate", "--model", (dir / "fit").string(), "--data", data, "--split", "test",
                 "--out", (dir / "ev").string()})
                .code,
            0);
  const json summary = read_json(dir / "ev" / "summary.json");
  const auto row = read_lines(dir / "one" / "sweep.csv").at(1);
  std::vector<double> cells;
  std::stringstream ss(row);
  for (std::string c; std::getline(ss, c, ',');) cells.push_back(std::stod(c));
  EXPECT_EQ(cells.at(1), summary.at("pod_error_r").get<double>());
  EXPECT_EQ(cells.at(2), summary.at("pod_error_2r").get<double>());
  EXPECT_EQ(cells.at(4), summary.at("aggregate_error").get<double>());
}

TEST(CliSweep, RankListParsing) {
  TempDir dir;
  const std::string data = small_transport(dir);
  EXPECT_EQ(run({"sweep", "--data", data, "--ranks", "1,2", "--features", "6", "--restarts", "1",
                 "--max-iters", "5", "--out", (dir / "a").string()})
                .code,
            0);
  EXPECT_EQ(read_lines(dir / "a" / "sweep.csv").size(), 3u);
  EXPECT_EQ(run({"sweep", "--data", data, "--ranks", "4:2", "--features", "10", "--out",
                 (dir / "b").string()})
                .code,
            1);
  EXPECT_EQ(run({"sweep", "--data", data, "--ranks", "a,b", "--out", (dir / "c").string()}).code,
            1);
}

TEST(CliTransport, RankTwentyConvergesAndBeatsPod) {
  TempDir dir;
  const std::string data = (dir / "t").string();
  ASSERT_EQ(run({"generate", "transport", "--out", data}).code, 0);
  const std::string model = (dir / "m").string();
  const CliResult f = run({"fit", "--data", data, "--split", "train", "--rank", "20", "--features",
                     "200", "--allow-rank-deficient", "--restarts", "1", "--out", model});
  ASSERT_EQ(f.code, 0) << f.err;
  const json report = read_json(dir / "m" / "fit_report.json");
  EXPECT_TRUE(report.at("converged").get<bool>());
  EXPECT_LT(report.at("grad_norm_trace").back().get<double>(), 1e-4);
  ASSERT_EQ(run({"evaluate", "--model", model, "--data", data, "--split", "test", "--out",
                 (dir / "e").string()})
                .code,
            0);
  const json summary = read_json(dir / "e" / "summary.json");
  EXPECT_LT(summary.at("aggregate_error").get<double>(), summary.at("pod_error_r").get<double>());
}
