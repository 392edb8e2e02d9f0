#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "bisam/cli.hpp"
#include "bisam/io.hpp"
#include "support.hpp"

using namespace bisam;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Run r;
  r.code = cli_dispatch(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("bisam_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write_panel_file(const PanelData& panel, const std::string& name = "panel.csv") const {
    std::ofstream f(path(name));
    bisam::write_panel(f, panel);
    return path(name);
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, CalibrateTau) {
  auto r = run({"calibrate-tau", "--p", "0.05"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "1.9207\n");
  r = run({"calibrate-tau", "--p", "0.01"});
  EXPECT_EQ(r.out, "3.3174\n");
  r = run({"calibrate-tau", "--p", "0.01", "--numeric"});
  EXPECT_EQ(r.out, "3.3174\n");
  r = run({"calibrate-tau", "--p", "1.5"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.err, "error: {\"kind\":\"invalid_input\",\"message\":\"invalid probability\"}\n");
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"fit"}).code, 2);
  const auto r = run({"fit", "--input", "x.csv", "--bogus"});
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(r.err.starts_with("error: {\"kind\":\"usage\"")) << r.err;
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({"--version"}).out, "bisam format 1\n");
}

TEST_F(CliTest, InputErrors) {
  auto r = run({"fit", "--input", path("missing.csv")});
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(r.err.find("\"kind\":\"io\"") != std::string::npos) << r.err;

  {
    std::ofstream f(path("bad.csv"));
    f << "unit,time,y\na,1,oops\n";
  }
  r = run({"fit", "--input", path("bad.csv")});
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(r.err.find("parse error at line 2, column 3 (y): 'oops'") != std::string::npos) << r.err;

  {
    std::ofstream f(path("cfg.json"));
    f << R"({"version": 1, "sampler": {"burnin": 5}})";
  }
  const auto panel = write_panel_file(test::noisy_panel(3, 8, 1));
  r = run({"fit", "--input", panel, "--config", path("cfg.json")});
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(r.err.find("unknown config key 'sampler.burnin'") != std::string::npos) << r.err;

  r = run({"fit", "--input", panel, "--tau", "-1"});
  EXPECT_EQ(r.code, 2);
}

TEST_F(CliTest, FitWritesOutputs) {
  auto panel = test::noisy_panel(4, 12, 2, 0.5);
  test::add_step(panel, 2, 6, 6.0);
  const auto input = write_panel_file(panel);
  const auto r = run({"fit", "--input", input, "--burn", "200", "--draws", "500", "--seed", "3", "--out-dir",
                      dir_.string(), "--save-draws"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.starts_with("unit,start,pip\n"));
  EXPECT_NE(r.out.find("u3,7,"), std::string::npos) << r.out;
  for (const char* f : {"pips.csv", "report.json", "fitpath.csv", "draws.csv"}) {
    EXPECT_TRUE(fs::exists(dir_ / f)) << f;
  }
  const auto loaded = load_draws(path("draws.csv"));
  EXPECT_EQ(loaded.draws.seed, 3u);
  EXPECT_EQ(loaded.draws.records(), 500);
  EXPECT_EQ(loaded.header.at("run").at("units").size(), 4u);
}

TEST_F(CliTest, FitIsReproducible) {
  const auto input = write_panel_file(test::noisy_panel(3, 10, 4));
  fs::create_directories(dir_ / "a");
  fs::create_directories(dir_ / "b");
  for (const char* sub : {"a", "b"}) {
    const auto r = run({"fit", "--input", input, "--burn", "50", "--draws", "100", "--seed", "9", "--out-dir",
                        (dir_ / sub).string(), "--save-draws"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  for (const char* f : {"pips.csv", "report.json", "fitpath.csv", "draws.csv"}) {
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  }
}

TEST_F(CliTest, SimulateIsByteIdentical) {
  const std::vector<std::string> base{"simulate", "--layout", "count:2", "--sizes", "0,3", "--reps", "2",
                                      "--units", "4", "--times", "10", "--burn", "30", "--draws", "60",
                                      "--seed", "11"};
  auto serial = base;
  serial.push_back("--serial");
  const auto a = run(base);
  const auto b = run(serial);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_TRUE(a.out.starts_with("# bisam/1 metrics\nmethod,layout,size,metric,mean,se\n"));

  auto to_file = base;
  to_file.insert(to_file.end(), {"--out", path("m.csv")});
  ASSERT_EQ(run(to_file).code, 0);
  EXPECT_EQ(slurp(dir_ / "m.csv"), a.out);
}

TEST_F(CliTest, SimulateReportsFailures) {
  const auto r = run({"simulate", "--layout", "dense", "--units", "4", "--times", "10", "--sizes", "1", "--reps",
                      "1", "--methods", "alasso"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("warning: "), std::string::npos);
  EXPECT_NE(r.err.find("infeasible layout"), std::string::npos);
  EXPECT_NE(r.out.find("alasso,dense,1,tpr,NA,NA"), std::string::npos) << r.out;
}

TEST_F(CliTest, Alasso) {
  auto panel = test::noisy_panel(5, 15, 5);
  test::add_step(panel, 1, 8, 10.0);
  const auto input = write_panel_file(panel);
  const auto r = run({"alasso", "--input", input, "--out-dir", dir_.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("u2,9,"), std::string::npos) << r.out;
  std::ifstream f(path("alasso_breaks.csv"));
  const auto breaks = read_breaks_csv(f);
  EXPECT_FALSE(breaks.empty());
  const auto j = nlohmann::json::parse(slurp(dir_ / "alasso.json"));
  EXPECT_EQ(j.at("fixed_effects_penalized"), false);
  EXPECT_LT(j.at("kkt_violation").get<double>(), 1e-9);
  EXPECT_EQ(run({"alasso", "--input", input, "--selection", "aic"}).code, 2);
}

TEST_F(CliTest, Score) {
  {
    std::ofstream d(path("det.csv"));
    d << "unit,time\nA,2004\nB,2010\nC,2002\n";
    std::ofstream t(path("truth.csv"));
    t << "unit,time\nA,2004\nB,2009\n";
  }
  auto r = run({"score", "--detected", path("det.csv"), "--truth", path("truth.csv"), "--q", "10"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out,
            "# bisam/1 score\n"
            "metric,value\n"
            "true_positives,1\n"
            "false_positives,2\n"
            "false_negatives,1\n"
            "near_misses,1\n"
            "tpr,0.5\n"
            "fpr,0.25\n"
            "precision,0.3333333333\n"
            "f1,0.4\n"
            "near_miss,1\n");
  r = run({"score", "--detected", path("det.csv"), "--truth", path("truth.csv"), "--units", "3", "--times", "8"});
  EXPECT_NE(r.out.find("fpr,0.1538461538\n"), std::string::npos) << r.out;
  r = run({"score", "--detected", path("det.csv"), "--truth", path("truth.csv")});
  EXPECT_EQ(r.code, 2);
}
