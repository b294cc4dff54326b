#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("facade_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  CliResult facade(const std::string& args) {
    const fs::path out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = std::string("\"") + FACADE_CLI_PATH + "\" " + args + " >\"" +
                            out.string() + "\" 2>\"" + err.string() + "\"";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).generic_string()] = slurp(e.path());
  }
  return files;
}

// Keeps every other box of each frame.
void write_half(const fs::path& src, const fs::path& dst) {
  auto doc = nlohmann::json::parse(slurp(src));
  for (auto& frame : doc.at("frames")) {
    auto& boxes = frame.at("boxes");
    nlohmann::json kept = nlohmann::json::array();
    for (std::size_t i = 0; i < boxes.size(); i += 2) kept.push_back(boxes[i]);
    boxes = kept;
  }
  std::ofstream(dst) << doc.dump(2);
}

TEST_F(Cli, SynthIsReproducible) {
  ASSERT_EQ(facade("synth --out " + path("a") + " --seed 7 --dropout 0.15 --jitter 2").code, 0);
  ASSERT_EQ(facade("synth --out " + path("b") + " --seed 7 --dropout 0.15 --jitter 2").code, 0);
  const auto a = snapshot(dir_ / "a");
  EXPECT_EQ(a, snapshot(dir_ / "b"));
  EXPECT_TRUE(a.count("sequence.json"));
  EXPECT_TRUE(a.count("telemetry.csv"));
  EXPECT_TRUE(a.count("frames/f000.pgm"));
  EXPECT_NE(a.at("detections.json"), a.at("truth.json"));
}

TEST_F(Cli, SynthRejectsSingleFrame) {
  const auto r = facade("synth --out " + path("x") + " --frames 1");
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(nlohmann::json::parse(r.err).at("exit_code"), 2);
}

TEST_F(Cli, PipelineOnSyntheticFacade) {
  ASSERT_EQ(facade("synth --out " + path("d") + " --seed 3 --dropout 0.15").code, 0);
  const auto r = facade("pipeline --config " + path("d/sequence.json") + " --out " + path("o"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("windows=20 storeys=4 area_ratio=", 0), 0u) << r.out;
  for (const char* f : {"metrics.json", "panorama.svg", "diagnostics.json", "completed.json"}) {
    EXPECT_TRUE(fs::exists(dir_ / "o" / f)) << f;
  }
  const auto metrics = nlohmann::json::parse(slurp(dir_ / "o/metrics.json"));
  EXPECT_EQ(metrics.at("window_count"), 20);
  EXPECT_EQ(metrics.at("windows_per_storey"), nlohmann::json({5, 5, 5, 5}));

  const auto skip = facade("pipeline --config " + path("d/sequence.json") + " --out " + path("s") +
                           " --skip-postprocess");
  ASSERT_EQ(skip.code, 0) << skip.err;
  EXPECT_LE(nlohmann::json::parse(slurp(dir_ / "s/metrics.json")).at("window_count").get<int>(), 20);
}

TEST_F(Cli, PipelineMissingTelemetry) {
  ASSERT_EQ(facade("synth --out " + path("d") + " --frames 4").code, 0);
  fs::remove(dir_ / "d/telemetry.csv");
  const auto r = facade("pipeline --config " + path("d/sequence.json") + " --out " + path("o"));
  EXPECT_EQ(r.code, 2);
  const auto err = nlohmann::json::parse(r.err);
  EXPECT_EQ(err.at("error"), "io");
  EXPECT_NE(err.at("message").get<std::string>().find("telemetry.csv"), std::string::npos);
}

TEST_F(Cli, PipelineRejectsBadOptions) {
  ASSERT_EQ(facade("synth --out " + path("d") + " --frames 4").code, 0);
  EXPECT_EQ(facade("pipeline --config " + path("d/sequence.json") + " --out " + path("o") +
                   " --ncc-threshold 1.5").code, 2);
  EXPECT_EQ(facade("pipeline --config " + path("d/sequence.json") + " --out " + path("o") +
                   " --extent 1,2,3").code, 2);
  EXPECT_EQ(facade("pipeline --out " + path("o")).code, 2);
  EXPECT_EQ(facade("bogus").code, 2);
}

TEST_F(Cli, EvalAgainstTruth) {
  ASSERT_EQ(facade("synth --out " + path("d") + " --seed 4 --jitter 2").code, 0);
  const auto self = facade("eval --pred " + path("d/truth.json") + " --truth " + path("d/truth.json") +
                           " --out " + path("self.json"));
  ASSERT_EQ(self.code, 0) << self.err;
  EXPECT_NE(self.out.find("ALL"), std::string::npos);
  const auto agg = nlohmann::json::parse(slurp(dir_ / "self.json")).at("aggregate");
  EXPECT_EQ(agg.at("precision"), 1.0);
  EXPECT_EQ(agg.at("recall"), 1.0);
  EXPECT_EQ(agg.at("ap"), 1.0);

  write_half(dir_ / "d/truth.json", dir_ / "half.json");
  ASSERT_EQ(facade("eval --pred " + path("half.json") + " --truth " + path("d/truth.json") + " --out " +
                   path("half_eval.json")).code, 0);
  const auto half = nlohmann::json::parse(slurp(dir_ / "half_eval.json")).at("aggregate");
  EXPECT_EQ(half.at("precision"), 1.0);
  EXPECT_NEAR(half.at("recall").get<double>(), 0.5, 0.05);

  ASSERT_EQ(facade("eval --pred " + path("d/detections.json") + " --truth " + path("d/truth.json") +
                   " --out " + path("loose.json")).code, 0);
  ASSERT_EQ(facade("eval --pred " + path("d/detections.json") + " --truth " + path("d/truth.json") +
                   " --iou 0.99 --out " + path("strict.json")).code, 0);
  const double loose = nlohmann::json::parse(slurp(dir_ / "loose.json")).at("aggregate").at("recall");
  const double strict = nlohmann::json::parse(slurp(dir_ / "strict.json")).at("aggregate").at("recall");
  EXPECT_LT(strict, loose);
}

TEST_F(Cli, EvalRejectsBadInput) {
  std::ofstream(dir_ / "junk.json") << "{not json";
  EXPECT_EQ(facade("eval --pred " + path("junk.json") + " --truth " + path("junk.json")).code, 2);
  EXPECT_EQ(facade("eval --pred " + path("missing.json") + " --truth " + path("missing.json")).code, 2);
}

TEST_F(Cli, ReportRendersPanorama) {
  ASSERT_EQ(facade("synth --out " + path("d") + " --seed 5").code, 0);
  ASSERT_EQ(facade("pipeline --config " + path("d/sequence.json") + " --out " + path("o")).code, 0);
  ASSERT_EQ(facade("report --metrics " + path("o/metrics.json") + " --out " + path("r1.svg")).code, 0);
  ASSERT_EQ(facade("report --metrics " + path("o/metrics.json") + " --out " + path("r2.svg")).code, 0);
  const auto svg = slurp(dir_ / "r1.svg");
  EXPECT_EQ(svg, slurp(dir_ / "r2.svg"));
  EXPECT_EQ(svg, slurp(dir_ / "o/panorama.svg"));
  std::size_t windows = 0;
  for (auto p = svg.find("class=\"window\""); p != std::string::npos; p = svg.find("class=\"window\"", p + 1)) {
    ++windows;
  }
  EXPECT_EQ(windows, 20u);

  std::ofstream(dir_ / "empty.json")
      << R"({"window_count":0,"storey_count":0,"windows_per_storey":[],"area_ratio":0,)"
      << R"("facade_extent":{"w_m":0,"h_m":0},"unique_windows":[]})";
  ASSERT_EQ(facade("report --metrics " + path("empty.json") + " --out " + path("e.svg")).code, 0);
  EXPECT_NE(slurp(dir_ / "e.svg").find("W=0 S=0"), std::string::npos);

  std::ofstream(dir_ / "broken.json") << "[]";
  EXPECT_EQ(facade("report --metrics " + path("broken.json") + " --out " + path("b.svg")).code, 2);
}

}  // namespace
