#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "macekit/cli.hpp"
#include "macekit/ingest.hpp"
#include "test_util.hpp"

namespace macekit {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

struct Outcome {
  int code = 0;
  std::string out, err;
};

Outcome run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

constexpr const char* kScenario = R"({
  "seed": 3,
  "detection": {"n_videos": 12, "minutes_per_video": 1.0, "outside_frames": 30, "p_nbi": 0.5, "polyps_min": 2,
                "polyps_max": 3},
  "embeddings": {"dim": 4, "groups": [
    {"name": "ref", "n": 300, "frames_per_unit": 10},
    {"name": "near", "n": 300, "frames_per_unit": 10, "mean": 0.2},
    {"name": "far", "n": 300, "frames_per_unit": 10, "mean": 2.0}]}
})";

// One synthetic tree shared by the tests in this file.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new TempDir;
    std::ofstream(*root_ / "scenario.json") << kScenario;
    const auto r = run_cli({"synth", "--scenario", (*root_ / "scenario.json").string(), "--out", (*root_ / "s").string()});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static void TearDownTestSuite() {
    delete root_;
    root_ = nullptr;
  }
  static fs::path synth(const std::string& rel) { return *root_ / "s" / rel; }

  TempDir out_;
  static TempDir* root_;
};

TempDir* CliTest::root_ = nullptr;

TEST_F(CliTest, SynthWritesTreeAndReport) {
  EXPECT_TRUE(fs::exists(synth("bundle/videos.jsonl")));
  EXPECT_TRUE(fs::exists(synth("embeddings/far.mace")));
  EXPECT_TRUE(fs::exists(synth("embeddings/far.keys.jsonl")));
  const auto doc = read_json(synth("synth.json"));
  EXPECT_EQ(doc["tool"], "macekit");
  EXPECT_EQ(doc["command"], "synth");
  EXPECT_EQ(doc["result"]["seed"], 3);
  EXPECT_EQ(doc["inputs"][0]["file"], "scenario.json");
}

TEST_F(CliTest, ValidateExitCodes) {
  auto r = run_cli({"validate", "--data", synth("bundle").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("12 videos"), std::string::npos);

  r = run_cli({"validate", "--data", (out_ / "missing").string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("error"), std::string::npos);

  fs::create_directories(out_ / "bad");
  for (const char* f : {kVideosFile, kFramesFile, kDetectionsFile, kAnnotationsFile}) {
    fs::copy_file(synth("bundle") / f, out_ / "bad" / f);
  }
  std::ofstream(out_ / "bad" / kFramesFile, std::ios::app) << "{\"video_id\":\"nope\",\"frame_idx\":1,\"nbi\":false,\"inside\":true,\"polyp_ids\":[]}\n";
  r = run_cli({"validate", "--data", (out_ / "bad").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("DanglingVideoRef"), std::string::npos) << r.err;
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run_cli({}).code, 2);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
  EXPECT_EQ(run_cli({"mace", "--a", synth("embeddings/ref.mace").string()}).code, 2);
  EXPECT_EQ(run_cli({"--margin", "0", "validate", "--data", synth("bundle").string()}).code, 2);
  EXPECT_EQ(run_cli({"--window", "4", "validate", "--data", synth("bundle").string()}).code, 2);
  EXPECT_EQ(run_cli({"--help"}).code, 0);
  EXPECT_EQ(run_cli({"--version"}).code, 0);
}

TEST_F(CliTest, MaceReport) {
  const auto r = run_cli({"--resamples", "100", "--out", out_.path().string(), "mace", "--a",
                          synth("embeddings/ref.mace").string(), "--b", synth("embeddings/far.mace").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = read_json(out_ / "mace.json");
  const auto& res = doc["result"];
  EXPECT_EQ(res["comparison"], "ref vs far");
  // Planted: 4 * 2^2 = 16.
  EXPECT_NEAR(res["estimate"].get<double>(), 16.0, 2.0);
  EXPECT_LE(res["ci"][0].get<double>(), res["estimate"].get<double>());
  EXPECT_GE(res["ci"][1].get<double>(), res["estimate"].get<double>());
  EXPECT_EQ(res["n_resamples"], 100);
  EXPECT_EQ(doc["inputs"].size(), 4u);  // two files and their sidecars
  const auto csv = slurp(out_ / "mace.csv");
  EXPECT_EQ(csv.rfind("comparison,embedding,estimate,ci_lo,ci_hi,n_resamples,seed\nref vs far,embedding,", 0), 0u);
}

TEST_F(CliTest, MaceTestOrdering) {
  const auto r = run_cli({"--resamples", "200", "--out", out_.path().string(), "mace-test", "--ref",
                          synth("embeddings/ref.mace").string(), "--group", "near=" + synth("embeddings/near.mace").string(),
                          "--group", "far=" + synth("embeddings/far.mace").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "ordering: far > near\n");
  const auto doc = read_json(out_ / "mace_test.json");
  EXPECT_EQ(doc["result"]["tests"][0]["decision"], "Reject");
  EXPECT_EQ(doc["result"]["tests"][0]["p_value"], "<1e-8");
  EXPECT_EQ(run_cli({"--out", out_.path().string(), "mace-test", "--ref", synth("embeddings/ref.mace").string(),
                     "--group", "near=" + synth("embeddings/near.mace").string()})
                .code,
            2);
}

TEST_F(CliTest, EvalSingleAndCompare) {
  auto r = run_cli({"--resamples", "50", "--svg", "--out", out_.path().string(), "eval", "--data",
                    synth("bundle").string(), "--thresholds", "10"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(out_ / "curve.csv"));
  EXPECT_TRUE(fs::exists(out_ / "curve.svg"));
  EXPECT_EQ(slurp(out_ / "curve.svg").rfind("<svg", 0), 0u);
  auto doc = read_json(out_ / "eval.json");
  const auto& ops = doc["result"]["A"]["operating_points"];
  ASSERT_EQ(ops.size(), 2u);
  for (const auto& op : ops) {
    EXPECT_GE(op["tpr"].get<double>(), 0.0);
    EXPECT_LE(op["tpr"].get<double>(), 1.0);
  }

  r = run_cli({"--resamples", "50", "--out", (out_ / "cmp").string(), "eval", "--data", synth("bundle").string(),
               "--data-b", synth("bundle").string(), "--thresholds", "10"});
  ASSERT_EQ(r.code, 0) << r.err;
  doc = read_json(out_ / "cmp" / "eval.json");
  for (const auto& t : doc["result"]["comparison"]["tests"]) {
    EXPECT_EQ(t["tpr_a"], t["tpr_b"]);
    EXPECT_EQ(t["superiority"]["decision"], "FailToReject");
  }
  EXPECT_TRUE(fs::exists(out_ / "cmp" / "compare.csv"));
}

TEST_F(CliTest, CohortSweepAndHistogram) {
  const auto r = run_cli({"--resamples", "50", "--out", out_.path().string(), "cohort", "--data",
                          synth("bundle").string(), "--modality", "nbi", "--min-cohort", "5", "--thresholds", "10"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = read_json(out_ / "cohort_nbi.json");
  const auto& sweep = doc["result"]["sweep"];
  ASSERT_FALSE(sweep.empty());
  EXPECT_DOUBLE_EQ(sweep[0]["threshold"].get<double>(), 0.1);
  std::size_t prev = SIZE_MAX;
  for (const auto& s : sweep) {
    EXPECT_GE(s["polyps"].get<std::size_t>(), 5u);
    EXPECT_LE(s["polyps"].get<std::size_t>(), prev);
    prev = s["polyps"].get<std::size_t>();
  }
  std::size_t videos = 0;
  for (const auto& h : doc["result"]["histogram"]) videos += h["videos"].get<std::size_t>();
  EXPECT_EQ(videos, 12u);
  EXPECT_EQ(doc["result"]["histogram"][0]["videos_at_least_lo"], 12);
  EXPECT_TRUE(fs::exists(out_ / "histogram_nbi.csv"));
}

TEST_F(CliTest, CohortWithoutModalityIsEmpty) {
  const auto r = run_cli({"--resamples", "50", "--out", out_.path().string(), "cohort", "--data",
                          synth("bundle").string(), "--modality", "ce", "--min-cohort", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = read_json(out_ / "cohort_ce.json");
  EXPECT_TRUE(doc["result"]["sweep"].empty());
  EXPECT_EQ(doc["result"]["tests"], 0);
}

TEST_F(CliTest, ProjectWritesCoordinates) {
  const auto r = run_cli({"--out", out_.path().string(), "project", "--set", "ref=" + synth("embeddings/ref.mace").string(),
                          "--set", synth("embeddings/far.mace").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = slurp(out_ / "projection.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 601);
  EXPECT_NE(csv.find("\nfar,"), std::string::npos);
  EXPECT_EQ(run_cli({"--out", out_.path().string(), "project", "--method", "umap", "--set",
                     synth("embeddings/ref.mace").string()})
                .code,
            2);
}

TEST_F(CliTest, ReportsIndependentOfOutputDirAndThreads) {
  const std::vector<std::string> tail{"mace-test", "--ref", synth("embeddings/ref.mace").string(), "--group",
                                      "near=" + synth("embeddings/near.mace").string(), "--group",
                                      "far=" + synth("embeddings/far.mace").string()};
  auto with = [&](const std::string& dir, const std::string& threads) {
    std::vector<std::string> a{"--resamples", "60", "--threads", threads, "--out", (out_ / dir).string()};
    a.insert(a.end(), tail.begin(), tail.end());
    return run_cli(a);
  };
  ASSERT_EQ(with("one", "1").code, 0);
  ASSERT_EQ(with("two", "4").code, 0);
  EXPECT_EQ(slurp(out_ / "one" / "mace_test.json"), slurp(out_ / "two" / "mace_test.json"));
  EXPECT_EQ(slurp(out_ / "one" / "mace_test.csv"), slurp(out_ / "two" / "mace_test.csv"));
}

TEST_F(CliTest, BinaryExitCodes) {
  const std::string bin = MACEKIT_CLI_PATH;
  EXPECT_EQ(std::system((bin + " validate --data " + synth("bundle").string() + " > /dev/null").c_str()), 0);
  const int missing = std::system((bin + " validate --data " + (out_ / "nope").string() + " 2> /dev/null").c_str());
  ASSERT_TRUE(WIFEXITED(missing));
  EXPECT_EQ(WEXITSTATUS(missing), 3);
}

}  // namespace
}  // namespace macekit
