#include "pentrack/io.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace pentrack;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("pentrack_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  Outcome run(const std::string& args) const {
    const fs::path out = dir_ / "stdout.txt";
    const fs::path err = dir_ / "stderr.txt";
    const std::string cmd =
        std::string("\"") + PENTRACK_CLI + "\" " + args + " >\"" + out.string() + "\" 2>\"" + err.string() + "\"";
    const int status = std::system(cmd.c_str());
    Outcome r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  fs::path path(const std::string& name) const { return dir_ / name; }
  std::string q(const std::string& name) const { return "\"" + path(name).string() + "\""; }

  // Small simulated bundle in `sub`.
  void simulate_into(const std::string& sub, const std::string& json = R"({"duration": 120, "n_agents": 6})") {
    spit(path("scene.json"), json);
    const Outcome r = run("simulate " + q("scene.json") + " " + q(sub));
    ASSERT_EQ(r.code, 0) << r.err;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, SimulateWritesBundleDeterministically) {
  simulate_into("a");
  simulate_into("b");
  std::set<std::string> files;
  for (const auto& e : fs::directory_iterator(path("a"))) files.insert(e.path().filename().string());
  EXPECT_EQ(files.size(), 6u);
  for (const auto& f : files) EXPECT_EQ(slurp(path("a") / f), slurp(path("b") / f)) << f;
}

TEST_F(Cli, SimulateBadConfigNamesField) {
  spit(path("bad.json"), R"({"noise": {"dropout_prob": 3}})");
  const Outcome r = run("simulate " + q("bad.json") + " " + q("x"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("noise.dropout_prob"), std::string::npos) << r.err;
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("track").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
}

TEST_F(Cli, EstimateHomographyFromSquareIsIdentity) {
  spit(path("sq.txt"), "0 0 0 0\n1 0 1 0\n1 1 1 1\n0 1 0 1\n");
  const Outcome r = run("estimate-homography " + q("sq.txt") + " -o " + q("h.txt"));
  ASSERT_EQ(r.code, 0) << r.err;
  const Homography h = read_file(path("h.txt"), read_homography);
  EXPECT_LT(canonical_distance(h, Homography::identity()), 1e-9);
  EXPECT_EQ(slurp(path("h.txt")), r.out);
}

TEST_F(Cli, EstimateHomographyRecoversSimulatedMap) {
  simulate_into("s");
  const Outcome r = run("estimate-homography " + q("s/correspondences.txt") + " -o " + q("h.txt"));
  ASSERT_EQ(r.code, 0) << r.err;
  const Homography got = read_file(path("h.txt"), read_homography);
  const Homography truth = read_file(path("s/h_ceiling_to_angled.txt"), read_homography);
  EXPECT_LT(canonical_distance(got, truth), 1e-6);
}

TEST_F(Cli, EstimateHomographyTooFewPairsExitsThree) {
  spit(path("three.txt"), "0 0 0 0\n1 0 1 0\n0 1 0 1\n");
  EXPECT_EQ(run("estimate-homography " + q("three.txt")).code, 3);
  EXPECT_EQ(run("estimate-homography " + q("missing.txt")).code, 4);
}

TEST_F(Cli, TrackEmptyUnsortedAndStable) {
  spit(path("empty.csv"), "");
  const Outcome e = run("track " + q("empty.csv"));
  EXPECT_EQ(e.code, 0);
  EXPECT_TRUE(e.out.empty());
  spit(path("unsorted.csv"), "3,0,0,10,10,1\n1,0,0,10,10,1\n");
  EXPECT_EQ(run("track " + q("unsorted.csv")).code, 4);
  spit(path("zero.csv"), "0,0,0,0,10,1\n");
  EXPECT_EQ(run("track " + q("zero.csv")).code, 4);

  std::string one;
  for (int f = 0; f < 20; ++f) one += std::to_string(f) + ",100,100,40,80,1\n";
  spit(path("one.csv"), one);
  const Outcome t = run("track " + q("one.csv"));
  ASSERT_EQ(t.code, 0);
  std::istringstream in(t.out);
  const auto tracks = read_local_tracks(in, "out");
  EXPECT_EQ(tracks.size(), 18u);
  for (const auto& r : tracks) EXPECT_EQ(r.local_id, 1);
}

TEST_F(Cli, AlignAndEvaluateSimulatedScene) {
  simulate_into("s");
  ASSERT_EQ(run("track " + q("s/ceiling_detections.csv") + " --confirm-hits 1 -o " + q("tc.csv")).code, 0);
  ASSERT_EQ(run("track " + q("s/angled_detections.csv") + " --confirm-hits 1 -o " + q("ta.csv")).code, 0);
  const Outcome a = run("align --ceiling " + q("tc.csv") + " --angled " + q("ta.csv") + " --homography " +
                    q("s/h_ceiling_to_angled.txt") + " -o " + q("g.csv") + " --matches " + q("m.csv") +
                    " --audit " + q("audit.txt"));
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_FALSE(slurp(path("audit.txt")).empty());
  const Outcome v = run("evaluate --gt " + q("s/ground_truth.csv") + " --pred " + q("g.csv") + " --matches " +
                    q("m.csv"));
  ASSERT_EQ(v.code, 0) << v.err;
  EXPECT_NE(v.out.find("mota=1.000000\n"), std::string::npos) << v.out;
  EXPECT_NE(v.out.find("cha=1.000000\n"), std::string::npos) << v.out;
}

TEST_F(Cli, EvaluateErrors) {
  spit(path("empty.csv"), "");
  spit(path("pred.csv"), "ceiling,0,1,0,0,10,10\n");
  EXPECT_EQ(run("evaluate --gt " + q("empty.csv") + " --pred " + q("pred.csv")).code, 4);
  spit(path("gt.csv"), "ceiling,0,1,0,0,10,10\n");
  const Outcome ok = run("evaluate --gt " + q("gt.csv") + " --pred " + q("empty.csv"));
  EXPECT_EQ(ok.code, 0);
  EXPECT_NE(ok.out.find("mota=0.000000\n"), std::string::npos) << ok.out;
  EXPECT_EQ(run("evaluate --gt " + q("gt.csv") + " --pred " + q("pred.csv") + " --iou-threshold 2").code, 2);
}

TEST_F(Cli, AlignBadHomographyExitsFour) {
  spit(path("t.csv"), "0,1,0,0,10,10\n");
  spit(path("h.txt"), "1 2 3\n");
  EXPECT_EQ(run("align --ceiling " + q("t.csv") + " --angled " + q("t.csv") + " --homography " + q("h.txt")).code,
            4);
}

TEST_F(Cli, PipelineRunsAndIsDeterministic) {
  spit(path("p.json"), R"({"simulate": {"duration": 150, "n_agents": 6, "noise": {"dropout_prob": 0.1}},
      "homography": {"source": "simulated_correspondences"}})");
  const Outcome a = run("pipeline " + q("p.json") + " --output-dir " + q("o1"));
  ASSERT_EQ(a.code, 0) << a.err;
  const Outcome b = run("pipeline " + q("p.json") + " --output-dir " + q("o2"));
  ASSERT_EQ(b.code, 0);
  EXPECT_EQ(a.out, b.out);
  for (const char* f : {"global_tracks.csv", "matches.csv", "report.txt"}) {
    EXPECT_EQ(slurp(path("o1") / f), slurp(path("o2") / f)) << f;
  }
  EXPECT_NE(a.out.find("[metrics]"), std::string::npos);
}

TEST_F(Cli, PipelineMissingHomographyExitsTwo) {
  spit(path("p.json"), R"({"simulate": {"duration": 10}})");
  const Outcome r = run("pipeline " + q("p.json"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("homography"), std::string::npos);
}
