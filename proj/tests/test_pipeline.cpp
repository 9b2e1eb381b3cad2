#include "pentrack/errors.hpp"
#include "pentrack/io.hpp"
#include "pentrack/pipeline.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace pentrack;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("pentrack_pipe_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string field_of(const std::string& json, const fs::path& base = fs::temp_directory_path()) {
  try {
    parse_pipeline_config(json, base);
  } catch (const ConfigInvalid& e) {
    return e.field();
  }
  return "";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST(PipelineConfig, MissingHomographyIsNamed) {
  EXPECT_EQ(field_of(R"({"simulate": {}})"), "homography");
}

TEST(PipelineConfig, ExactlyOneInputSource) {
  EXPECT_EQ(field_of(R"({"homography": {"source": "simulated_truth"}})"), "simulate");
  const std::string both =
      R"({"simulate": {}, "inputs": {}, "homography": {"source": "simulated_truth"}})";
  EXPECT_FALSE(field_of(both).empty());
}

TEST(PipelineConfig, MissingFileIsNamed) {
  EXPECT_EQ(field_of(R"({"inputs": {"ceiling": "nope_c.csv", "angled": "nope_a.csv"},
      "homography": {"source": "file", "path": "h.txt"}})", fresh_dir("missing")),
            "inputs.ceiling");
}

TEST(PipelineConfig, UnknownSourceAndFields) {
  EXPECT_EQ(field_of(R"({"simulate": {}, "homography": {"source": "guess"}})"), "homography.source");
  EXPECT_EQ(field_of(R"({"simulate": {}, "homography": {"source": "simulated_truth"}, "extra": 1})"),
            "extra");
  EXPECT_EQ(field_of(R"({"simulate": {"n_agents": -3}, "homography": {"source": "simulated_truth"}})"),
            "simulate.n_agents");
}

TEST(PipelineConfig, SeedOverridesScene) {
  const PipelineConfig c = parse_pipeline_config(
      R"({"seed": 17, "simulate": {"seed": 3}, "homography": {"source": "simulated_correspondences"},
          "alignment": {"offset": 4}, "tracker": {"confirm_hits": 2}})",
      fs::temp_directory_path());
  ASSERT_TRUE(c.scene);
  EXPECT_EQ(c.scene->seed, 17u);
  EXPECT_EQ(c.homography.ransac.seed, 17u);
  EXPECT_EQ(c.alignment.frame_offset, 4);
  EXPECT_EQ(c.tracker.confirm_hits, 2);
}

TEST(ExitCodes, MapErrorKinds) {
  EXPECT_EQ(exit_code_for(ConfigInvalid("x", "y")), ExitCode::ConfigError);
  EXPECT_EQ(exit_code_for(NoConsensus("x")), ExitCode::EstimationFailure);
  EXPECT_EQ(exit_code_for(ParseError("f", 1, "bad")), ExitCode::MalformedInput);
  EXPECT_EQ(exit_code_for(OutOfOrderFrame(2, 1)), ExitCode::MalformedInput);
  EXPECT_EQ(exit_code_for(std::runtime_error("x")), ExitCode::Failure);
}

TEST(TrackDetections, CoversEveryFrameOnce) {
  PenConfig cfg = PenConfig::defaults();
  cfg.duration = 100;
  const SceneBundle s = simulate(cfg);
  const auto tracks = track_detections(s.ceiling_detections, {});
  std::set<std::pair<long, long>> seen;
  for (const auto& t : tracks) {
    EXPECT_TRUE(seen.emplace(t.frame, t.local_id).second);
    EXPECT_GE(t.frame, 2);  // three hits to confirm
  }
  EXPECT_FALSE(tracks.empty());
  EXPECT_TRUE(track_detections({}, {}).empty());
}

TEST(RunPipeline, SimulatedRunWritesConsistentArtifacts) {
  const fs::path out = fresh_dir("run");
  PipelineConfig c = parse_pipeline_config(
      R"({"simulate": {"duration": 200, "n_agents": 8, "noise": {"dropout_prob": 0.1}},
          "homography": {"source": "simulated_correspondences"},
          "global": {"audit": true}})",
      out);
  c.output_dir = out / "result";
  const RunReport r = run_pipeline(c);
  EXPECT_EQ(r.frames_ceiling, 200);
  ASSERT_TRUE(r.metrics);
  EXPECT_GT(r.metrics->clear.mota(), 0.5);
  ASSERT_TRUE(r.metrics->handover);

  const auto ct = read_file(c.output_dir / "tracks_ceiling.csv", read_local_tracks);
  const auto g = read_file(c.output_dir / "global_tracks.csv", read_global_tracks);
  const auto m = read_file(c.output_dir / "matches.csv", read_matches);
  const auto dets = read_file(c.output_dir / "scene" / "ceiling_detections.csv", read_detections);
  EXPECT_EQ(static_cast<long>(dets.size()), r.detections_ceiling);
  EXPECT_EQ(static_cast<long>(m.size()), r.matches);
  std::set<long> ids, gids;
  for (const auto& t : ct) ids.insert(t.local_id);
  for (const auto& t : g) gids.insert(t.global_id);
  EXPECT_EQ(static_cast<long>(ids.size()), r.local_tracks_ceiling);
  EXPECT_LE(static_cast<long>(gids.size()), r.global_ids);
  EXPECT_TRUE(fs::exists(c.output_dir / "audit.txt"));
  EXPECT_EQ(slurp(c.output_dir / "report.txt"), format_run_report(r));
  EXPECT_NE(slurp(c.output_dir / "timings.txt").find("_seconds="), std::string::npos);

  // Same config, same outputs.
  PipelineConfig again = c;
  again.output_dir = out / "again";
  run_pipeline(again);
  for (const char* f : {"tracks_ceiling.csv", "tracks_angled.csv", "global_tracks.csv", "matches.csv",
                        "report.txt", "homography.txt"}) {
    EXPECT_EQ(slurp(c.output_dir / f), slurp(again.output_dir / f)) << f;
  }
}

TEST(RunPipeline, FileInputsWithoutGroundTruthSkipMetrics) {
  const fs::path dir = fresh_dir("files");
  PenConfig scene = PenConfig::defaults();
  scene.duration = 60;
  write_bundle(simulate(scene), dir);
  PipelineConfig c = parse_pipeline_config(
      R"({"inputs": {"ceiling": "ceiling_detections.csv", "angled": "angled_detections.csv"},
          "homography": {"source": "file", "path": "h_ceiling_to_angled.txt"}})",
      dir);
  c.output_dir = dir / "out";
  const RunReport r = run_pipeline(c);
  EXPECT_FALSE(r.metrics);
  EXPECT_GT(r.matches, 0);
}
