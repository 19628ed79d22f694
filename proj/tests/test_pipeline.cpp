#include <gtest/gtest.h>

#include <cstring>
#include <stdexcept>

#include "omgmap/pipeline.hpp"

using namespace omgmap;

namespace {

struct Scene {
  Terrain terrain;
  TrajectorySpec traj;
  PipelineConfig cfg;
};

Scene small_scene() {
  TrajectorySpec traj = rock_field_trajectory();
  traj.frame_count = 6;
  traj.image_cols = traj.image_rows = 200;
  PipelineConfig cfg;
  cfg.pyramid.map_size = 12.0;
  return {Terrain(rock_field_terrain(4)), traj, cfg};
}

std::vector<FrameResult> run(const Scene& s, int threads) {
  std::vector<FrameResult> out;
  int next = 0;
  run_pipeline(
      s.cfg,
      [&]() -> std::optional<Frame> {
        if (next >= s.traj.frame_count) return std::nullopt;
        return render_pointcloud(s.terrain, s.traj, next++);
      },
      [&](const FrameResult& r) { out.push_back(r); }, threads);
  return out;
}

bool same_bits(const Raster<float>& a, const Raster<float>& b) {
  return a.size() == b.size() && std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

TEST(Pipeline, TwoThreadsMatchOne) {
  const Scene s = small_scene();
  const auto a = run(s, 1);
  const auto b = run(s, 2);
  ASSERT_EQ(a.size(), 6u);
  ASSERT_EQ(b.size(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].frame_id, b[i].frame_id);
    EXPECT_EQ(a[i].accepted, b[i].accepted);
    EXPECT_TRUE(same_bits(a[i].maps.roughness.front(), b[i].maps.roughness.front()));
    EXPECT_TRUE(same_bits(a[i].detection.distance, b[i].detection.distance));
    EXPECT_EQ(a[i].detection.selection.selected, b[i].detection.selection.selected);
    EXPECT_EQ(a[i].detection.dt_max_cell, b[i].detection.dt_max_cell);
  }
}

TEST(Pipeline, ResultsArriveInFrameOrder) {
  const auto r = run(small_scene(), 2);
  for (std::size_t i = 0; i < r.size(); ++i) EXPECT_EQ(r[i].frame_id, static_cast<long>(i));
}

TEST(Pipeline, SinkErrorPropagates) {
  const Scene s = small_scene();
  for (int threads : {1, 2}) {
    int next = 0;
    EXPECT_THROW(run_pipeline(
                     s.cfg,
                     [&]() -> std::optional<Frame> {
                       if (next >= s.traj.frame_count) return std::nullopt;
                       return render_pointcloud(s.terrain, s.traj, next++);
                     },
                     [](const FrameResult& r) {
                       if (r.frame_id == 1) throw std::runtime_error("sink");
                     },
                     threads),
                 std::runtime_error)
        << threads;
  }
}

TEST(Pipeline, SourceErrorPropagates) {
  const Scene s = small_scene();
  for (int threads : {1, 2}) {
    int next = 0, seen = 0;
    EXPECT_THROW(run_pipeline(
                     s.cfg,
                     [&]() -> std::optional<Frame> {
                       if (next == 2) throw FormatError("bad frame");
                       return render_pointcloud(s.terrain, s.traj, next++);
                     },
                     [&](const FrameResult&) { ++seen; }, threads),
                 FormatError);
    EXPECT_EQ(seen, 2) << threads;
  }
}

TEST(Mapper, CentersOnFirstPoseAndFollows) {
  PipelineConfig cfg;
  cfg.pyramid.map_size = 4.0;
  Mapper m(cfg);
  Frame f;
  f.pose = {10.3, -2.1, 10, 0};
  f.camera = {320, 8, 0.5};
  f.points = {{10.3, -2.1, 0.7, 10.0, 1e-3}};
  m.integrate(f);
  const PyramidMap& map = *m.map();
  // Centered to within one top cell.
  const double cx = map.origin_x() + 0.5 * cfg.pyramid.map_size;
  EXPECT_NEAR(cx, 10.3, map.resolution(cfg.pyramid.num_layers - 1));

  // The point survives a small move and is dropped once it leaves the map.
  f.pose.x += 1.0;
  f.points.clear();
  m.integrate(f);
  EXPECT_EQ(m.map()->counters().measurements, 1u);
  const auto idx = m.map()->locate(0, 10.3, -2.1);
  ASSERT_TRUE(idx);
  EXPECT_EQ(m.map()->cell(*idx).count, 1u);
  f.pose.x += 10.0;
  m.integrate(f);
  EXPECT_FALSE(m.map()->locate(0, 10.3, -2.1));
}

TEST(Mapper, InflationRaisesVarianceEachFrame) {
  PipelineConfig cfg;
  cfg.pyramid.map_size = 4.0;
  cfg.inflation = {true, 2.0};
  Mapper m(cfg);
  Frame f;
  f.camera = {320, 8, 0.5};
  f.points = {{0.01, 0.01, 0.5, 3.0, 0.01}};
  const auto snap = m.integrate(f);
  const auto idx = snap.map.locate(0, 0.01, 0.01);
  ASSERT_TRUE(idx);
  const CellState c = snap.map.cell(*idx);
  // First hit: 0.01 x 25 = 0.25, then inflation adds (N+1)(k-1) = 2.
  EXPECT_EQ(c.count, 1u);
  EXPECT_NEAR(c.variance, 2.25, 1e-12);
  EXPECT_NEAR(c.precision_sum, 1.0 / 0.25 / 2.0, 1e-12);
  f.points.clear();
  const auto snap2 = m.integrate(f);
  EXPECT_NEAR(snap2.map.cell(*snap2.map.locate(0, 0.01, 0.01)).variance, 4.25, 1e-12);
}

TEST(Mapper, RejectsBadInflation) {
  PipelineConfig cfg;
  cfg.inflation = {true, 0.9};
  EXPECT_THROW(Mapper{cfg}, ConfigError);
}
