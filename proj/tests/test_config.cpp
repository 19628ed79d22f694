#include <gtest/gtest.h>

#include <sstream>
#include <string>

#include "omgmap/config.hpp"

using namespace omgmap;

namespace {

std::vector<ConfigEntry> parse(const std::string& text) {
  std::istringstream is(text);
  return parse_config_text(is, "test.cfg");
}

std::string echo(const RunConfig& cfg) {
  std::ostringstream os;
  write_config(os, cfg);
  return os.str();
}

std::string error_of(const std::string& text) {
  try {
    resolve_config(parse(text));
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, DefaultsMatchLibraryDefaults) {
  const RunConfig cfg = resolve_config({});
  EXPECT_EQ(cfg.pipeline.pyramid.num_layers, 3);
  EXPECT_EQ(cfg.pipeline.pyramid.base_resolution, 0.05);
  EXPECT_EQ(cfg.pipeline.pyramid.map_size, 24.0);
  EXPECT_EQ(cfg.pipeline.pyramid.first_measurement_inflation, 25.0);
  EXPECT_EQ(cfg.pipeline.seg.roughness_threshold, 0.1);
  EXPECT_EQ(cfg.pipeline.seg.landing_radius, 0.5);
  EXPECT_EQ(cfg.pipeline.detect.max_peaks, 5);
  EXPECT_EQ(cfg.pipeline.detect.shift_iterations, 5);
  EXPECT_EQ(cfg.pipeline.detect.weight_roughness, 100.0);
  EXPECT_EQ(cfg.pipeline.detect.weight_distance, 10.0);
  EXPECT_EQ(cfg.pipeline.detect.weight_uncertainty, 100.0);
  EXPECT_FALSE(cfg.pipeline.inflation.enabled);
  EXPECT_EQ(cfg.threads, 1);
}

TEST(Config, EchoRoundTrips) {
  const RunConfig a = resolve_config(parse("scene = rockfield\nlayers=4\nbase-res=0.025\nmap-size=12.8\n"
                                           "waypoints = 1:2:9; 3:4:5\nnoise=uniform\ninflation=on\ninflation-k=1.5\n"));
  const std::string text = echo(a);
  const RunConfig b = resolve_config(parse(text));
  EXPECT_EQ(text, echo(b));
  EXPECT_EQ(b.pipeline.pyramid.num_layers, 4);
  EXPECT_EQ(b.trajectory.waypoints.size(), 2u);
  EXPECT_EQ(b.trajectory.waypoints[1].agl, 5.0);
  EXPECT_EQ(b.trajectory.noise, NoiseModel::kUniform);
  EXPECT_TRUE(b.pipeline.inflation.enabled);
}

TEST(Config, CommentsAndBlankLines) {
  const RunConfig cfg = resolve_config(parse("# header\n\n  max-peaks = 7   # trailing\n"));
  EXPECT_EQ(cfg.pipeline.detect.max_peaks, 7);
}

TEST(Config, LastAssignmentWins) {
  auto entries = parse("max-peaks = 2\nmax-peaks = 3\n");
  entries.push_back({"max-peaks", "4", "--max-peaks"});
  EXPECT_EQ(resolve_config(entries).pipeline.detect.max_peaks, 4);
}

TEST(Config, LandingRadiusDrivesBothModules) {
  const RunConfig a = resolve_config(parse("landing-radius = 0.8\n"));
  EXPECT_EQ(a.pipeline.seg.landing_radius, 0.8);
  EXPECT_EQ(a.pipeline.detect.landing_radius, 0.8);
  EXPECT_EQ(a.pipeline.detect.min_distance, 0.8);
  // An explicit floor survives regardless of order.
  for (const char* text : {"min-distance = 0.2\nlanding-radius = 0.8\n", "landing-radius = 0.8\nmin-distance = 0.2\n"}) {
    const RunConfig b = resolve_config(parse(text));
    EXPECT_EQ(b.pipeline.detect.min_distance, 0.2);
    EXPECT_EQ(b.pipeline.detect.landing_radius, 0.8);
  }
}

TEST(Config, ScenePresetThenRefinements) {
  const RunConfig cfg = resolve_config(parse("rocks = 5\nscene = rockfield\n"));
  EXPECT_EQ(cfg.scene, Scene::kRockField);
  EXPECT_EQ(cfg.terrain.extent_x, 12.0);
  EXPECT_EQ(cfg.pipeline.pyramid.map_size, 12.0);
  EXPECT_EQ(cfg.terrain.rock_count, 5);
}

TEST(Config, LineDiagnostics) {
  EXPECT_EQ(error_of("layers = 3\nbase-res = abc\n"), "test.cfg:2: base-res: expected a number, got 'abc'");
  EXPECT_EQ(error_of("\n\nwhat = 1\n"), "test.cfg:3: unknown key 'what'");
  EXPECT_EQ(error_of("layers\n"), "test.cfg:1: expected key=value");
  EXPECT_EQ(error_of("= 3\n"), "test.cfg:1: empty key");
  EXPECT_EQ(error_of("strict = maybe\n"), "test.cfg:1: strict: expected true or false, got 'maybe'");
  EXPECT_EQ(error_of("scene = moon\n"), "test.cfg:1: scene: scene must be flight or rockfield, got 'moon'");
  EXPECT_EQ(error_of("waypoints = 1:2\n"), "test.cfg:1: waypoints: waypoint must be x:y:agl, got '1:2'");
  EXPECT_EQ(error_of("layers = 2.5\n"), "test.cfg:1: layers: expected an integer, got '2.5'");
}

TEST(Config, InvariantsRejected) {
  EXPECT_NE(error_of("map-size = 1.03\n"), "");
  EXPECT_NE(error_of("threads = 3\n"), "");
  EXPECT_NE(error_of("inflation = true\ninflation-k = 0.5\n"), "");
  EXPECT_NE(error_of("rock-radius-min = 0.4\nrock-radius-max = 0.2\n"), "");
  EXPECT_NE(error_of("format = png\n"), "");
  EXPECT_NE(error_of("peak-factor = 0\n"), "");
  EXPECT_NE(error_of("base-res = inf\n"), "");
  EXPECT_NE(error_of("seed = -1\n"), "");
  EXPECT_NE(error_of("waypoints = 0:0:-1\n"), "");
}

TEST(Config, EveryKeyHasHelpAndEcho) {
  const RunConfig cfg = resolve_config({});
  for (const auto& k : config_keys()) {
    EXPECT_FALSE(k.help.empty()) << k.name;
    EXPECT_FALSE(k.get(cfg).empty()) << k.name;
    EXPECT_EQ(find_config_key(k.name), &k);
  }
}
