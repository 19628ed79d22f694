#include <cmath>
#include <cstdio>
#include <memory>

#include "cli_common.hpp"

namespace omgmap::cli {

namespace {

struct SimulateArgs {
  ConfigOptions config;
  std::string out;
};

void simulate(const SimulateArgs& args) {
  const RunConfig cfg = args.config.resolve();
  const fs::path out(args.out);
  ensure_dir(out / "frames");
  write_config_file(out / "config.txt", cfg);

  const Terrain terrain = generate_terrain(cfg.terrain);
  const auto& ts = terrain.spec();
  const int w = terrain.raster_width();
  const int h = terrain.raster_height();
  const RasterHeader truth_header{w, h, ts.raster_resolution, ts.origin_x, ts.origin_y, 0, "height"};
  write_demr1((out / "truth_dem.demr").string(), truth_header,
              terrain.height_raster(ts.origin_x, ts.origin_y, ts.raster_resolution, w, h));
  RasterHeader mask_header = truth_header;
  mask_header.channel = "rock";
  write_demr1((out / "rock_mask.demr").string(), mask_header,
              to_float(terrain.rock_mask(ts.origin_x, ts.origin_y, ts.raster_resolution, w, h)));

  auto traj = open_out(out / "trajectory.csv");
  traj << "frame,x,y,z,agl,points,mean_sigma_z\n";
  const bool binary = cfg.frame_format == "bin";
  std::size_t total = 0;
  for (int i = 0; i < cfg.trajectory.frame_count; ++i) {
    const Frame f = render_pointcloud(terrain, cfg.trajectory, i);
    auto os = open_out(out / "frames" / frame_name(f.id, binary ? ".bin" : ".csv"), binary);
    if (binary) write_frame_binary(os, f);
    else write_frame_csv(os, f);
    if (!os) throw std::runtime_error("write failed for frame " + std::to_string(f.id));
    double sigma = 0.0;
    for (const auto& m : f.points) sigma += std::sqrt(m.variance);
    const double mean_sigma = f.points.empty() ? 0.0 : sigma / static_cast<double>(f.points.size());
    traj << f.id << ',' << fmt(f.pose.x) << ',' << fmt(f.pose.y) << ',' << fmt(f.pose.z) << ','
         << fmt(f.pose.z - ts.base_height) << ',' << f.points.size() << ',' << fmt(mean_sigma, "%.8f") << '\n';
    total += f.points.size();
  }
  std::printf("simulated %d frames, %zu points, %zu rocks -> %s\n", cfg.trajectory.frame_count, total,
              terrain.rocks().size(), out.string().c_str());
}

}  // namespace

void add_simulate(CLI::App& app) {
  auto args = std::make_shared<SimulateArgs>();
  auto* sub = app.add_subcommand("simulate", "render a synthetic flight: frames, truth DEM and rock mask");
  sub->add_option("--out", args->out, "output directory")->required();
  args->config.attach(sub);
  sub->callback([args] { simulate(*args); });
}

}  // namespace omgmap::cli
