#include <chrono>
#include <cstdio>
#include <memory>
#include <optional>

#include "cli_common.hpp"
#include "omgmap/pipeline.hpp"

namespace omgmap::cli {

namespace {

struct RunArgs {
  ConfigOptions config;
  std::string frames;
  std::string out;
};

void export_final(const fs::path& dir, const FrameResult& r) {
  ensure_dir(dir);
  const PyramidMap& map = r.pooled;
  for (int l = 0; l < map.num_layers(); ++l) {
    for (Channel ch : {Channel::kMean, Channel::kVariance, Channel::kPrecisionSum, Channel::kCount}) {
      const std::string name = "L" + std::to_string(l) + "_" + channel_name(ch) + ".demr";
      write_demr1((dir / name).string(), map_header(map, l, channel_name(ch)), layer_raster(map, l, ch));
    }
    write_demr1((dir / ("L" + std::to_string(l) + "_roughness.demr")).string(), map_header(map, l, "roughness"),
                r.maps.roughness[static_cast<std::size_t>(l)]);
  }
  const int top = map.num_layers() - 1;
  write_demr1((dir / "slope.demr").string(), map_header(map, top, "slope_deg"), r.maps.slope);
  write_demr1((dir / "landing_mask.demr").string(), map_header(map, 0, "safe"), to_float(r.maps.landing_mask));
  write_demr1((dir / "distance.demr").string(), map_header(map, 0, "distance"), r.detection.distance);
}

void run(const RunArgs& args) {
  const fs::path in(args.frames);
  std::vector<ConfigEntry> base;
  if (fs::is_regular_file(in / "config.txt")) base = read_config_file((in / "config.txt").string());
  const RunConfig cfg = args.config.resolve(base);
  const auto files = list_frames(in);
  if (files.empty()) throw FormatError("no frame files in " + in.string());

  const fs::path out(args.out);
  ensure_dir(out / "dem");
  write_config_file(out / "config.txt", cfg);
  auto det = open_out(out / "detections.csv");
  det << detection_report_header() << '\n';
  auto frames_csv = open_out(out / "frames.csv");
  frames_csv << "frame,x,y,z,points,accepted,mean_sigma_z,safe_cells,candidates,status,site_x,site_y\n";

  std::size_t next = 0, skipped = 0, bad_records = 0;
  auto source = [&]() -> std::optional<Frame> {
    while (next < files.size()) {
      const fs::path& p = files[next++];
      try {
        std::size_t bad = 0;
        Frame f = read_frame_file(p, cfg.strict, &bad);
        if (bad) std::fprintf(stderr, "warning: %s: skipped %zu malformed records\n", p.string().c_str(), bad);
        bad_records += bad;
        return f;
      } catch (const FormatError& e) {
        if (cfg.strict) throw FormatError(p.string() + ": " + e.what());
        std::fprintf(stderr, "warning: skipping %s: %s\n", p.string().c_str(), e.what());
        ++skipped;
      }
    }
    return std::nullopt;
  };

  std::size_t processed = 0, selected = 0, points = 0;
  std::optional<FrameResult> last;
  auto sink = [&](const FrameResult& r) {
    ++processed;
    points += r.points;
    const auto& sel = r.detection.selection;
    write_demr1((out / "dem" / frame_name(r.frame_id, ".demr")).string(), map_header(r.pooled, 0, "mean"),
                layer_raster(r.pooled, 0, Channel::kMean));
    write_detection_report(det, r.frame_id, sel, r.maps, cfg.pipeline.detect.min_distance);
    write_dt_max_line(det, r.frame_id, r.detection, r.maps);
    std::string status = "REJECT", sx, sy;
    if (sel.selected) {
      ++selected;
      const auto& c = sel.candidates[*sel.selected];
      status = "selected";
      sx = fmt(r.maps.origin_x + (c.shifted.x + 0.5) * r.maps.resolution);
      sy = fmt(r.maps.origin_y + (c.shifted.y + 0.5) * r.maps.resolution);
    }
    frames_csv << r.frame_id << ',' << fmt(r.pose.x) << ',' << fmt(r.pose.y) << ',' << fmt(r.pose.z) << ','
               << r.points << ',' << r.accepted << ',' << fmt(r.mean_point_sigma, "%.8f") << ','
               << r.maps.safe_cells() << ',' << sel.candidates.size() << ',' << status << ',' << sx << ',' << sy
               << '\n';
    last = r;
  };

  const auto t0 = std::chrono::steady_clock::now();
  run_pipeline(cfg.pipeline, source, sink, cfg.threads);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (last) export_final(out / "final", *last);

  auto summary = open_out(out / "summary.txt");
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "frames_processed %zu\nframes_skipped %zu\nmalformed_records %zu\nselected %zu\nreject %zu\n"
                "mean_points_per_frame %.1f\nfinal_safe_cells %zu\n",
                processed, skipped, bad_records, selected, processed - selected,
                processed ? static_cast<double>(points) / static_cast<double>(processed) : 0.0,
                last ? last->maps.safe_cells() : std::size_t{0});
  summary << buf;
  std::printf("%selapsed_s %.2f\nthreads %d\n", buf, seconds, cfg.threads);
}

}  // namespace

void add_run(CLI::App& app) {
  auto args = std::make_shared<RunArgs>();
  auto* sub = app.add_subcommand("run", "map, segment and detect over a frame sequence");
  sub->add_option("--frames", args->frames, "dataset directory (frames/ inside, or frame files directly)")->required();
  sub->add_option("--out", args->out, "output directory")->required();
  args->config.attach(sub);
  sub->callback([args] { run(*args); });
}

}  // namespace omgmap::cli
