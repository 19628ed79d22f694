#include <cmath>
#include <cstdio>
#include <memory>
#include <sstream>

#include "cli_common.hpp"
#include "omgmap/eval.hpp"

namespace omgmap::cli {

namespace {

struct EvalArgs {
  ConfigOptions config;
  std::string mode = "run";
  std::string run_dir;
  std::string truth_dir;
  std::string out;
  std::vector<double> resolutions{0.05, 0.1, 0.2};
  int starts = 1000;
  std::uint64_t start_seed = 99;
};

using Row = std::map<std::string, std::string>;

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) out.push_back(f);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<Row> read_csv(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw FormatError("cannot open " + p.string());
  std::string line;
  if (!std::getline(is, line)) throw FormatError(p.string() + ": empty file");
  const auto header = split(line);
  std::vector<Row> rows;
  int no = 1;
  while (std::getline(is, line)) {
    ++no;
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != header.size()) throw FormatError(p.string() + ":" + std::to_string(no) + ": wrong field count");
    Row r;
    for (std::size_t i = 0; i < f.size(); ++i) r[header[i]] = f[i];
    rows.push_back(std::move(r));
  }
  return rows;
}

double number(const Row& r, const std::string& key) {
  const auto it = r.find(key);
  if (it == r.end()) throw FormatError("missing column " + key);
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw FormatError("bad number in column " + key + ": '" + it->second + "'");
  }
}

struct MaskLookup {
  Raster<float> mask;
  RasterHeader header;

  [[nodiscard]] bool on_rock(double x, double y) const {
    const float v = sample_raster(mask, header, x, y);
    return !std::isnan(v) && v >= 0.5f;
  }

  [[nodiscard]] bool near_rock(double x, double y, double margin) const {
    const int reach = static_cast<int>(std::ceil(margin / header.resolution)) + 1;
    const int c0 = static_cast<int>(std::floor((x - header.origin_x) / header.resolution));
    const int r0 = static_cast<int>(std::floor((y - header.origin_y) / header.resolution));
    for (int r = r0 - reach; r <= r0 + reach; ++r)
      for (int c = c0 - reach; c <= c0 + reach; ++c) {
        if (!mask.contains(r, c) || mask(r, c) < 0.5f) continue;
        const double cx = header.origin_x + (c + 0.5) * header.resolution;
        const double cy = header.origin_y + (r + 0.5) * header.resolution;
        if (std::hypot(cx - x, cy - y) <= margin) return true;
      }
    return false;
  }
};

void eval_run(const EvalArgs& args) {
  if (args.run_dir.empty() || args.truth_dir.empty()) throw ConfigError("--mode run needs --run and --truth");
  const fs::path run(args.run_dir), truth_dir(args.truth_dir);
  const fs::path out = args.out.empty() ? run : fs::path(args.out);
  ensure_dir(out);
  const RunConfig cfg = resolve_config(read_config_file((run / "config.txt").string()));
  RasterHeader th;
  const Raster<float> truth = read_demr1((truth_dir / "truth_dem.demr").string(), &th);
  MaskLookup rocks;
  rocks.mask = read_demr1((truth_dir / "rock_mask.demr").string(), &rocks.header);

  const auto frames = read_csv(run / "frames.csv");
  if (frames.empty()) throw FormatError("frames.csv has no rows");
  auto rmse_csv = open_out(out / "rmse.csv");
  rmse_csv << "frame,agl,rmse,overlap,empty_estimate,mean_sigma_z,rmse_over_sigma\n";
  RmseResult final_rmse;
  double final_sigma = 0.0;
  for (const auto& row : frames) {
    const long id = static_cast<long>(number(row, "frame"));
    RasterHeader eh;
    const Raster<float> est = read_demr1((run / "dem" / frame_name(id, ".demr")).string(), &eh);
    Raster<float> ref(est.width(), est.height(), kNaN);
    for (int r = 0; r < est.height(); ++r)
      for (int c = 0; c < est.width(); ++c)
        ref(r, c) = sample_raster(truth, th, eh.origin_x + (c + 0.5) * eh.resolution, eh.origin_y + (r + 0.5) * eh.resolution);
    const RmseResult e = eval_rmse(est, ref);
    const double sigma = number(row, "mean_sigma_z");
    rmse_csv << id << ',' << fmt(number(row, "z") - cfg.terrain.base_height) << ',' << fmt(e.rmse, "%.8f") << ','
             << e.overlap << ',' << e.empty_estimate << ',' << fmt(sigma, "%.8f") << ','
             << fmt(sigma > 0 ? e.rmse / sigma : NAN, "%.4f") << '\n';
    final_rmse = e;
    final_sigma = sigma;
  }

  const double margin = cfg.pipeline.seg.landing_radius;
  struct Tally {
    int selected = 0, failures = 0, near = 0;
  } dt, sp;
  for (const auto& row : read_csv(run / "detections.csv")) {
    const std::string kind = row.at("index");
    const std::string status = row.at("status");
    Tally* t = nullptr;
    if (kind == "dt_max" && status == "dt_max") t = &dt;
    else if (status == "selected") t = &sp;
    if (!t) continue;
    const double x = number(row, "shifted_x_m"), y = number(row, "shifted_y_m");
    ++t->selected;
    t->failures += rocks.on_rock(x, y);
    t->near += rocks.near_rock(x, y, margin);
  }
  auto fail_csv = open_out(out / "failures.csv");
  fail_csv << "method,frames,selected,failures,near_margin_m,near\n";
  fail_csv << "dt_max," << frames.size() << ',' << dt.selected << ',' << dt.failures << ',' << fmt(margin, "%.3f") << ','
           << dt.near << '\n';
  fail_csv << "shifted_peaks," << frames.size() << ',' << sp.selected << ',' << sp.failures << ','
           << fmt(margin, "%.3f") << ',' << sp.near << '\n';

  const double bound = 3.0 * final_sigma;
  const bool defined = final_rmse.overlap > 0 && std::isfinite(final_rmse.rmse);
  const bool ok = defined && final_rmse.rmse <= bound;
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "final_rmse %.6f\nfinal_overlap %zu\nfinal_mean_sigma_z %.6f\nrmse_bound %.6f\n"
                "dt_max selected %d failures %d near %d\nshifted_peaks selected %d failures %d near %d\n"
                "check final_rmse_within_bound %s\n",
                final_rmse.rmse, final_rmse.overlap, final_sigma, bound, dt.selected, dt.failures, dt.near,
                sp.selected, sp.failures, sp.near, ok ? "PASS" : "FAIL");
  open_out(out / "eval_report.txt") << buf;
  std::printf("%s", buf);
  if (!defined) throw AssertionFailure("final frame has no overlap with the truth DEM");
  if (!ok) throw AssertionFailure("final RMSE exceeds 3x the mean per-point sigma");
}

void eval_table1(const EvalArgs& args) {
  const RunConfig cfg = args.config.resolve({{"scene", "rockfield", "default"}});
  const fs::path out = args.out.empty() ? fs::path(".") : fs::path(args.out);
  ensure_dir(out);
  write_config_file(out / "config.txt", cfg);
  if (args.resolutions.empty()) throw ConfigError("--resolutions is empty");
  const Terrain terrain = generate_terrain(cfg.terrain);
  const auto counts = eval_landing_failures(terrain, cfg.trajectory, cfg.pipeline, args.resolutions);
  auto csv = open_out(out / "table1.csv");
  csv << "resolution,frames,dt_selected,dt_failures,dt_near,shifted_selected,shifted_failures,shifted_near\n";
  std::printf("%-10s %8s | %-22s | %-22s\n", "res (m)", "frames", "dt-max sel/fail/near", "shifted sel/fail/near");
  for (const auto& c : counts) {
    csv << fmt(c.resolution, "%.4f") << ',' << c.frames << ',' << c.dt_selected << ',' << c.dt_failures << ','
        << c.dt_near << ',' << c.shifted_selected << ',' << c.shifted_failures << ',' << c.shifted_near << '\n';
    std::printf("%-10.3f %8d | %6d %6d %8d | %6d %6d %8d\n", c.resolution, c.frames, c.dt_selected, c.dt_failures,
                c.dt_near, c.shifted_selected, c.shifted_failures, c.shifted_near);
  }
  std::string failed;
  const auto& fine = counts.front();
  const auto& coarse = counts.back();
  if (fine.dt_failures || fine.shifted_failures) failed += " finest-resolution failures";
  if (coarse.shifted_failures > coarse.dt_failures) failed += " shifted worse than dt-max at coarsest";
  if (coarse.dt_failures >= 5 && coarse.shifted_failures >= coarse.dt_failures)
    failed += " no strict improvement at coarsest";
  if (!failed.empty()) throw AssertionFailure("table:" + failed);
}

void eval_shift(const EvalArgs& args) {
  const RunConfig cfg = args.config.resolve({{"scene", "rockfield", "default"}});
  const fs::path out = args.out.empty() ? fs::path(".") : fs::path(args.out);
  ensure_dir(out);
  write_config_file(out / "config.txt", cfg);
  const Terrain terrain = generate_terrain(cfg.terrain);
  int i = 0;
  std::optional<FrameResult> last;
  run_pipeline(
      cfg.pipeline,
      [&]() -> std::optional<Frame> {
        if (i >= cfg.trajectory.frame_count) return std::nullopt;
        return render_pointcloud(terrain, cfg.trajectory, i++);
      },
      [&](const FrameResult& r) { last = r; });
  const ShiftStudy s = study_mean_shift(terrain, *last, cfg.pipeline.detect, args.starts, args.start_seed);
  auto csv = open_out(out / "shift.csv");
  csv << "starts,on_rock_before,on_rock_after,started_on_rock,freed,freed_fraction\n"
      << s.starts << ',' << s.on_rock_before << ',' << s.on_rock_after << ',' << s.started_on_rock << ',' << s.freed
      << ',' << fmt(s.freed_fraction(), "%.4f") << '\n';
  std::printf("starts %d: on rock before %d, after %d; %d of %d starting on rocks ended off (%.1f%%)\n", s.starts,
              s.on_rock_before, s.on_rock_after, s.freed, s.started_on_rock, 100.0 * s.freed_fraction());
  if (s.starts < args.starts) throw AssertionFailure("not enough observed start positions");
  if (!(s.on_rock_after < s.on_rock_before)) throw AssertionFailure("on-rock fraction did not decrease");
  if (s.freed_fraction() < 0.8) throw AssertionFailure("fewer than 80% of on-rock starts left the rocks");
}

void evaluate(const EvalArgs& args) {
  if (args.mode == "run") eval_run(args);
  else if (args.mode == "table1") eval_table1(args);
  else if (args.mode == "shift") eval_shift(args);
  else throw ConfigError("--mode must be run, table1 or shift");
}

}  // namespace

void add_eval(CLI::App& app) {
  auto args = std::make_shared<EvalArgs>();
  auto* sub = app.add_subcommand("eval", "score runs against ground truth; landing-failure and mean-shift studies");
  sub->add_option("--mode", args->mode, "run | table1 | shift")->capture_default_str();
  sub->add_option("--run", args->run_dir, "run output directory (mode run)");
  sub->add_option("--truth", args->truth_dir, "simulate output directory (mode run)");
  sub->add_option("--out", args->out, "report directory (default: the run directory, or .)");
  sub->add_option("--resolutions", args->resolutions, "base resolutions (mode table1)")->delimiter(',')->capture_default_str();
  sub->add_option("--starts", args->starts, "random starts (mode shift)")->capture_default_str();
  sub->add_option("--start-seed", args->start_seed, "start seed (mode shift)")->capture_default_str();
  args->config.attach(sub);
  sub->callback([args] { evaluate(*args); });
}

}  // namespace omgmap::cli
