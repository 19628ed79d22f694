#pragma once

// Frame pipeline: shift -> update -> (inflate) -> pool -> segment -> detect.
//
// The mapping stage owns the live pyramid. The analysis stage only ever sees
// immutable snapshots, so it can run on a second thread without changing
// any output.

#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>
#include <utility>

#include "omgmap/detection.hpp"
#include "omgmap/pyramid.hpp"
#include "omgmap/segmentation.hpp"
#include "omgmap/synth.hpp"

namespace omgmap {

struct InflationSettings {
  bool enabled = false;
  double k = 1.0;
};

struct PipelineConfig {
  PyramidConfig pyramid;
  SegConfig seg;
  DetectConfig detect;
  InflationSettings inflation;

  void validate() const {
    pyramid.validate();
    seg.validate();
    detect.validate();
    if (inflation.enabled && !(inflation.k >= 1.0)) throw ConfigError("inflation_k must be >= 1");
  }
};

/// Mapping-stage result for one frame: the un-pooled map copy plus metadata.
struct MapSnapshot {
  long frame_id = 0;
  CameraPose pose;
  PyramidMap map;
  std::size_t points = 0;
  std::size_t accepted = 0;
  double mean_point_sigma = 0.0;  // mean per-point height standard deviation, m
};

struct FrameResult {
  long frame_id = 0;
  CameraPose pose;
  std::size_t points = 0;
  std::size_t accepted = 0;
  double mean_point_sigma = 0.0;
  PyramidMap pooled;
  PoolStats pool;
  SafetyMaps maps;
  Detection detection;
};

/// Owns the rolling pyramid and integrates frames into it.
class Mapper {
 public:
  explicit Mapper(const PipelineConfig& cfg) : cfg_(cfg) { cfg_.validate(); }

  [[nodiscard]] const PipelineConfig& config() const noexcept { return cfg_; }
  [[nodiscard]] const std::optional<PyramidMap>& map() const noexcept { return map_; }

  MapSnapshot integrate(const Frame& frame) {
    if (!map_) {
      map_.emplace(cfg_.pyramid, frame.pose.x, frame.pose.y);
    } else {
      shift_map(*map_, frame.pose.x, frame.pose.y);
    }
    std::size_t accepted = 0;
    double sigma = 0.0;
    for (const auto& m : frame.points) {
      if (!update_single_layer(*map_, m, frame.camera)) continue;
      ++accepted;
      sigma += std::sqrt(m.variance);
    }
    if (cfg_.inflation.enabled) apply_inflation_all(*map_, cfg_.inflation.k);
    return {frame.id, frame.pose, *map_, frame.points.size(), accepted, accepted ? sigma / accepted : 0.0};
  }

 private:
  PipelineConfig cfg_;
  std::optional<PyramidMap> map_;
};

/// Pure analysis of one snapshot.
inline FrameResult analyse(const MapSnapshot& snap, const PipelineConfig& cfg) {
  FrameResult out{snap.frame_id, snap.pose, snap.points, snap.accepted, snap.mean_point_sigma,
                  PyramidMap(cfg.pyramid), {}, {}, {}};
  out.pooled = pool_pyramid(snap.map, &out.pool);
  out.maps = segment(out.pooled, cfg.seg);
  out.detection = detect(out.maps, out.pooled, cfg.detect);
  return out;
}

/// Runs the pipeline over a frame source. `next` returns frames in order and
/// nullopt at the end; `sink` receives results in frame order. With
/// threads == 2 analysis runs on a worker thread fed through a bounded queue.
inline void run_pipeline(const PipelineConfig& cfg, const std::function<std::optional<Frame>()>& next,
                         const std::function<void(const FrameResult&)>& sink, int threads = 1,
                         std::size_t queue_capacity = 2) {
  Mapper mapper(cfg);
  if (threads <= 1) {
    while (auto frame = next()) sink(analyse(mapper.integrate(*frame), cfg));
    return;
  }

  std::mutex mu;
  std::condition_variable cv;
  std::deque<MapSnapshot> queue;
  bool done = false;
  std::exception_ptr worker_error;

  std::thread worker([&] {
    try {
      for (;;) {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return !queue.empty() || done; });
        if (queue.empty()) return;
        MapSnapshot snap = std::move(queue.front());
        queue.pop_front();
        lock.unlock();
        cv.notify_all();
        sink(analyse(snap, cfg));
      }
    } catch (...) {
      std::lock_guard lock(mu);
      worker_error = std::current_exception();
      done = true;
      queue.clear();
      cv.notify_all();
    }
  });

  std::exception_ptr producer_error;
  try {
    while (auto frame = next()) {
      MapSnapshot snap = mapper.integrate(*frame);
      std::unique_lock lock(mu);
      cv.wait(lock, [&] { return queue.size() < queue_capacity || worker_error; });
      if (worker_error) break;
      queue.push_back(std::move(snap));
      lock.unlock();
      cv.notify_all();
    }
  } catch (...) {
    producer_error = std::current_exception();
  }
  {
    std::lock_guard lock(mu);
    done = true;
  }
  cv.notify_all();
  worker.join();
  if (producer_error) std::rethrow_exception(producer_error);
  if (worker_error) std::rethrow_exception(worker_error);
}

}  // namespace omgmap
