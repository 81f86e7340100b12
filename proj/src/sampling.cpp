#include "cadenza/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cadenza/error.hpp"
#include "cadenza/rng.hpp"

namespace cadenza {

std::vector<SegmentWindow> plan_segments(double duration_s, std::size_t n_sections, double seg_len_s,
                                         std::uint64_t seed) {
  if (n_sections == 0 || !(seg_len_s > 0.0)) {
    throw Error(ErrorKind::Config, "plan_segments needs n_sections > 0 and seg_len_s > 0");
  }
  const double min_duration = static_cast<double>(n_sections) * seg_len_s;
  if (!(duration_s >= min_duration)) {
    throw Error(ErrorKind::Validation,
                fmt::format("track of {} s is too short: {} sections of {} s need at least {} s",
                            duration_s, n_sections, seg_len_s, min_duration));
  }
  auto rng = Rng(seed);
  const double section = duration_s / static_cast<double>(n_sections);
  std::vector<SegmentWindow> windows;
  windows.reserve(n_sections);
  for (std::size_t i = 0; i < n_sections; ++i) {
    const double lo = section * static_cast<double>(i);
    // Clamp guards the zero-slack case against rounding in section*i.
    const double hi = std::max(lo, section * static_cast<double>(i + 1) - seg_len_s);
    const double start = rng.uniform(lo, hi);
    windows.push_back({i, start, start + seg_len_s});
  }
  return windows;
}

FramePlan plan_frames_with_phase(const SegmentWindow& window, std::size_t n_frames, double phase_s) {
  if (n_frames == 0) throw Error(ErrorKind::Config, "n_frames must be positive");
  const double spacing = (window.end_s - window.start_s) / static_cast<double>(n_frames);
  if (!(spacing > 0.0) || phase_s < 0.0 || phase_s >= spacing) {
    throw Error(ErrorKind::Config, "frame phase must lie in [0, spacing)");
  }
  FramePlan plan;
  plan.timestamps_s.reserve(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    plan.timestamps_s.push_back(window.start_s + phase_s + spacing * static_cast<double>(i));
  }
  return plan;
}

FramePlan plan_frames(const SegmentWindow& window, std::size_t n_frames, std::uint64_t seed) {
  if (n_frames == 0) throw Error(ErrorKind::Config, "n_frames must be positive");
  auto rng = Rng(seed);
  const double spacing = (window.end_s - window.start_s) / static_cast<double>(n_frames);
  return plan_frames_with_phase(window, n_frames, rng.uniform() * spacing);
}

CropPlan plan_crop(Resolution frame, std::uint64_t seed, std::uint32_t short_side, std::uint32_t crop) {
  if (frame.width == 0 || frame.height == 0) {
    throw Error(ErrorKind::Validation,
                fmt::format("degenerate frame {}x{}", frame.width, frame.height));
  }
  if (short_side < crop) {
    throw Error(ErrorKind::Config,
                fmt::format("resize target {} is smaller than crop {}", short_side, crop));
  }
  const std::uint64_t shorter = std::min(frame.width, frame.height);
  // Round half up in integer arithmetic: floor((2*len*target + shorter) / (2*shorter)).
  auto scaled = [&](std::uint64_t len) {
    return static_cast<std::uint32_t>((2 * len * short_side + shorter) / (2 * shorter));
  };
  CropPlan plan;
  plan.resize_to = {scaled(frame.width), scaled(frame.height)};
  plan.crop_size = {crop, crop};
  auto rng = Rng(seed);
  plan.crop_x = static_cast<std::uint32_t>(rng.below(plan.resize_to.width - crop + 1));
  plan.crop_y = static_cast<std::uint32_t>(rng.below(plan.resize_to.height - crop + 1));
  return plan;
}

BatchPlan plan_batches(std::span<const std::string> row_video_ids, std::span<const std::size_t> rows,
                       std::size_t batch_size, std::uint64_t seed) {
  if (batch_size < 2) throw Error(ErrorKind::Config, "batch_size must be at least 2");

  std::map<std::string_view, std::vector<std::size_t>> by_video;
  for (std::size_t r : rows) by_video[row_video_ids[r]].push_back(r);
  if (by_video.size() < batch_size) {
    throw Error(ErrorKind::Unsatisfiable,
                fmt::format("batch_size {} exceeds the {} distinct videos available", batch_size,
                            by_video.size()));
  }

  auto rng = Rng(seed);
  std::vector<std::vector<std::size_t>> groups;
  groups.reserve(by_video.size());
  for (auto& [_, g] : by_video) {
    rng.shuffle(std::span(g));
    groups.push_back(std::move(g));
  }

  std::size_t remaining = rows.size();
  BatchPlan plan;
  std::vector<std::pair<std::uint64_t, std::size_t>> order;
  while (remaining > 0) {
    order.clear();
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (!groups[g].empty()) order.emplace_back(rng.next_u64(), g);
    }
    std::sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
      const auto na = groups[a.second].size(), nb = groups[b.second].size();
      return na != nb ? na > nb : a < b;
    });
    const std::size_t take = std::min(batch_size, order.size());
    std::vector<std::size_t> batch;
    batch.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
      auto& g = groups[order[i].second];
      batch.push_back(g.back());
      g.pop_back();
    }
    remaining -= take;
    if (take < batch_size && remaining > 0) {
      throw Error(ErrorKind::Unsatisfiable,
                  fmt::format("cannot fill batch {} of size {}: only {} distinct videos remain",
                              plan.batches.size(), batch_size, take));
    }
    rng.shuffle(std::span(batch));
    plan.batches.push_back(std::move(batch));
  }
  return plan;
}

BatchPlan plan_batches(const PairedDataset& dataset, Split split, std::size_t batch_size,
                       std::uint64_t seed) {
  std::vector<std::string> video_ids;
  video_ids.reserve(dataset.size());
  for (const auto& e : dataset.manifest.entries) video_ids.push_back(e.video_id);
  const auto rows = dataset.rows_in(split);
  return plan_batches(video_ids, rows, batch_size, seed);
}

TrackPlan plan_track(const std::string& video_id, double duration_s, std::uint64_t seed,
                     const TrackPlanOptions& options) {
  TrackPlan plan;
  plan.video_id = video_id;
  plan.duration_s = duration_s;
  plan.segments = plan_segments(duration_s, options.n_sections, options.seg_len_s,
                                derive_seed(seed, "segments"));
  for (const auto& w : plan.segments) {
    plan.frames.push_back(plan_frames(w, options.n_frames, derive_seed(seed, "frames", w.section_index)));
    plan.crops.push_back(
        plan_crop(kFrameResolution, derive_seed(seed, "crop", w.section_index), options.short_side));
  }
  return plan;
}

std::string to_json(const TrackPlan& plan) {
  std::string out = fmt::format(R"({{"video_id":{},"duration_s":{:.6f},"segments":[)",
                                nlohmann::json(plan.video_id).dump(), plan.duration_s);
  for (std::size_t i = 0; i < plan.segments.size(); ++i) {
    const auto& w = plan.segments[i];
    const auto& f = plan.frames[i];
    const auto& c = plan.crops[i];
    if (i) out += ',';
    out += fmt::format(R"({{"section_index":{},"start_s":{:.6f},"end_s":{:.6f},)", w.section_index,
                       w.start_s, w.end_s);
    out += fmt::format(R"("frames":{{"resolution":[{},{}],"timestamps_s":[)", f.resolution.width,
                       f.resolution.height);
    for (std::size_t t = 0; t < f.timestamps_s.size(); ++t) {
      out += fmt::format("{}{:.6f}", t ? "," : "", f.timestamps_s[t]);
    }
    out += fmt::format(R"(]}},"crop":{{"resize_to":[{},{}],"origin":[{},{}],"size":[{},{}]}}}})",
                       c.resize_to.width, c.resize_to.height, c.crop_x, c.crop_y, c.crop_size.width,
                       c.crop_size.height);
  }
  out += "]}";
  return out;
}

}  // namespace cadenza
