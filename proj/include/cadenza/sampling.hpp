#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cadenza/dataio.hpp"

namespace cadenza {

struct SegmentWindow {
  std::size_t section_index = 0;
  double start_s = 0.0;
  double end_s = 0.0;
};

// One window per equally sized section, start drawn uniformly so the window
// stays inside its section. Throws Error(Validation) when the track is
// shorter than n_sections * seg_len_s.
std::vector<SegmentWindow> plan_segments(double duration_s, std::size_t n_sections, double seg_len_s,
                                         std::uint64_t seed);

struct Resolution {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  bool operator==(const Resolution&) const = default;
};

inline constexpr Resolution kFrameResolution{768, 432};
inline constexpr std::size_t kFramesPerSegment = 50;

struct FramePlan {
  std::vector<double> timestamps_s;
  Resolution resolution = kFrameResolution;
};

// Equal spacing (end-start)/n_frames with a random phase in [0, spacing).
FramePlan plan_frames(const SegmentWindow& window, std::size_t n_frames, std::uint64_t seed);
FramePlan plan_frames_with_phase(const SegmentWindow& window, std::size_t n_frames, double phase_s);

struct CropPlan {
  Resolution resize_to;
  std::uint32_t crop_x = 0;
  std::uint32_t crop_y = 0;
  Resolution crop_size{112, 112};
};

// Resize so the shorter side equals short_side (long side rounded half up),
// then draw a uniform crop origin.
CropPlan plan_crop(Resolution frame, std::uint64_t seed, std::uint32_t short_side = 128,
                   std::uint32_t crop = 112);

struct BatchPlan {
  std::vector<std::vector<std::size_t>> batches;
};

// Epoch plan over `rows` such that no batch holds two segments of the same
// video. Each round takes one segment from each of the batch_size videos
// with the most segments left (random tie-break), which fills every batch
// but the last whenever any valid plan exists.
BatchPlan plan_batches(std::span<const std::string> row_video_ids, std::span<const std::size_t> rows,
                       std::size_t batch_size, std::uint64_t seed);
BatchPlan plan_batches(const PairedDataset& dataset, Split split, std::size_t batch_size,
                       std::uint64_t seed);

struct TrackPlan {
  std::string video_id;
  double duration_s = 0.0;
  std::vector<SegmentWindow> segments;
  std::vector<FramePlan> frames;
  std::vector<CropPlan> crops;
};

struct TrackPlanOptions {
  std::size_t n_sections = 6;
  double seg_len_s = 5.0;
  std::size_t n_frames = kFramesPerSegment;
  std::uint32_t short_side = 128;
};

TrackPlan plan_track(const std::string& video_id, double duration_s, std::uint64_t seed,
                     const TrackPlanOptions& options = {});

// JSON with every time value printed to 6 decimal places.
std::string to_json(const TrackPlan& plan);

}  // namespace cadenza
