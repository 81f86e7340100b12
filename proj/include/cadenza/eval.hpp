#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cadenza/dataio.hpp"
#include "cadenza/neuralcore.hpp"

namespace cadenza {

enum class RetrievalDirection { AudioToVideo, VideoToAudio };
std::string_view to_string(RetrievalDirection d);

inline constexpr std::string_view kRankTieRule =
    "rank = 1 + number of candidates with strictly greater cosine similarity (ties favour the true match)";
inline constexpr std::string_view kMedianRule = "even count: mean of the two middle ranks";

struct RankResult {
  std::vector<std::size_t> per_query_rank;
  double median_rank = 0.0;
  RetrievalDirection direction = RetrievalDirection::AudioToVideo;
  std::size_t pool_size = 0;
};

double median(std::vector<std::size_t> values);

// Query i's true candidate is candidates.row(truth[i]). Queries are split
// across CADENZA_THREADS workers; per-query ranks are independent.
RankResult median_rank(const Matrix& queries, const Matrix& candidates, std::span<const std::size_t> truth,
                       RetrievalDirection direction);
// Truth pairing by identical segment id.
RankResult median_rank(const EmbeddingTable& queries, const EmbeddingTable& candidates,
                       RetrievalDirection direction);

// Mann-Whitney: P(s+ > s-) + P(s+ == s-) / 2. nullopt when one class is absent.
std::optional<double> roc_auc(std::span<const double> scores, std::span<const int> labels);

double f1_score(std::size_t tp, std::size_t fp, std::size_t fn);
// Per-column F1 at `threshold`, unweighted mean. A column with no predicted
// and no true positives scores 0.
double f1_macro(const Matrix& probs, const Matrix& labels, double threshold = 0.5);

struct ProbeMetrics {
  std::map<std::string, double> per_label_auc;
  std::vector<std::string> non_evaluable;  // single-class labels, excluded from macro AUC
  double macro_auc = 0.0;
  double macro_f1 = 0.0;
  double threshold = 0.5;
  double accuracy = 0.0;  // argmax accuracy, meaningful for single-label tasks
};

ProbeMetrics probe_metrics(const Matrix& probs, const Matrix& labels, const std::vector<std::string>& names,
                           double threshold = 0.5);

struct TrackEmbedding {
  std::string video_id;
  Vector vector;  // unit norm
};

// Mean of each video's segments (summed in segment-index order), then
// L2-normalized. Output is sorted by video id.
std::vector<TrackEmbedding> aggregate_tracks(const EmbeddingTable& segments);
// Concatenates per-modality track vectors and renormalizes.
std::vector<TrackEmbedding> aggregate_multimodal(const std::vector<TrackEmbedding>& audio,
                                                 const std::vector<TrackEmbedding>& video);

enum class Grouping { SameSong, SameGenre };
std::string_view to_string(Grouping g);

struct ContrastOptions {
  std::size_t bootstrap_reps = 1000;
  double confidence = 0.99;
  std::uint64_t seed = 0;
};

struct ContrastReport {
  Grouping grouping = Grouping::SameSong;
  double mean_within = 0.0;
  double mean_between = 0.0;
  double gap = 0.0;
  std::size_t n_items = 0;
  std::size_t n_groups = 0;
  std::size_t within_pairs = 0;
  std::size_t between_pairs = 0;
  std::vector<std::string> skipped_groups;  // fewer than two members
  // Pair statistics are exact over all pairs; no subsampling is ever done.
  bool subsampled = false;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double confidence = 0.99;
  std::size_t bootstrap_reps = 0;
  std::uint64_t seed = 0;
};

// Mean pairwise cosine within vs between groups over all pairs, with a
// percentile bootstrap interval on the gap from resampling whole groups.
ContrastReport similarity_contrast(const Matrix& rows, std::span<const std::string> group_of_row,
                                   const ContrastOptions& options);
// SameSong groups segment embeddings by video; SameGenre groups track
// aggregates by the manifest genre.
ContrastReport similarity_contrast(const EmbeddingTable& segments, const Manifest& manifest, Grouping grouping,
                                   const ContrastOptions& options = {});

enum class RetrievalLevel { Segment, Track };
std::string_view to_string(RetrievalLevel l);

struct RetrievalItem {
  std::string key;  // "video#segment" at segment level, video id at track level
  std::string video_id;
};

struct RetrievalPool {
  std::vector<RetrievalItem> items;
  Matrix unit;  // L2-normalized rows aligned with items

  std::optional<std::size_t> find(std::string_view key) const;
};

RetrievalPool make_segment_pool(const EmbeddingTable& segments);
RetrievalPool make_track_pool(const std::vector<TrackEmbedding>& tracks);

struct Neighbor {
  std::string key;
  double similarity = 0.0;
};

struct SeedResult {
  std::string seed;
  std::vector<Neighbor> neighbors;
};

struct RetrievalReport {
  RetrievalLevel level = RetrievalLevel::Track;
  std::size_t k = 0;
  std::vector<SeedResult> results;
};

// Top-k by cosine, skipping the seed and (segment level) the seed's own
// video; equal similarities are ordered by key.
RetrievalReport retrieve_topk(const RetrievalPool& pool, std::span<const std::string> seeds, std::size_t k,
                              RetrievalLevel level);

std::vector<std::string> pick_random_seeds(const RetrievalPool& pool, std::size_t n, std::uint64_t seed);

// Worker cap from CADENZA_THREADS (default 1).
std::size_t worker_count();

}  // namespace cadenza
