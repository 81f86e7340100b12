#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cadenza {

struct SegmentId {
  std::string video_id;
  std::uint32_t segment_index = 0;

  auto operator<=>(const SegmentId&) const = default;
  bool operator==(const SegmentId&) const = default;
};

std::string to_string(const SegmentId& id);

// count x dim row-major float32 matrix keyed by segment ids.
struct EmbeddingTable {
  std::size_t dim = 0;
  std::vector<float> data;
  std::vector<SegmentId> ids;

  std::size_t count() const { return ids.size(); }
  std::span<const float> row(std::size_t i) const { return {data.data() + i * dim, dim}; }
  std::span<float> row(std::size_t i) { return {data.data() + i * dim, dim}; }

  // Throws Error(Validation) naming the first offending row.
  void validate() const;

  bool operator==(const EmbeddingTable&) const = default;
};

// Selects rows (in the given order) into a new table.
EmbeddingTable take_rows(const EmbeddingTable& table, std::span<const std::size_t> rows);

// Binary layout (little-endian): "MVEB" | u32 version | u64 count | u32 dim |
// u32 reserved | count*dim float32. Ids go to the sidecar `<path>.ids`.
inline constexpr char kEmbeddingMagic[4] = {'M', 'V', 'E', 'B'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;
inline constexpr std::size_t kEmbeddingHeaderBytes = 24;

void write_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);
EmbeddingTable read_embeddings(const std::filesystem::path& path);
std::filesystem::path ids_sidecar_path(const std::filesystem::path& path);

enum class Split { Train, Val, Test };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct ManifestEntry {
  std::string video_id;
  std::uint32_t segment_index = 0;
  Split split = Split::Train;
  std::optional<std::string> genre;
  std::vector<std::string> tags;
  std::optional<double> duration_s;

  SegmentId id() const { return {video_id, segment_index}; }
  bool operator==(const ManifestEntry&) const = default;
};

struct Manifest {
  std::vector<ManifestEntry> entries;

  // Throws Error(SplitConsistency) if a video spans several splits.
  void check_split_consistency() const;
  bool operator==(const Manifest&) const = default;
};

void write_manifest(const Manifest& manifest, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
};

// Assigns whole videos to splits: shuffle the distinct ids, then take
// round(train*n) for train, round(val*n) for val and the rest for test.
std::map<std::string, Split> assign_splits(std::vector<std::string> video_ids,
                                           const SplitFractions& fractions, std::uint64_t seed);

// Audio row i, video row i and manifest entry i all describe the same segment.
struct PairedDataset {
  EmbeddingTable audio;
  EmbeddingTable video;
  Manifest manifest;

  std::size_t size() const { return manifest.entries.size(); }
  std::vector<std::size_t> rows_in(Split split) const;
  void validate() const;
  bool operator==(const PairedDataset&) const = default;
};

struct DatasetPaths {
  std::filesystem::path audio;
  std::filesystem::path video;
  std::filesystem::path manifest;

  static DatasetPaths in(const std::filesystem::path& dir);
};

PairedDataset assemble_dataset(const std::filesystem::path& audio_path,
                               const std::filesystem::path& video_path,
                               const std::filesystem::path& manifest_path);
inline PairedDataset assemble_dataset(const DatasetPaths& paths) {
  return assemble_dataset(paths.audio, paths.video, paths.manifest);
}
// Pairs in-memory tables; same contract as the file-based overload.
PairedDataset assemble_dataset(EmbeddingTable audio, EmbeddingTable video, Manifest manifest);

void write_dataset(const PairedDataset& dataset, const std::filesystem::path& dir);

// k most frequent tags over train-split videos; ties broken lexicographically.
std::vector<std::string> select_top_tags(const Manifest& manifest, std::size_t k = 10);

struct SynthSpec {
  std::size_t n_videos = 100;
  std::size_t segments_per_video = 6;
  std::size_t latent_dim = 16;
  std::size_t audio_dim = 64;
  std::size_t video_dim = 48;
  double cross_modal_correlation = 0.5;
  double noise_sigma = 0.1;
  // Spread of per-segment latents around their video latent.
  double segment_jitter = 0.5;
  std::size_t n_genres = 5;
  std::size_t n_tags = 12;
  SplitFractions splits;
  std::uint64_t seed = 0;

  void validate() const;
};

PairedDataset generate_synthetic(const SynthSpec& spec);

}  // namespace cadenza
