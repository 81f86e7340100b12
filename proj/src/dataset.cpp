#include <algorithm>
#include <map>
#include <set>

#include "cadenza/dataio.hpp"
#include "cadenza/error.hpp"

namespace cadenza {

std::vector<std::size_t> PairedDataset::rows_in(Split split) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    if (manifest.entries[i].split == split) rows.push_back(i);
  }
  return rows;
}

void PairedDataset::validate() const {
  audio.validate();
  video.validate();
  if (audio.count() != size() || video.count() != size()) {
    throw Error(ErrorKind::Pairing, "audio, video and manifest row counts differ");
  }
  for (std::size_t i = 0; i < size(); ++i) {
    const auto id = manifest.entries[i].id();
    if (audio.ids[i] != id || video.ids[i] != id) {
      throw Error(ErrorKind::Pairing, "row " + std::to_string(i) + " is not aligned");
    }
  }
  manifest.check_split_consistency();
}

DatasetPaths DatasetPaths::in(const std::filesystem::path& dir) {
  return {dir / "audio.mveb", dir / "video.mveb", dir / "manifest.jsonl"};
}

PairedDataset assemble_dataset(const std::filesystem::path& audio_path,
                               const std::filesystem::path& video_path,
                               const std::filesystem::path& manifest_path) {
  return assemble_dataset(read_embeddings(audio_path), read_embeddings(video_path),
                          read_manifest(manifest_path));
}

namespace {

std::map<SegmentId, std::size_t> index_of(const EmbeddingTable& table) {
  std::map<SegmentId, std::size_t> idx;
  for (std::size_t i = 0; i < table.ids.size(); ++i) idx.emplace(table.ids[i], i);
  return idx;
}

std::string list_ids(const std::vector<SegmentId>& ids) {
  std::string out;
  for (const auto& id : ids) {
    if (!out.empty()) out += ", ";
    out += "(" + id.video_id + ", " + std::to_string(id.segment_index) + ")";
  }
  return out;
}

}  // namespace

PairedDataset assemble_dataset(EmbeddingTable audio, EmbeddingTable video, Manifest manifest) {
  audio.validate();
  video.validate();
  manifest.check_split_consistency();

  const auto audio_idx = index_of(audio);
  const auto video_idx = index_of(video);
  std::set<SegmentId> manifest_ids;
  for (const auto& e : manifest.entries) {
    if (!manifest_ids.insert(e.id()).second) {
      throw Error(ErrorKind::Validation, "manifest lists " + to_string(e.id()) + " twice");
    }
  }

  std::vector<SegmentId> missing_video, missing_audio, missing_manifest, missing_tables;
  for (const auto& [id, _] : audio_idx) {
    if (!video_idx.contains(id)) missing_video.push_back(id);
    if (!manifest_ids.contains(id)) missing_manifest.push_back(id);
  }
  for (const auto& [id, _] : video_idx) {
    if (!audio_idx.contains(id)) missing_audio.push_back(id);
    if (!audio_idx.contains(id) && !manifest_ids.contains(id)) missing_manifest.push_back(id);
  }
  for (const auto& id : manifest_ids) {
    if (!audio_idx.contains(id) && !video_idx.contains(id)) missing_tables.push_back(id);
  }
  std::sort(missing_manifest.begin(), missing_manifest.end());
  std::string problems;
  auto report = [&](const char* what, const std::vector<SegmentId>& ids) {
    if (ids.empty()) return;
    problems += std::string(problems.empty() ? "" : "; ") + what + ": " + list_ids(ids);
  };
  report("missing from video table", missing_video);
  report("missing from audio table", missing_audio);
  report("missing from manifest", missing_manifest);
  report("manifest entries without embeddings", missing_tables);
  if (!problems.empty()) throw Error(ErrorKind::Pairing, problems);

  PairedDataset ds;
  ds.audio.dim = audio.dim;
  ds.video.dim = video.dim;
  std::vector<std::size_t> audio_rows, video_rows;
  for (const auto& e : manifest.entries) {
    audio_rows.push_back(audio_idx.at(e.id()));
    video_rows.push_back(video_idx.at(e.id()));
  }
  ds.audio = take_rows(audio, audio_rows);
  ds.video = take_rows(video, video_rows);
  ds.manifest = std::move(manifest);
  return ds;
}

void write_dataset(const PairedDataset& dataset, const std::filesystem::path& dir) {
  dataset.validate();
  std::filesystem::create_directories(dir);
  const auto paths = DatasetPaths::in(dir);
  write_embeddings(dataset.audio, paths.audio);
  write_embeddings(dataset.video, paths.video);
  write_manifest(dataset.manifest, paths.manifest);
}

std::vector<std::string> select_top_tags(const Manifest& manifest, std::size_t k) {
  if (k == 0) throw Error(ErrorKind::Config, "k must be positive");
  // Videos are the counting unit: a tag counts once per train video.
  std::map<std::string, std::set<std::string>> videos_per_tag;
  for (const auto& e : manifest.entries) {
    if (e.split != Split::Train) continue;
    for (const auto& tag : e.tags) videos_per_tag[tag].insert(e.video_id);
  }
  if (videos_per_tag.size() < k) {
    throw Error(ErrorKind::Validation, "requested " + std::to_string(k) + " tags but only " +
                                           std::to_string(videos_per_tag.size()) +
                                           " distinct tags are available in the train split");
  }
  std::vector<std::pair<std::string, std::size_t>> counts;
  for (const auto& [tag, vids] : videos_per_tag) counts.emplace_back(tag, vids.size());
  std::stable_sort(counts.begin(), counts.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> top;
  for (std::size_t i = 0; i < k; ++i) top.push_back(counts[i].first);
  return top;
}

}  // namespace cadenza
