#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cadenza/dataio.hpp"
#include "cadenza/error.hpp"
#include "cadenza/rng.hpp"
#include "io_util.hpp"

namespace cadenza {

using nlohmann::json;

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::Train;
  if (text == "val") return Split::Val;
  if (text == "test") return Split::Test;
  throw Error(ErrorKind::Validation, "unknown split '" + std::string(text) + "'");
}

void Manifest::check_split_consistency() const {
  std::map<std::string, Split> seen;
  for (const auto& e : entries) {
    auto [it, inserted] = seen.emplace(e.video_id, e.split);
    if (!inserted && it->second != e.split) {
      throw Error(ErrorKind::SplitConsistency,
                  "video " + e.video_id + " appears in both " + std::string(to_string(it->second)) +
                      " and " + std::string(to_string(e.split)));
    }
  }
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  std::string out;
  for (const auto& e : manifest.entries) {
    json j;
    j["video_id"] = e.video_id;
    j["segment_index"] = e.segment_index;
    j["split"] = std::string(to_string(e.split));
    if (e.genre) j["genre"] = *e.genre;
    j["tags"] = e.tags;
    if (e.duration_s) j["duration_s"] = *e.duration_s;
    out += j.dump();
    out += '\n';
  }
  detail::write_file_atomic(path, out);
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::istringstream lines(detail::read_file(path));
  Manifest manifest;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = path.string() + ":" + std::to_string(line_no);
    try {
      const json j = json::parse(line);
      ManifestEntry e;
      e.video_id = j.at("video_id").get<std::string>();
      e.segment_index = j.at("segment_index").get<std::uint32_t>();
      e.split = parse_split(j.at("split").get<std::string>());
      if (j.contains("genre") && !j["genre"].is_null()) e.genre = j["genre"].get<std::string>();
      if (j.contains("tags")) e.tags = j["tags"].get<std::vector<std::string>>();
      if (j.contains("duration_s") && !j["duration_s"].is_null()) {
        e.duration_s = j["duration_s"].get<double>();
        if (!(*e.duration_s > 0.0)) throw Error(ErrorKind::Validation, "duration_s must be positive");
      }
      if (e.video_id.empty()) throw Error(ErrorKind::Validation, "empty video_id");
      manifest.entries.push_back(std::move(e));
    } catch (const Error& err) {
      throw Error(ErrorKind::Validation, where + ": " + err.what());
    } catch (const json::exception& err) {
      throw Error(ErrorKind::Validation, where + ": " + err.what());
    }
  }
  return manifest;
}

std::map<std::string, Split> assign_splits(std::vector<std::string> video_ids,
                                           const SplitFractions& fractions, std::uint64_t seed) {
  if (fractions.train < 0 || fractions.val < 0 || fractions.train + fractions.val > 1.0 + 1e-12) {
    throw Error(ErrorKind::Config, "split fractions must be non-negative and sum to at most 1");
  }
  std::sort(video_ids.begin(), video_ids.end());
  video_ids.erase(std::unique(video_ids.begin(), video_ids.end()), video_ids.end());
  auto rng = stream(seed, streams::kSynth, 1);
  rng.shuffle(std::span(video_ids));

  const auto n = static_cast<double>(video_ids.size());
  const auto n_train = static_cast<std::size_t>(std::llround(fractions.train * n));
  const auto n_val =
      std::min(video_ids.size() - n_train, static_cast<std::size_t>(std::llround(fractions.val * n)));
  std::map<std::string, Split> out;
  for (std::size_t i = 0; i < video_ids.size(); ++i) {
    out[video_ids[i]] = i < n_train ? Split::Train : (i < n_train + n_val ? Split::Val : Split::Test);
  }
  return out;
}

}  // namespace cadenza
