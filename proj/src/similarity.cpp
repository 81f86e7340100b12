#include <algorithm>
#include <cmath>
#include <map>

#include "cadenza/error.hpp"
#include "cadenza/eval.hpp"
#include "cadenza/rng.hpp"

namespace cadenza {

std::string_view to_string(Grouping g) { return g == Grouping::SameSong ? "same_song" : "same_genre"; }

std::vector<TrackEmbedding> aggregate_tracks(const EmbeddingTable& segments) {
  std::map<std::string, std::vector<std::pair<std::uint32_t, std::size_t>>> by_video;
  for (std::size_t r = 0; r < segments.count(); ++r) {
    by_video[segments.ids[r].video_id].emplace_back(segments.ids[r].segment_index, r);
  }
  std::vector<TrackEmbedding> tracks;
  tracks.reserve(by_video.size());
  for (auto& [video, rows] : by_video) {
    std::sort(rows.begin(), rows.end());
    Vector sum = Vector::Zero(Eigen::Index(segments.dim));
    for (const auto& [_, r] : rows) {
      const auto row = segments.row(r);
      for (std::size_t c = 0; c < segments.dim; ++c) sum(Eigen::Index(c)) += row[c];
    }
    const Vector mean = sum / static_cast<double>(rows.size());
    const double norm = mean.norm();
    if (!(norm > 0.0)) throw Error(ErrorKind::Validation, "segments of " + video + " average to zero");
    tracks.push_back({video, mean / norm});
  }
  return tracks;
}

std::vector<TrackEmbedding> aggregate_multimodal(const std::vector<TrackEmbedding>& audio,
                                                 const std::vector<TrackEmbedding>& video) {
  std::map<std::string_view, const Vector*> video_by_id;
  for (const auto& t : video) video_by_id.emplace(t.video_id, &t.vector);
  if (audio.size() != video.size()) throw Error(ErrorKind::Pairing, "audio and video track sets differ");
  std::vector<TrackEmbedding> out;
  out.reserve(audio.size());
  for (const auto& a : audio) {
    auto it = video_by_id.find(a.video_id);
    if (it == video_by_id.end()) throw Error(ErrorKind::Pairing, "no video track for " + a.video_id);
    Vector joint(a.vector.size() + it->second->size());
    joint << a.vector, *it->second;
    out.push_back({a.video_id, joint / joint.norm()});
  }
  return out;
}

namespace {

struct GroupStats {
  Vector sum;
  double self_dot = 0.0;  // sum of ||u||^2 over members
  double within = 0.0;    // sum of u_i . u_j over member pairs i < j
  double n = 0.0;
};

struct PairTotals {
  double within_sum = 0.0, within_pairs = 0.0, between_sum = 0.0, between_pairs = 0.0;
  double gap() const { return within_sum / within_pairs - between_sum / between_pairs; }
};

// Each group g enters `weight[g]` times as a distinct cluster.
PairTotals totals(const std::vector<GroupStats>& groups, const std::vector<double>& weight) {
  PairTotals t;
  Vector all = Vector::Zero(groups.front().sum.size());
  double n_all = 0.0, sq_norms = 0.0, sq_sizes = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double w = weight[g];
    if (w == 0.0) continue;
    const auto& s = groups[g];
    all += w * s.sum;
    n_all += w * s.n;
    sq_norms += w * w * s.sum.squaredNorm();
    sq_sizes += w * w * s.n * s.n;
    t.within_sum += w * s.within;
    t.within_pairs += w * s.n * (s.n - 1.0) / 2.0;
  }
  t.between_sum = (all.squaredNorm() - sq_norms) / 2.0;
  t.between_pairs = (n_all * n_all - sq_sizes) / 2.0;
  return t;
}

}  // namespace

ContrastReport similarity_contrast(const Matrix& rows, std::span<const std::string> group_of_row,
                                   const ContrastOptions& options) {
  if (group_of_row.size() != static_cast<std::size_t>(rows.rows())) {
    throw Error(ErrorKind::Shape, "one group label per row is required");
  }
  if (!(options.confidence > 0.0 && options.confidence < 1.0)) {
    throw Error(ErrorKind::Config, "confidence must lie in (0, 1)");
  }
  const Matrix unit = l2_normalize_rows(rows);
  std::map<std::string_view, std::vector<Eigen::Index>> members;
  for (std::size_t r = 0; r < group_of_row.size(); ++r) members[group_of_row[r]].push_back(Eigen::Index(r));

  ContrastReport report;
  report.confidence = options.confidence;
  report.seed = options.seed;
  std::vector<GroupStats> groups;
  for (const auto& [name, idx] : members) {
    if (idx.size() < 2) {
      report.skipped_groups.emplace_back(name);
      continue;
    }
    GroupStats s;
    s.sum = Vector::Zero(unit.cols());
    for (auto r : idx) {
      s.sum += unit.row(r).transpose();
      s.self_dot += unit.row(r).squaredNorm();
    }
    s.n = static_cast<double>(idx.size());
    // Sum over pairs i<j of u_i.u_j = (||sum u||^2 - sum ||u||^2) / 2.
    s.within = (s.sum.squaredNorm() - s.self_dot) / 2.0;
    groups.push_back(std::move(s));
  }
  if (groups.size() < 2) {
    throw Error(ErrorKind::Validation, "need at least two groups with two or more members each");
  }

  std::vector<double> ones(groups.size(), 1.0);
  auto exact = totals(groups, ones);
  report.n_groups = groups.size();
  for (const auto& g : groups) report.n_items += static_cast<std::size_t>(g.n);
  report.within_pairs = static_cast<std::size_t>(exact.within_pairs);
  report.between_pairs = static_cast<std::size_t>(exact.between_pairs);
  report.mean_within = exact.within_sum / exact.within_pairs;
  report.mean_between = exact.between_sum / exact.between_pairs;
  report.gap = report.mean_within - report.mean_between;

  report.bootstrap_reps = options.bootstrap_reps;
  if (options.bootstrap_reps > 0) {
    auto rng = stream(options.seed, streams::kBootstrap);
    std::vector<double> gaps;
    gaps.reserve(options.bootstrap_reps);
    std::vector<double> weight(groups.size());
    for (std::size_t b = 0; b < options.bootstrap_reps; ++b) {
      std::fill(weight.begin(), weight.end(), 0.0);
      for (std::size_t i = 0; i < groups.size(); ++i) weight[rng.below(groups.size())] += 1.0;
      const auto t = totals(groups, weight);
      if (t.within_pairs > 0 && t.between_pairs > 0) gaps.push_back(t.gap());
    }
    std::sort(gaps.begin(), gaps.end());
    if (!gaps.empty()) {
      const double alpha = (1.0 - options.confidence) / 2.0;
      auto at = [&](double q) {
        const auto i = static_cast<std::size_t>(std::floor(q * static_cast<double>(gaps.size() - 1)));
        return gaps[std::min(i, gaps.size() - 1)];
      };
      report.ci_low = at(alpha);
      report.ci_high = at(1.0 - alpha);
    }
  }
  return report;
}

ContrastReport similarity_contrast(const EmbeddingTable& segments, const Manifest& manifest, Grouping grouping,
                                   const ContrastOptions& options) {
  ContrastReport report;
  if (grouping == Grouping::SameSong) {
    Matrix rows(Eigen::Index(segments.count()), Eigen::Index(segments.dim));
    std::vector<std::string> groups;
    for (std::size_t r = 0; r < segments.count(); ++r) {
      for (std::size_t c = 0; c < segments.dim; ++c) rows(Eigen::Index(r), Eigen::Index(c)) = segments.row(r)[c];
      groups.push_back(segments.ids[r].video_id);
    }
    report = similarity_contrast(rows, groups, options);
  } else {
    std::map<std::string_view, std::string_view> genre_of;
    for (const auto& e : manifest.entries) {
      if (e.genre) genre_of.emplace(e.video_id, *e.genre);
    }
    const auto tracks = aggregate_tracks(segments);
    if (tracks.empty()) throw Error(ErrorKind::Validation, "no tracks to group");
    Matrix rows(Eigen::Index(tracks.size()), tracks.front().vector.size());
    std::vector<std::string> groups;
    for (std::size_t i = 0; i < tracks.size(); ++i) {
      auto it = genre_of.find(tracks[i].video_id);
      if (it == genre_of.end()) {
        throw Error(ErrorKind::Validation, "manifest has no genre for video " + tracks[i].video_id);
      }
      rows.row(Eigen::Index(i)) = tracks[i].vector.transpose();
      groups.emplace_back(it->second);
    }
    report = similarity_contrast(rows, groups, options);
  }
  report.grouping = grouping;
  return report;
}

}  // namespace cadenza
