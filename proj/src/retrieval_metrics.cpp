#include <algorithm>
#include <cstdlib>
#include <map>
#include <set>
#include <thread>

#include "cadenza/error.hpp"
#include "cadenza/eval.hpp"
#include "cadenza/rng.hpp"

namespace cadenza {

std::string_view to_string(RetrievalDirection d) {
  return d == RetrievalDirection::AudioToVideo ? "audio->video" : "video->audio";
}

std::string_view to_string(RetrievalLevel l) { return l == RetrievalLevel::Segment ? "segment" : "track"; }

std::size_t worker_count() {
  if (const char* env = std::getenv("CADENZA_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<std::size_t>(n);
  }
  return 1;
}

double median(std::vector<std::size_t> values) {
  if (values.empty()) throw Error(ErrorKind::Validation, "median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return static_cast<double>(values[n / 2]);
  return 0.5 * (static_cast<double>(values[n / 2 - 1]) + static_cast<double>(values[n / 2]));
}

RankResult median_rank(const Matrix& queries, const Matrix& candidates, std::span<const std::size_t> truth,
                       RetrievalDirection direction) {
  if (queries.cols() != candidates.cols()) throw Error(ErrorKind::Shape, "query and candidate dims differ");
  if (truth.size() != static_cast<std::size_t>(queries.rows())) {
    throw Error(ErrorKind::Pairing, "every query needs a true candidate");
  }
  const auto m = static_cast<std::size_t>(candidates.rows());
  for (auto t : truth) {
    if (t >= m) throw Error(ErrorKind::Pairing, "true candidate index out of range");
  }
  const Matrix q = l2_normalize_rows(queries);
  const Matrix c = l2_normalize_rows(candidates);

  RankResult result;
  result.direction = direction;
  result.pool_size = m;
  result.per_query_rank.assign(truth.size(), 0);

  // Fixed-size query blocks keep every similarity value independent of the
  // number of workers.
  constexpr std::size_t kBlock = 64;
  const std::size_t n_blocks = (truth.size() + kBlock - 1) / kBlock;
  auto run_blocks = [&](std::size_t first, std::size_t stride) {
    for (std::size_t b = first; b < n_blocks; b += stride) {
      const std::size_t start = b * kBlock, len = std::min(kBlock, truth.size() - start);
      const Matrix sims = q.middleRows(Eigen::Index(start), Eigen::Index(len)) * c.transpose();
      for (std::size_t i = 0; i < len; ++i) {
        const double target = sims(Eigen::Index(i), Eigen::Index(truth[start + i]));
        std::size_t greater = 0;
        for (Eigen::Index k = 0; k < sims.cols(); ++k) greater += sims(Eigen::Index(i), k) > target;
        result.per_query_rank[start + i] = greater + 1;
      }
    }
  };
  const std::size_t workers = std::min(worker_count(), std::max<std::size_t>(n_blocks, 1));
  if (workers <= 1) {
    run_blocks(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run_blocks, w, workers);
  }
  result.median_rank = median(result.per_query_rank);
  return result;
}

RankResult median_rank(const EmbeddingTable& queries, const EmbeddingTable& candidates,
                       RetrievalDirection direction) {
  std::map<SegmentId, std::size_t> index;
  for (std::size_t i = 0; i < candidates.count(); ++i) index.emplace(candidates.ids[i], i);
  std::vector<std::size_t> truth;
  truth.reserve(queries.count());
  for (const auto& id : queries.ids) {
    auto it = index.find(id);
    if (it == index.end()) throw Error(ErrorKind::Pairing, "no candidate for query " + to_string(id));
    truth.push_back(it->second);
  }
  if (queries.count() != candidates.count()) {
    throw Error(ErrorKind::Pairing, "truth pairing must be a bijection: query and candidate counts differ");
  }
  auto to_m = [](const EmbeddingTable& t) {
    Matrix m(Eigen::Index(t.count()), Eigen::Index(t.dim));
    for (std::size_t r = 0; r < t.count(); ++r)
      for (std::size_t col = 0; col < t.dim; ++col) m(Eigen::Index(r), Eigen::Index(col)) = t.row(r)[col];
    return m;
  };
  return median_rank(to_m(queries), to_m(candidates), truth, direction);
}

std::optional<std::size_t> RetrievalPool::find(std::string_view key) const {
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].key == key) return i;
  }
  return std::nullopt;
}

RetrievalPool make_segment_pool(const EmbeddingTable& segments) {
  RetrievalPool pool;
  Matrix m(Eigen::Index(segments.count()), Eigen::Index(segments.dim));
  for (std::size_t r = 0; r < segments.count(); ++r) {
    pool.items.push_back({to_string(segments.ids[r]), segments.ids[r].video_id});
    for (std::size_t c = 0; c < segments.dim; ++c) m(Eigen::Index(r), Eigen::Index(c)) = segments.row(r)[c];
  }
  pool.unit = l2_normalize_rows(m);
  return pool;
}

RetrievalPool make_track_pool(const std::vector<TrackEmbedding>& tracks) {
  RetrievalPool pool;
  if (tracks.empty()) return pool;
  Matrix m(Eigen::Index(tracks.size()), tracks.front().vector.size());
  for (std::size_t r = 0; r < tracks.size(); ++r) {
    pool.items.push_back({tracks[r].video_id, tracks[r].video_id});
    m.row(Eigen::Index(r)) = tracks[r].vector.transpose();
  }
  pool.unit = l2_normalize_rows(m);
  return pool;
}

RetrievalReport retrieve_topk(const RetrievalPool& pool, std::span<const std::string> seeds, std::size_t k,
                              RetrievalLevel level) {
  if (k == 0 || k >= pool.items.size()) {
    throw Error(ErrorKind::Config, "k must lie in [1, pool size); pool has " +
                                       std::to_string(pool.items.size()) + " items");
  }
  std::map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < pool.items.size(); ++i) index.emplace(pool.items[i].key, i);

  RetrievalReport report;
  report.level = level;
  report.k = k;
  for (const auto& seed : seeds) {
    auto it = index.find(seed);
    if (it == index.end()) throw Error(ErrorKind::Validation, "unknown seed id '" + seed + "'");
    const std::size_t s = it->second;
    const Vector sims = pool.unit * pool.unit.row(Eigen::Index(s)).transpose();
    std::vector<std::size_t> cand;
    for (std::size_t i = 0; i < pool.items.size(); ++i) {
      if (i == s) continue;
      if (level == RetrievalLevel::Segment && pool.items[i].video_id == pool.items[s].video_id) continue;
      cand.push_back(i);
    }
    const std::size_t take = std::min(k, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + long(take), cand.end(), [&](std::size_t a, std::size_t b) {
      const double sa = sims(Eigen::Index(a)), sb = sims(Eigen::Index(b));
      return sa != sb ? sa > sb : pool.items[a].key < pool.items[b].key;
    });
    SeedResult r;
    r.seed = seed;
    for (std::size_t i = 0; i < take; ++i) r.neighbors.push_back({pool.items[cand[i]].key, sims(Eigen::Index(cand[i]))});
    report.results.push_back(std::move(r));
  }
  return report;
}

std::vector<std::string> pick_random_seeds(const RetrievalPool& pool, std::size_t n, std::uint64_t seed) {
  if (n > pool.items.size()) {
    throw Error(ErrorKind::Config, "cannot pick " + std::to_string(n) + " seeds from a pool of " +
                                       std::to_string(pool.items.size()));
  }
  std::vector<std::size_t> idx(pool.items.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  auto rng = stream(seed, streams::kSeeds);
  rng.shuffle(std::span(idx));
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(pool.items[idx[i]].key);
  return out;
}

}  // namespace cadenza
