#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>

#include "cadenza/error.hpp"
#include "cadenza/eval.hpp"
#include "cadenza/reports.hpp"
#include "cadenza/rng.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace cadenza;
using testing::random_matrix;

namespace {

std::vector<std::size_t> iota_n(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

EmbeddingTable table_from(const Matrix& m, const std::vector<SegmentId>& ids) {
  EmbeddingTable t;
  t.dim = std::size_t(m.cols());
  t.ids = ids;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) t.data.push_back(float(m(r, c)));
  return t;
}

}  // namespace

TEST_CASE("median rule") {
  CHECK(median({1, 3}) == 2.0);
  CHECK(median({5, 1, 3}) == 3.0);
  CHECK_THROWS_AS(median({}), Error);
}

TEST_CASE("exact match with orthogonal distractors ranks first") {
  const Matrix q = Matrix::Identity(4, 4);
  const auto r = median_rank(q, q, iota_n(4), RetrievalDirection::AudioToVideo);
  CHECK(r.per_query_rank == std::vector<std::size_t>{1, 1, 1, 1});
  CHECK(r.median_rank == 1.0);
  CHECK(r.pool_size == 4);
}

TEST_CASE("ties resolve in favour of the true candidate") {
  const Matrix q = Matrix::Ones(3, 2), c = Matrix::Ones(3, 2);
  const auto r = median_rank(q, c, iota_n(3), RetrievalDirection::VideoToAudio);
  CHECK(r.per_query_rank == std::vector<std::size_t>{1, 1, 1});
}

TEST_CASE("ranks match a brute-force count and survive rescaling") {
  Rng rng(1);
  const Matrix q = random_matrix(rng, 150, 8), c = random_matrix(rng, 150, 8);
  const auto r = median_rank(q, c, iota_n(150), RetrievalDirection::AudioToVideo);
  for (Eigen::Index i = 0; i < 150; ++i) {
    const double own = oracle::cosine(q, i, c, i);
    std::size_t rank = 1;
    for (Eigen::Index k = 0; k < 150; ++k) rank += oracle::cosine(q, i, c, k) > own;
    CHECK(r.per_query_rank[std::size_t(i)] == rank);
  }
  const auto scaled = median_rank(q * 3.5, c * 0.25, iota_n(150), RetrievalDirection::AudioToVideo);
  CHECK(scaled.per_query_rank == r.per_query_rank);
}

TEST_CASE("random embeddings sit at chance") {
  Rng rng(2);
  const auto r = median_rank(random_matrix(rng, 1000, 32), random_matrix(rng, 1000, 32), iota_n(1000),
                             RetrievalDirection::AudioToVideo);
  CHECK(r.median_rank >= 450);
  CHECK(r.median_rank <= 550);
}

TEST_CASE("worker count does not change ranks") {
  Rng rng(3);
  const Matrix q = random_matrix(rng, 300, 6), c = random_matrix(rng, 300, 6);
  const auto one = median_rank(q, c, iota_n(300), RetrievalDirection::AudioToVideo);
  setenv("CADENZA_THREADS", "3", 1);
  CHECK(worker_count() == 3);
  const auto three = median_rank(q, c, iota_n(300), RetrievalDirection::AudioToVideo);
  unsetenv("CADENZA_THREADS");
  CHECK(worker_count() == 1);
  CHECK(one.per_query_rank == three.per_query_rank);
}

TEST_CASE("table overload pairs by id") {
  Rng rng(4);
  const Matrix m = random_matrix(rng, 3, 4);
  const std::vector<SegmentId> ids = {{"a", 0}, {"b", 0}, {"c", 0}};
  const std::vector<SegmentId> rev = {{"c", 0}, {"b", 0}, {"a", 0}};
  Matrix mr(3, 4);
  mr << m.row(2), m.row(1), m.row(0);
  const auto r = median_rank(table_from(m, ids), table_from(mr, rev), RetrievalDirection::AudioToVideo);
  CHECK(r.per_query_rank == std::vector<std::size_t>{1, 1, 1});
  CHECK_THROWS_AS(median_rank(table_from(m, ids), table_from(m.topRows(2), {{"a", 0}, {"b", 0}}),
                              RetrievalDirection::AudioToVideo),
                  Error);
}

TEST_CASE("AUC examples and identities") {
  const std::vector<double> s = {0.9, 0.8, 0.7, 0.6};
  const std::vector<int> l = {1, 0, 1, 0};
  CHECK(*roc_auc(s, l) == 0.75);
  CHECK(*roc_auc(s, std::vector<int>{1, 1, 0, 0}) == 1.0);
  CHECK_FALSE(roc_auc(s, std::vector<int>{1, 1, 1, 1}).has_value());

  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.below(199);
    std::vector<double> sc(n);
    std::vector<int> lab(n), flipped(n);
    for (std::size_t i = 0; i < n; ++i) {
      sc[i] = std::round(rng.normal() * 4) / 4;  // coarse grid forces ties
      lab[i] = rng.bernoulli(0.4);
      flipped[i] = 1 - lab[i];
    }
    if (std::count(lab.begin(), lab.end(), 1) == 0 || std::count(lab.begin(), lab.end(), 0) == 0) continue;
    const double auc = *roc_auc(sc, lab);
    CHECK(std::abs(auc - oracle::pair_count_auc(sc, lab)) < 1e-12);
    std::vector<double> mono(n);
    for (std::size_t i = 0; i < n; ++i) mono[i] = std::exp(3 * sc[i]) - 7;
    CHECK(std::abs(*roc_auc(mono, lab) - auc) < 1e-12);
  }
  std::vector<double> distinct(100);
  std::vector<int> lab(100), flipped(100);
  for (int i = 0; i < 100; ++i) distinct[i] = rng.normal(), lab[i] = i % 3 == 0, flipped[i] = 1 - lab[i];
  CHECK(*roc_auc(distinct, lab) + *roc_auc(distinct, flipped) == 1.0);
}

TEST_CASE("AUC of independent labels is near one half") {
  Rng rng(6);
  std::vector<double> s(10000);
  std::vector<int> l(10000);
  for (int i = 0; i < 10000; ++i) s[i] = rng.normal(), l[i] = rng.bernoulli(0.3);
  CHECK(std::abs(*roc_auc(s, l) - 0.5) < 0.02);
}

TEST_CASE("F1") {
  CHECK(f1_score(2, 1, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(f1_score(0, 0, 0) == 0.0);
  Matrix p(4, 2), y(4, 2);
  p << 0.9, 0.1, 0.8, 0.2, 0.3, 0.7, 0.6, 0.4;
  y << 1, 0, 1, 0, 0, 1, 0, 0;
  // col 0: tp 2, fp 1, fn 0 -> 0.8; col 1: tp 1 -> 1.0
  CHECK(f1_macro(p, y) == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(f1_macro(y, y) == 1.0);
  CHECK(f1_macro(Matrix::Zero(4, 2), y) == 0.0);
}

TEST_CASE("probe metrics exclude single-class labels") {
  Matrix p(4, 2), y(4, 2);
  p << 0.9, 0.2, 0.1, 0.4, 0.8, 0.6, 0.3, 0.9;
  y << 1, 1, 0, 1, 1, 1, 0, 1;
  const auto m = probe_metrics(p, y, {"x", "always"});
  CHECK(m.per_label_auc.at("x") == 1.0);
  CHECK(m.non_evaluable == std::vector<std::string>{"always"});
  CHECK(m.macro_auc == 1.0);
  const auto json = probe_report_json(m);
  CHECK(json["non_evaluable"][0] == "always");
}

TEST_CASE("track aggregation") {
  Matrix m(4, 2);
  m << 3, 4, 1, 0, 1, 0, -1, 0;
  const auto t = aggregate_tracks(table_from(m, {{"b", 0}, {"a", 1}, {"a", 0}, {"c", 0}}));
  REQUIRE(t.size() == 3);
  CHECK(t[0].video_id == "a");
  CHECK(t[0].vector(0) == doctest::Approx(1.0));
  CHECK(t[1].vector(0) == doctest::Approx(0.6));
  CHECK(t[2].vector(0) == doctest::Approx(-1.0));

  Matrix anti(2, 2);
  anti << 1, 0, -1, 0;
  CHECK_THROWS_AS(aggregate_tracks(table_from(anti, {{"x", 0}, {"x", 1}})), Error);

  Rng rng(7);
  const Matrix r = random_matrix(rng, 6, 5);
  const auto fwd = aggregate_tracks(table_from(r, {{"v", 0}, {"v", 1}, {"v", 2}, {"v", 3}, {"v", 4}, {"v", 5}}));
  Matrix rr = r;
  std::swap_ranges(rr.row(0).begin(), rr.row(0).end(), rr.row(5).begin());
  const auto swapped =
      aggregate_tracks(table_from(rr, {{"v", 5}, {"v", 1}, {"v", 2}, {"v", 3}, {"v", 4}, {"v", 0}}));
  CHECK(fwd[0].vector == swapped[0].vector);
  CHECK(std::abs(fwd[0].vector.norm() - 1.0) < 1e-12);

  const auto multi = aggregate_multimodal(fwd, fwd);
  CHECK(multi[0].vector.size() == 10);
  CHECK(std::abs(multi[0].vector.norm() - 1.0) < 1e-12);
}

TEST_CASE("contrast on identical embeddings") {
  const Matrix same = Matrix::Ones(6, 3);
  const std::vector<std::string> g = {"a", "a", "b", "b", "c", "c"};
  const auto r = similarity_contrast(same, g, {100, 0.99, 1});
  CHECK(r.mean_within == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(r.mean_between == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(r.gap) < 1e-14);
  CHECK(r.within_pairs == 3);
  CHECK(r.between_pairs == 12);
  CHECK_FALSE(r.subsampled);
}

TEST_CASE("closed-form pair sums match a pair loop and singletons are skipped") {
  Rng rng(8);
  const Matrix m = random_matrix(rng, 25, 4);
  std::vector<std::string> g;
  for (int i = 0; i < 24; ++i) g.push_back("g" + std::to_string(i % 5));
  g.push_back("lonely");
  const auto r = similarity_contrast(m, g, {0, 0.99, 0});
  double ws = 0, bs = 0;
  int wn = 0, bn = 0;
  for (int i = 0; i < 24; ++i)
    for (int j = i + 1; j < 24; ++j) {
      const double c = oracle::cosine(m, i, m, j);
      if (g[i] == g[j]) ws += c, ++wn;
      else bs += c, ++bn;
    }
  CHECK(r.mean_within == doctest::Approx(ws / wn).epsilon(1e-12));
  CHECK(r.mean_between == doctest::Approx(bs / bn).epsilon(1e-12));
  CHECK(r.skipped_groups == std::vector<std::string>{"lonely"});
  CHECK(r.n_items == 24);
  CHECK_THROWS_AS(similarity_contrast(m, std::vector<std::string>(25, "one"), {}), Error);
}

TEST_CASE("bootstrap interval brackets a clear gap and is seeded") {
  SynthSpec spec;
  spec.n_videos = 80;
  spec.seed = 2;
  const auto ds = generate_synthetic(spec);
  const auto a = similarity_contrast(ds.audio, ds.manifest, Grouping::SameSong, {300, 0.99, 4});
  const auto b = similarity_contrast(ds.audio, ds.manifest, Grouping::SameSong, {300, 0.99, 4});
  CHECK(a.gap > 0);
  CHECK(a.ci_low > 0);
  CHECK(a.ci_low <= a.gap);
  CHECK(a.ci_high >= a.gap);
  CHECK(a.ci_low == b.ci_low);
  const auto genre = similarity_contrast(ds.audio, ds.manifest, Grouping::SameGenre, {50, 0.99, 4});
  CHECK(genre.n_items == 80);
  CHECK(contrast_report_json(genre)["bootstrap_seed"] == 4);
}

TEST_CASE("top-k retrieval") {
  Matrix m(5, 2);
  m << 1, 0, 0.9, 0.1, 1, 0, 0, 1, 0.7, 0.7;
  const auto pool =
      make_segment_pool(table_from(m, {{"s", 0}, {"s", 1}, {"dup", 0}, {"far", 0}, {"mid", 0}}));
  const std::vector<std::string> seeds = {"s#0"};
  const auto r = retrieve_topk(pool, seeds, 2, RetrievalLevel::Segment);
  REQUIRE(r.results.size() == 1);
  // s#1 belongs to the seed's own video; the exact duplicate comes first.
  CHECK(r.results[0].neighbors[0].key == "dup#0");
  CHECK(r.results[0].neighbors[0].similarity == doctest::Approx(1.0));
  CHECK(r.results[0].neighbors[1].key == "mid#0");
  CHECK_THROWS_AS(retrieve_topk(pool, seeds, 5, RetrievalLevel::Segment), Error);
  CHECK_THROWS_AS(retrieve_topk(pool, std::vector<std::string>{"nope"}, 1, RetrievalLevel::Segment), Error);

  const auto text = retrieval_report_text(r);
  CHECK(text.find("1.0000") != std::string::npos);
  CHECK(retrieval_report_json(r)["results"][0]["neighbors"][1]["similarity"] == 0.7071);
}

TEST_CASE("track retrieval with defaults gives 25 x 3") {
  Rng rng(9);
  std::vector<TrackEmbedding> tracks;
  for (int i = 0; i < 60; ++i) {
    const Vector v = random_matrix(rng, 8, 1);
    tracks.push_back({"t" + std::to_string(i), v / v.norm()});
  }
  const auto pool = make_track_pool(tracks);
  const auto seeds = pick_random_seeds(pool, 25, 11);
  CHECK(seeds == pick_random_seeds(pool, 25, 11));
  const auto r = retrieve_topk(pool, seeds, 3, RetrievalLevel::Track);
  CHECK(r.results.size() == 25);
  for (const auto& s : r.results) {
    CHECK(s.neighbors.size() == 3);
    for (const auto& n : s.neighbors) CHECK(n.key != s.seed);
  }
  const auto again = retrieve_topk(pool, seeds, 3, RetrievalLevel::Track);
  for (std::size_t i = 0; i < 25; ++i)
    for (std::size_t k = 0; k < 3; ++k) CHECK(again.results[i].neighbors[k].key == r.results[i].neighbors[k].key);
}

TEST_CASE("rank report carries pool size and tie rule") {
  const Matrix q = Matrix::Identity(3, 3);
  const auto a = median_rank(q, q, iota_n(3), RetrievalDirection::AudioToVideo);
  const auto v = median_rank(q, q, iota_n(3), RetrievalDirection::VideoToAudio);
  const auto j = rank_report_json(a, v);
  CHECK(j["pool_size"] == 3);
  CHECK(j["tie_rule"] == std::string(kRankTieRule));
  CHECK(rank_report_text(a, v).find("strictly greater") != std::string::npos);
}

TEST_CASE("sha256 of a known string") {
  const auto dir = testing::scratch_dir("sha");
  std::ofstream(dir / "abc") << "abc";
  CHECK(sha256_file((dir / "abc").string()) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
