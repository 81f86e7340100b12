#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include <Eigen/Dense>

#include "cadenza/dataio.hpp"
#include "cadenza/error.hpp"
#include "cadenza/rng.hpp"
#include "support.hpp"

using namespace cadenza;

namespace {

EmbeddingTable small_table(std::size_t videos, std::size_t segs, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  EmbeddingTable t;
  t.dim = dim;
  for (std::size_t v = 0; v < videos; ++v)
    for (std::size_t s = 0; s < segs; ++s) {
      t.ids.push_back({"v" + std::to_string(v), std::uint32_t(s)});
      for (std::size_t d = 0; d < dim; ++d) t.data.push_back(float(rng.normal()));
    }
  return t;
}

Manifest manifest_for(const EmbeddingTable& t, Split split = Split::Train) {
  Manifest m;
  for (const auto& id : t.ids) m.entries.push_back({id.video_id, id.segment_index, split, "rock", {}, 100.0});
  return m;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << bytes;
}

}  // namespace

TEST_CASE("empty table writes a header-only file") {
  const auto dir = testing::scratch_dir("empty_table");
  EmbeddingTable t;
  t.dim = 4;
  write_embeddings(t, dir / "e.mveb");
  CHECK(std::filesystem::file_size(dir / "e.mveb") == 24);
  CHECK(read_embeddings(dir / "e.mveb") == t);
}

TEST_CASE("header layout is little-endian MVEB v1") {
  const auto dir = testing::scratch_dir("header_layout");
  auto t = small_table(2, 3, 5, 1);
  write_embeddings(t, dir / "e.mveb");
  const auto bytes = slurp(dir / "e.mveb");
  REQUIRE(bytes.size() == 24 + 6 * 5 * 4);
  CHECK(bytes.substr(0, 4) == "MVEB");
  std::uint32_t version, dim, reserved;
  std::uint64_t count;
  std::memcpy(&version, bytes.data() + 4, 4);
  std::memcpy(&count, bytes.data() + 8, 8);
  std::memcpy(&dim, bytes.data() + 16, 4);
  std::memcpy(&reserved, bytes.data() + 20, 4);
  CHECK(version == 1);
  CHECK(count == 6);
  CHECK(dim == 5);
  CHECK(reserved == 0);
  float first;
  std::memcpy(&first, bytes.data() + 24, 4);
  CHECK(std::memcmp(&first, &t.data[0], 4) == 0);
  CHECK(slurp(dir / "e.mveb.ids").substr(0, 5) == "v0\t0\n");
}

TEST_CASE("round trip keeps every float bit") {
  const auto dir = testing::scratch_dir("roundtrip");
  auto t = small_table(3, 2, 7, 9);
  t.data[3] = -0.0f;
  t.data[4] = std::numeric_limits<float>::denorm_min();
  t.data[5] = std::numeric_limits<float>::max();
  write_embeddings(t, dir / "r.mveb");
  const auto back = read_embeddings(dir / "r.mveb");
  REQUIRE(back.data.size() == t.data.size());
  CHECK(std::memcmp(back.data.data(), t.data.data(), t.data.size() * 4) == 0);
  CHECK(back.ids == t.ids);
}

TEST_CASE("invalid tables are rejected before writing") {
  const auto dir = testing::scratch_dir("invalid_write");
  auto t = small_table(2, 2, 3, 2);
  t.data[2 * 3 + 1] = std::nanf("");
  try {
    write_embeddings(t, dir / "bad.mveb");
    FAIL("expected validation error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Validation);
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
  CHECK_FALSE(std::filesystem::exists(dir / "bad.mveb"));

  auto dup = small_table(1, 2, 3, 2);
  dup.ids[1] = dup.ids[0];
  CHECK(kind_of([&] { write_embeddings(dup, dir / "dup.mveb"); }) == ErrorKind::Validation);
}

TEST_CASE("corrupt files map to distinct error kinds") {
  const auto dir = testing::scratch_dir("corrupt");
  const auto good = dir / "g.mveb";
  write_embeddings(small_table(2, 2, 4, 3), good);
  const auto bytes = slurp(good);
  const auto path = dir / "c.mveb";
  std::filesystem::copy_file(dir / "g.mveb.ids", dir / "c.mveb.ids");
  auto read_with = [&](std::string b) {
    spit(path, b);
    return kind_of([&] { read_embeddings(path); });
  };

  auto b = bytes;
  b[0] = 'X';
  CHECK(read_with(b) == ErrorKind::BadMagic);
  CHECK(read_with(bytes.substr(0, 10)) == ErrorKind::Truncated);
  CHECK(read_with(bytes.substr(0, bytes.size() - 3)) == ErrorKind::Truncated);
  b = bytes;
  b[4] = 2;
  CHECK(read_with(b) == ErrorKind::VersionMismatch);
  b = bytes;
  const std::uint64_t huge = ~0ULL;
  std::memcpy(b.data() + 8, &huge, 8);
  CHECK(read_with(b) == ErrorKind::Overflow);
  b = bytes;
  b[20] = 1;
  CHECK(read_with(b) == ErrorKind::BadHeader);
  CHECK(read_with(bytes + "xx") == ErrorKind::BadHeader);
  CHECK(kind_of([&] { read_embeddings(dir / "missing.mveb"); }) == ErrorKind::Io);
}

TEST_CASE("assemble pairs shuffled tables and reorders to manifest order") {
  auto audio = small_table(3, 2, 4, 5);
  auto video = small_table(3, 2, 3, 6);
  const auto manifest = manifest_for(audio);
  // Reverse the video rows.
  EmbeddingTable rev;
  rev.dim = video.dim;
  for (std::size_t i = video.count(); i-- > 0;) {
    rev.ids.push_back(video.ids[i]);
    rev.data.insert(rev.data.end(), video.row(i).begin(), video.row(i).end());
  }
  const auto ds = assemble_dataset(audio, rev, manifest);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(ds.audio.ids[i] == ds.video.ids[i]);
    CHECK(ds.audio.ids[i] == ds.manifest.entries[i].id());
  }
  CHECK(ds.video == video);
}

TEST_CASE("assemble lists every unmatched id") {
  auto audio = small_table(2, 3, 4, 5);
  auto video = take_rows(audio, std::vector<std::size_t>{0, 1, 2, 3, 5});
  try {
    assemble_dataset(audio, video, manifest_for(audio));
    FAIL("expected pairing error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Pairing);
    CHECK(std::string(e.what()).find("missing from video table: (v1, 1)") != std::string::npos);
  }
  auto short_manifest = manifest_for(audio);
  short_manifest.entries.pop_back();
  try {
    assemble_dataset(audio, audio, short_manifest);
    FAIL("expected pairing error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("missing from manifest: (v1, 2)") != std::string::npos);
  }
}

TEST_CASE("split consistency is enforced") {
  auto audio = small_table(2, 2, 3, 1);
  auto m = manifest_for(audio);
  m.entries[1].split = Split::Test;
  CHECK(kind_of([&] { assemble_dataset(audio, audio, m); }) == ErrorKind::SplitConsistency);
}

TEST_CASE("manifest round trip through JSON lines") {
  const auto dir = testing::scratch_dir("manifest");
  Manifest m;
  m.entries.push_back({"a\"b", 0, Split::Val, std::nullopt, {"x", "y"}, std::nullopt});
  m.entries.push_back({"ünï", 3, Split::Test, "pop", {}, 12.5});
  write_manifest(m, dir / "m.jsonl");
  CHECK(read_manifest(dir / "m.jsonl") == m);
}

TEST_CASE("splits are by video with 80/10/10 default") {
  std::vector<std::string> ids;
  for (int i = 0; i < 1000; ++i) ids.push_back("v" + std::to_string(i));
  const auto s = assign_splits(ids, {}, 4);
  std::map<Split, int> counts;
  for (const auto& [_, split] : s) ++counts[split];
  CHECK(counts[Split::Train] == 800);
  CHECK(counts[Split::Val] == 100);
  CHECK(counts[Split::Test] == 100);
  CHECK(assign_splits(ids, {}, 4) == s);
}

TEST_CASE("top tags") {
  Manifest m;
  auto add = [&](const std::string& vid, std::vector<std::string> tags, Split split = Split::Train) {
    for (std::uint32_t s = 0; s < 2; ++s) m.entries.push_back({vid, s, split, std::nullopt, tags, std::nullopt});
  };
  for (int i = 0; i < 5; ++i) add("a" + std::to_string(i), {"a"});
  for (int i = 0; i < 3; ++i) add("b" + std::to_string(i), {"b"});
  add("c0", {"c"});
  for (int i = 0; i < 9; ++i) add("t" + std::to_string(i), {"c"}, Split::Test);
  CHECK(select_top_tags(m, 2) == std::vector<std::string>{"a", "b"});

  Manifest tie;
  for (int i = 0; i < 3; ++i) {
    tie.entries.push_back({"x" + std::to_string(i), 0, Split::Train, std::nullopt, {"b"}, std::nullopt});
    tie.entries.push_back({"y" + std::to_string(i), 0, Split::Train, std::nullopt, {"a"}, std::nullopt});
  }
  CHECK(select_top_tags(tie, 1) == std::vector<std::string>{"a"});
  CHECK(kind_of([&] { select_top_tags(tie, 3); }) == ErrorKind::Validation);
}

TEST_CASE("top 10 of 12 synthetic tags agree with an independent count") {
  SynthSpec spec;
  spec.n_videos = 300;
  spec.seed = 8;
  const auto ds = generate_synthetic(spec);
  std::map<std::string, std::set<std::string>> videos_by_tag;
  for (const auto& e : ds.manifest.entries)
    if (e.split == Split::Train)
      for (const auto& t : e.tags) videos_by_tag[t].insert(e.video_id);
  std::vector<std::pair<int, std::string>> ranked;
  for (const auto& [tag, vids] : videos_by_tag) ranked.push_back({-int(vids.size()), tag});
  std::sort(ranked.begin(), ranked.end());
  std::vector<std::string> expected;
  for (int i = 0; i < 10; ++i) expected.push_back(ranked[i].second);
  CHECK(select_top_tags(ds.manifest) == expected);
}

TEST_CASE("synthetic generator") {
  SynthSpec spec;
  spec.seed = 12;
  const auto a = generate_synthetic(spec);
  CHECK(a.size() == 600);
  CHECK(a == generate_synthetic(spec));
  a.validate();
  a.manifest.check_split_consistency();

  SUBCASE("invalid rho") {
    spec.cross_modal_correlation = 1.5;
    CHECK(kind_of([&] { generate_synthetic(spec); }) == ErrorKind::Config);
  }
  SUBCASE("rho 1 without noise ties video to audio by a fixed linear map") {
    spec.cross_modal_correlation = 1.0;
    spec.noise_sigma = 0.0;
    const auto ds = generate_synthetic(spec);
    Eigen::MatrixXd A(ds.size(), ds.audio.dim), V(ds.size(), ds.video.dim);
    for (std::size_t r = 0; r < ds.size(); ++r) {
      for (std::size_t c = 0; c < ds.audio.dim; ++c) A(r, c) = ds.audio.row(r)[c];
      for (std::size_t c = 0; c < ds.video.dim; ++c) V(r, c) = ds.video.row(r)[c];
    }
    const Eigen::MatrixXd W = A.colPivHouseholderQr().solve(V);
    const double rel = (A * W - V).norm() / V.norm();
    CHECK(rel < 1e-5);
  }
  SUBCASE("rho 0 decorrelates matched coordinates") {
    spec.cross_modal_correlation = 0.0;
    spec.n_videos = 1000;
    spec.segments_per_video = 5;
    spec.audio_dim = spec.video_dim = 8;
    const auto ds = generate_synthetic(spec);
    const std::size_t n = ds.size();
    REQUIRE(n == 5000);
    for (std::size_t c = 0; c < 8; ++c) {
      double ma = 0, mv = 0;
      for (std::size_t r = 0; r < n; ++r) ma += ds.audio.row(r)[c], mv += ds.video.row(r)[c];
      ma /= n, mv /= n;
      double sab = 0, saa = 0, svv = 0;
      for (std::size_t r = 0; r < n; ++r) {
        const double x = ds.audio.row(r)[c] - ma, y = ds.video.row(r)[c] - mv;
        sab += x * y, saa += x * x, svv += y * y;
      }
      CHECK(std::abs(sab / std::sqrt(saa * svv)) < 0.05);
    }
  }
}

TEST_CASE("dataset directory round trip") {
  const auto dir = testing::scratch_dir("dataset_dir");
  SynthSpec spec;
  spec.n_videos = 10;
  const auto ds = generate_synthetic(spec);
  write_dataset(ds, dir);
  CHECK(assemble_dataset(DatasetPaths::in(dir)) == ds);
}
