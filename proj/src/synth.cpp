#include <algorithm>
#include <cmath>
#include <cstdio>

#include <Eigen/Dense>

#include "cadenza/dataio.hpp"
#include "cadenza/error.hpp"
#include "cadenza/rng.hpp"

namespace cadenza {

void SynthSpec::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorKind::Config, std::string("synth spec: ") + what);
  };
  require(n_videos > 0, "n_videos must be positive");
  require(segments_per_video > 0, "segments_per_video must be positive");
  require(latent_dim > 0 && audio_dim > 0 && video_dim > 0, "dimensions must be positive");
  require(cross_modal_correlation >= 0.0 && cross_modal_correlation <= 1.0,
          "cross_modal_correlation must lie in [0, 1]");
  require(noise_sigma >= 0.0, "noise_sigma must be non-negative");
  require(segment_jitter >= 0.0, "segment_jitter must be non-negative");
  require(n_genres > 0 && n_tags > 0, "n_genres and n_tags must be positive");
  require(splits.train >= 0.0 && splits.val >= 0.0 && splits.train + splits.val <= 1.0,
          "split fractions must be non-negative and sum to at most 1");
}

namespace {

Eigen::MatrixXd gaussian(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = scale * rng.normal();
  return m;
}

Eigen::VectorXd gaussian(Rng& rng, std::size_t n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
  return v;
}

std::string numbered(const char* prefix, std::size_t i, int width) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
  return buf;
}

}  // namespace

PairedDataset generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  auto rng = stream(spec.seed, streams::kSynth);
  const double rho = spec.cross_modal_correlation;
  const double latent_scale = 1.0 / std::sqrt(static_cast<double>(spec.latent_dim));

  const Eigen::MatrixXd audio_proj = gaussian(rng, spec.audio_dim, spec.latent_dim, latent_scale);
  const Eigen::MatrixXd video_proj = gaussian(rng, spec.video_dim, spec.latent_dim, latent_scale);
  const Eigen::MatrixXd genre_dirs = gaussian(rng, spec.n_genres, spec.latent_dim, 1.0);
  const Eigen::MatrixXd tag_dirs = gaussian(rng, spec.n_tags, spec.latent_dim, 1.0);

  std::vector<std::string> video_ids;
  for (std::size_t v = 0; v < spec.n_videos; ++v) video_ids.push_back(numbered("vid", v, 6));
  const auto splits = assign_splits(video_ids, spec.splits, spec.seed);

  PairedDataset ds;
  ds.audio.dim = spec.audio_dim;
  ds.video.dim = spec.video_dim;
  const std::size_t rows = spec.n_videos * spec.segments_per_video;
  ds.audio.data.reserve(rows * spec.audio_dim);
  ds.video.data.reserve(rows * spec.video_dim);

  for (std::size_t v = 0; v < spec.n_videos; ++v) {
    const Eigen::VectorXd video_latent = gaussian(rng, spec.latent_dim);

    Eigen::Index genre = 0;
    (genre_dirs * video_latent).maxCoeff(&genre);
    // Tag t fires when the latent projects past a per-tag quantile, so tag
    // frequencies decrease with t (roughly 70% down to 7%).
    std::vector<std::string> tags;
    for (std::size_t t = 0; t < spec.n_tags; ++t) {
      const double q = spec.n_tags == 1 ? 0.0 : -0.5 + 2.0 * double(t) / double(spec.n_tags - 1);
      const auto dir = tag_dirs.row(static_cast<Eigen::Index>(t));
      if (dir.dot(video_latent) / dir.norm() > q) tags.push_back(numbered("tag_", t, 2));
    }
    const double duration = std::max(30.0, 218.0 + 65.0 * rng.normal());

    for (std::size_t s = 0; s < spec.segments_per_video; ++s) {
      const Eigen::VectorXd shared = video_latent + spec.segment_jitter * gaussian(rng, spec.latent_dim);
      const Eigen::VectorXd audio_private = gaussian(rng, spec.latent_dim);
      const Eigen::VectorXd video_private = gaussian(rng, spec.latent_dim);
      const Eigen::VectorXd audio =
          audio_proj * (rho * shared + (1.0 - rho) * audio_private) +
          spec.noise_sigma * gaussian(rng, spec.audio_dim);
      const Eigen::VectorXd video =
          video_proj * (rho * shared + (1.0 - rho) * video_private) +
          spec.noise_sigma * gaussian(rng, spec.video_dim);

      const SegmentId id{video_ids[v], static_cast<std::uint32_t>(s)};
      ds.audio.ids.push_back(id);
      ds.video.ids.push_back(id);
      for (double x : audio) ds.audio.data.push_back(static_cast<float>(x));
      for (double x : video) ds.video.data.push_back(static_cast<float>(x));

      ManifestEntry e;
      e.video_id = id.video_id;
      e.segment_index = id.segment_index;
      e.split = splits.at(id.video_id);
      e.genre = numbered("genre_", static_cast<std::size_t>(genre), 2);
      e.tags = tags;
      e.duration_s = std::round(duration * 1000.0) / 1000.0;
      ds.manifest.entries.push_back(std::move(e));
    }
  }
  return ds;
}

}  // namespace cadenza
