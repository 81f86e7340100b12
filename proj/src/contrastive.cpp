#include "cadenza/contrastive.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "cadenza/error.hpp"

namespace cadenza {

std::string_view to_string(NegativeSet set) {
  return set == NegativeSet::Standard ? "standard" : "paper-literal";
}

NegativeSet parse_negative_set(std::string_view text) {
  if (text == "standard" || text == "standard_include_positive") return NegativeSet::Standard;
  if (text == "paper-literal" || text == "paper_literal" || text == "paper_literal_exclude_positive") {
    return NegativeSet::PaperLiteral;
  }
  throw Error(ErrorKind::Config, "unknown negative set '" + std::string(text) + "'");
}

void LossConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorKind::Config, "temperature must be positive");
  }
}

Matrix similarity_matrix(const Matrix& audio, const Matrix& video) {
  if (audio.rows() != video.rows() || audio.cols() != video.cols()) {
    throw Error(ErrorKind::Shape, "audio and video batches must have equal shapes");
  }
  return l2_normalize_rows(audio) * l2_normalize_rows(video).transpose();
}

namespace {

// Softmax weights over logits[k] (k != skip) and the log-sum-exp.
double softmax_excluding(const Eigen::Ref<const Vector>& logits, Eigen::Index skip, Vector& weights) {
  double max = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < logits.size(); ++k)
    if (k != skip) max = std::max(max, logits(k));
  weights.resize(logits.size());
  double sum = 0.0;
  for (Eigen::Index k = 0; k < logits.size(); ++k) {
    weights(k) = k == skip ? 0.0 : std::exp(logits(k) - max);
    sum += weights(k);
  }
  weights /= sum;
  return max + std::log(sum);
}

struct Evaluated {
  LossValue value;
  Matrix grad_similarity;
};

Evaluated evaluate(const Matrix& s, const LossConfig& cfg) {
  cfg.validate();
  if (s.rows() != s.cols()) throw Error(ErrorKind::Shape, "similarity matrix must be square");
  const Eigen::Index beta = s.rows();
  if (beta < 1 || (cfg.negative_set == NegativeSet::PaperLiteral && beta < 2)) {
    throw Error(ErrorKind::Shape, "batch of " + std::to_string(beta) +
                                      " leaves the excluded-positive denominator empty");
  }
  const double tau = cfg.temperature;
  const double inv_beta = 1.0 / static_cast<double>(beta);
  const bool exclude = cfg.negative_set == NegativeSet::PaperLiteral;

  Evaluated out;
  out.grad_similarity = Matrix::Zero(beta, beta);
  auto& v = out.value;
  v.video_to_audio_terms.resize(beta);
  v.audio_to_video_terms.resize(beta);
  Vector w;
  const Matrix logits = s / tau;
  for (Eigen::Index j = 0; j < beta; ++j) {
    const Eigen::Index skip = exclude ? j : -1;

    const double lse_row = softmax_excluding(logits.row(j).transpose(), skip, w);
    v.video_to_audio_terms[j] = lse_row - logits(j, j);
    out.grad_similarity.row(j) += (inv_beta / tau) * w.transpose();
    out.grad_similarity(j, j) -= inv_beta / tau;

    const double lse_col = softmax_excluding(logits.col(j), skip, w);
    v.audio_to_video_terms[j] = lse_col - logits(j, j);
    out.grad_similarity.col(j) += (inv_beta / tau) * w;
    out.grad_similarity(j, j) -= inv_beta / tau;
  }
  for (Eigen::Index j = 0; j < beta; ++j) {
    v.video_to_audio += v.video_to_audio_terms[j];
    v.audio_to_video += v.audio_to_video_terms[j];
  }
  v.video_to_audio *= inv_beta;
  v.audio_to_video *= inv_beta;
  v.loss = v.audio_to_video + v.video_to_audio;
  return out;
}

// Chain rule through x / ||x|| row by row.
Matrix through_normalization(const Matrix& raw, const Matrix& unit, const Matrix& grad_unit) {
  Matrix g(raw.rows(), raw.cols());
  for (Eigen::Index r = 0; r < raw.rows(); ++r) {
    const double norm = raw.row(r).norm();
    const double proj = unit.row(r).dot(grad_unit.row(r));
    g.row(r) = (grad_unit.row(r) - proj * unit.row(r)) / norm;
  }
  return g;
}

}  // namespace

LossValue contrastive_loss(const Matrix& similarity, const LossConfig& cfg) {
  return evaluate(similarity, cfg).value;
}

LossGradient contrastive_loss_backward(const Matrix& audio, const Matrix& video, const LossConfig& cfg) {
  if (audio.rows() != video.rows() || audio.cols() != video.cols()) {
    throw Error(ErrorKind::Shape, "audio and video batches must have equal shapes");
  }
  const Matrix a = l2_normalize_rows(audio);
  const Matrix v = l2_normalize_rows(video);
  auto ev = evaluate(a * v.transpose(), cfg);
  LossGradient out;
  out.grad_audio = through_normalization(audio, a, ev.grad_similarity * v);
  out.grad_video = through_normalization(video, v, ev.grad_similarity.transpose() * a);
  out.value = std::move(ev.value);
  return out;
}

}  // namespace cadenza
