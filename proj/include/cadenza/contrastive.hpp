#pragma once

#include <string_view>
#include <vector>

#include "cadenza/neuralcore.hpp"

namespace cadenza {

// Standard InfoNCE keeps the positive pair in the softmax denominator;
// PaperLiteral sums only over k != j, so per-term losses can go negative.
enum class NegativeSet { Standard, PaperLiteral };

std::string_view to_string(NegativeSet set);
NegativeSet parse_negative_set(std::string_view text);

struct LossConfig {
  double temperature = 1.0;
  NegativeSet negative_set = NegativeSet::Standard;

  void validate() const;
};

// S(j, k) = cos(a_j, v_k).
Matrix similarity_matrix(const Matrix& audio, const Matrix& video);

struct LossValue {
  double loss = 0.0;            // mean over j of (a->v + v->a)
  double audio_to_video = 0.0;  // mean a->v term
  double video_to_audio = 0.0;  // mean v->a term
  // v->a term j ranks the video candidates v_k against audio anchor a_j
  // (row j of S); the a->v term ranks a_k against v_j (column j).
  std::vector<double> video_to_audio_terms;
  std::vector<double> audio_to_video_terms;
};

LossValue contrastive_loss(const Matrix& similarity, const LossConfig& cfg);

struct LossGradient {
  LossValue value;
  Matrix grad_audio;  // w.r.t. raw, unnormalized embeddings
  Matrix grad_video;
};

LossGradient contrastive_loss_backward(const Matrix& audio, const Matrix& video, const LossConfig& cfg);

}  // namespace cadenza
