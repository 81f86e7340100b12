#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "cadenza/dataio.hpp"
#include "cadenza/eval.hpp"
#include "cadenza/neuralcore.hpp"
#include "cadenza/training.hpp"

namespace cadenza {

enum class ProbeTask { MultilabelTags, Genre };
std::string_view to_string(ProbeTask task);
ProbeTask parse_probe_task(std::string_view text);

struct ProbeConfig {
  std::vector<std::size_t> hidden = {512, 256};
  double dropout = 0.3;
  std::size_t top_k = 10;
  double threshold = 0.5;
  TrainConfig train;
};

nlohmann::json to_json(const ProbeConfig& cfg);
void apply_json(const nlohmann::json& j, ProbeConfig& cfg);

// Per-task loss on logits: mean BCE for tags, softmax cross-entropy for genre.
LossAndGrad probe_loss(const Matrix& logits, const Matrix& targets, ProbeTask task);
// Sigmoid (tags) or softmax (genre) of the logits.
Matrix probe_probabilities(const Mlp& probe, const Matrix& features, ProbeTask task);

struct ProbeResult {
  Mlp model;  // best-validation weights
  TrainHistory history;
};

// in -> hidden... -> out perceptron trained with the contrastive trainer's
// schedule and early-stopping rule. Targets are 0/1 (tags) or one-hot (genre).
ProbeResult train_probe(const Matrix& train_x, const Matrix& train_y, const Matrix& val_x, const Matrix& val_y,
                        ProbeTask task, const ProbeConfig& cfg);

enum class FeatureSource {
  ContrastiveAudio,
  ContrastiveVideo,
  ContrastiveAgg,
  BackboneAudio,
  BackboneVideo,
  BackboneConcat,
};
std::string_view to_string(FeatureSource source);
FeatureSource parse_feature_source(std::string_view text);
bool needs_heads(FeatureSource source);

// Row-aligned with the dataset. Contrastive sources require heads.
EmbeddingTable build_features(const PairedDataset& dataset, FeatureSource source, const DualHeads* heads);

struct ProbeLabels {
  std::vector<std::string> names;
  Matrix targets;  // one row per dataset row
};

// Tags: the top-k train tags. Genre: one-hot over the sorted genre names.
ProbeLabels build_labels(const PairedDataset& dataset, ProbeTask task, std::size_t top_k);

struct ProbeRun {
  ProbeResult result;
  ProbeMetrics metrics;  // on test videos, segment probabilities averaged per video
  std::vector<std::string> label_names;
  std::size_t feature_dim = 0;
  std::size_t test_videos = 0;
};

ProbeRun run_probe(const PairedDataset& dataset, const EmbeddingTable& features, const ProbeLabels& labels,
                   ProbeTask task, const ProbeConfig& cfg);

}  // namespace cadenza
