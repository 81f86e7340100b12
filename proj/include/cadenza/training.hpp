#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cadenza/contrastive.hpp"
#include "cadenza/dataio.hpp"
#include "cadenza/neuralcore.hpp"

namespace cadenza {

enum class HeadMode { Dual, SingleVideoToAudio };
enum class InitMode { Glorot, Autoencoder };

struct ModelConfig {
  std::size_t audio_in = 1506;
  std::size_t video_in = 512;
  std::size_t hidden = 512;
  std::size_t embed = 256;
  std::size_t n_layers = 2;
  HeadMode head_mode = HeadMode::Dual;
  double tau = 1.0;
  NegativeSet negative_set = NegativeSet::Standard;
  InitMode init = InitMode::Glorot;
  double dropout = 0.3;

  void validate() const;
  LossConfig loss() const { return {tau, negative_set}; }
  MlpSpec audio_head_spec() const;
  // In single-head mode the video head maps onto the raw audio feature space.
  MlpSpec video_head_spec() const;
};

// Experiment-1 rows: base, embed512, four-layers, single-head, tau03, ae-init.
inline constexpr std::array<std::string_view, 6> kVariants = {
    "base", "embed512", "four-layers", "single-head", "tau03", "ae-init"};
ModelConfig variant_config(std::string_view name, ModelConfig base = {});

struct TrainConfig {
  std::size_t batch_size = 1000;
  double lr0 = 0.01;
  double lr_gamma = 0.95;
  std::size_t patience_epochs = 3;
  std::size_t max_epochs = 200;
  std::uint64_t seed = 0;

  void validate() const;
};

// lr0 * gamma^epoch, stepped once per epoch.
double lr_at(std::size_t epoch, const TrainConfig& cfg);

// Flat JSON objects whose keys mirror the field names; unknown keys throw.
nlohmann::json to_json(const ModelConfig& cfg);
nlohmann::json to_json(const TrainConfig& cfg);
void apply_json(const nlohmann::json& j, ModelConfig& cfg);
void apply_json(const nlohmann::json& j, TrainConfig& cfg);

// "Does not decrease" means no strict improvement over the best so far.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  // Returns true when val_loss is a new best.
  bool update(double val_loss);
  bool should_stop() const { return epochs_since_improvement_ >= patience_; }
  double best() const { return best_; }
  std::size_t epochs_since_improvement() const { return epochs_since_improvement_; }

 private:
  std::size_t patience_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t epochs_since_improvement_ = 0;
  bool seeded_ = false;
};

struct DualHeads {
  ModelConfig config;
  std::optional<Mlp> audio;  // absent in single-head mode (identity path)
  Mlp video;

  Matrix embed_audio(const Matrix& features) const;
  Matrix embed_video(const Matrix& features) const;
};

DualHeads init_heads(const ModelConfig& cfg, std::uint64_t seed);

struct EpochRecord {
  std::size_t epoch = 0;  // 0 is the untrained model
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;  // learning rate used during this epoch (0 for epoch 0)
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  bool early_stopped = false;

  // Header "epoch,train_loss,val_loss,lr"; values with 17 significant digits.
  std::string to_csv() const;
};

struct ContrastiveResult {
  DualHeads heads;  // best-validation checkpoint
  TrainHistory history;
};

// SGD over constrained batches of the train split; validation on the val
// split in eval mode after every epoch; early stopping on the total loss.
ContrastiveResult train_contrastive(const PairedDataset& dataset, const ModelConfig& mcfg,
                                    const TrainConfig& tcfg);
// Continues from the given heads instead of a fresh initialization.
ContrastiveResult train_contrastive(const PairedDataset& dataset, const TrainConfig& tcfg,
                                    DualHeads initial);

Matrix to_matrix(const EmbeddingTable& table);
Matrix to_matrix(const EmbeddingTable& table, std::span<const std::size_t> rows);
EmbeddingTable to_table(const Matrix& m, std::vector<SegmentId> ids);

struct LossAndGrad {
  double loss = 0.0;
  Matrix grad;
};

// Squared reconstruction error: per-row squared L2 distance, averaged over rows.
LossAndGrad mse_loss(const Matrix& prediction, const Matrix& target);
// Mean binary cross-entropy over all elements, computed from logits.
LossAndGrad bce_with_logits(const Matrix& logits, const Matrix& targets);
// Mean over rows of -log softmax(logits)[class]; targets are one-hot rows.
LossAndGrad softmax_cross_entropy(const Matrix& logits, const Matrix& targets);

struct AutoencoderResult {
  Mlp encoder;
  Mlp decoder;
  std::vector<double> loss_history;  // full-data eval-mode MSE, entry 0 before training
};

// Decoder mirrors the encoder dims with ReLU hidden layers and an identity
// output; loss is the row-averaged squared reconstruction error. Batches are plain
// shuffles of the rows; early stopping watches the full-data loss.
AutoencoderResult train_autoencoder(const Matrix& data, const MlpSpec& encoder, const TrainConfig& tcfg);
AutoencoderResult train_autoencoder(const EmbeddingTable& table, const MlpSpec& encoder,
                                    const TrainConfig& tcfg);

enum class Modality { Audio, Video };

// Eval-mode embeddings; in single-head mode audio rows are copied verbatim.
EmbeddingTable embed_dataset(const DualHeads& heads, const EmbeddingTable& table, Modality modality);

struct Checkpoint;
Checkpoint to_checkpoint(const DualHeads& heads);
// Throws Error(Shape) when a head is missing or disagrees with the stored config.
DualHeads heads_from_checkpoint(const Checkpoint& checkpoint);

}  // namespace cadenza
