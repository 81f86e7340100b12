#include "cadenza/training.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "cadenza/checkpoint.hpp"
#include "cadenza/error.hpp"
#include "cadenza/rng.hpp"
#include "cadenza/sampling.hpp"

namespace cadenza {

using nlohmann::json;

void ModelConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorKind::Config, std::string("model config: ") + what);
  };
  require(audio_in > 0 && video_in > 0 && hidden > 0 && embed > 0, "dimensions must be positive");
  require(n_layers >= 1, "n_layers must be at least 1");
  require(tau > 0.0 && std::isfinite(tau), "tau must be positive");
  require(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
}

namespace {

std::vector<std::size_t> head_dims(std::size_t in, std::size_t hidden, std::size_t n_layers,
                                   std::size_t out) {
  std::vector<std::size_t> dims{in};
  for (std::size_t i = 1; i < n_layers; ++i) dims.push_back(hidden);
  dims.push_back(out);
  return dims;
}

}  // namespace

MlpSpec ModelConfig::audio_head_spec() const {
  return {head_dims(audio_in, hidden, n_layers, embed), Activation::Relu, Activation::Sigmoid, dropout};
}

MlpSpec ModelConfig::video_head_spec() const {
  if (head_mode == HeadMode::SingleVideoToAudio) {
    return {head_dims(video_in, hidden, n_layers, audio_in), Activation::Relu, Activation::Identity,
            dropout};
  }
  return {head_dims(video_in, hidden, n_layers, embed), Activation::Relu, Activation::Sigmoid, dropout};
}

ModelConfig variant_config(std::string_view name, ModelConfig base) {
  if (name == "base") return base;
  if (name == "embed512") {
    base.embed = 512;
  } else if (name == "four-layers") {
    base.n_layers = 4;
  } else if (name == "single-head") {
    base.head_mode = HeadMode::SingleVideoToAudio;
  } else if (name == "tau03") {
    base.tau = 0.3;
  } else if (name == "ae-init") {
    base.init = InitMode::Autoencoder;
  } else {
    throw Error(ErrorKind::Config, "unknown variant '" + std::string(name) + "'");
  }
  return base;
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorKind::Config, std::string("train config: ") + what);
  };
  require(batch_size >= 2, "batch_size must be at least 2");
  require(lr0 > 0.0 && std::isfinite(lr0), "lr0 must be positive");
  require(lr_gamma > 0.0 && lr_gamma <= 1.0, "lr_gamma must lie in (0, 1]");
  require(patience_epochs >= 1, "patience_epochs must be at least 1");
}

double lr_at(std::size_t epoch, const TrainConfig& cfg) {
  return cfg.lr0 * std::pow(cfg.lr_gamma, static_cast<double>(epoch));
}

json to_json(const ModelConfig& c) {
  return json{{"audio_in", c.audio_in},
              {"video_in", c.video_in},
              {"hidden", c.hidden},
              {"embed", c.embed},
              {"n_layers", c.n_layers},
              {"head_mode", c.head_mode == HeadMode::Dual ? "dual" : "single_video_to_audio"},
              {"tau", c.tau},
              {"negative_set", std::string(to_string(c.negative_set))},
              {"init", c.init == InitMode::Glorot ? "glorot" : "autoencoder"},
              {"dropout", c.dropout}};
}

json to_json(const TrainConfig& c) {
  return json{{"batch_size", c.batch_size}, {"lr0", c.lr0},
              {"lr_gamma", c.lr_gamma},     {"patience_epochs", c.patience_epochs},
              {"max_epochs", c.max_epochs}, {"seed", c.seed}};
}

void apply_json(const json& j, ModelConfig& c) {
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "audio_in") c.audio_in = value.get<std::size_t>();
      else if (key == "video_in") c.video_in = value.get<std::size_t>();
      else if (key == "hidden") c.hidden = value.get<std::size_t>();
      else if (key == "embed") c.embed = value.get<std::size_t>();
      else if (key == "n_layers") c.n_layers = value.get<std::size_t>();
      else if (key == "tau") c.tau = value.get<double>();
      else if (key == "dropout") c.dropout = value.get<double>();
      else if (key == "negative_set") c.negative_set = parse_negative_set(value.get<std::string>());
      else if (key == "head_mode") {
        const auto v = value.get<std::string>();
        if (v == "dual") c.head_mode = HeadMode::Dual;
        else if (v == "single_video_to_audio") c.head_mode = HeadMode::SingleVideoToAudio;
        else throw Error(ErrorKind::Config, "unknown head_mode '" + v + "'");
      } else if (key == "init") {
        const auto v = value.get<std::string>();
        if (v == "glorot") c.init = InitMode::Glorot;
        else if (v == "autoencoder") c.init = InitMode::Autoencoder;
        else throw Error(ErrorKind::Config, "unknown init '" + v + "'");
      } else {
        throw Error(ErrorKind::Config, "unknown model config key '" + key + "'");
      }
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Config, "model config key '" + key + "': " + e.what());
    }
  }
}

void apply_json(const json& j, TrainConfig& c) {
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "batch_size") c.batch_size = value.get<std::size_t>();
      else if (key == "lr0") c.lr0 = value.get<double>();
      else if (key == "lr_gamma") c.lr_gamma = value.get<double>();
      else if (key == "patience_epochs") c.patience_epochs = value.get<std::size_t>();
      else if (key == "max_epochs") c.max_epochs = value.get<std::size_t>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else throw Error(ErrorKind::Config, "unknown train config key '" + key + "'");
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Config, "train config key '" + key + "': " + e.what());
    }
  }
}

bool EarlyStopping::update(double val_loss) {
  if (!seeded_ || val_loss < best_) {
    seeded_ = true;
    best_ = val_loss;
    epochs_since_improvement_ = 0;
    return true;
  }
  ++epochs_since_improvement_;
  return false;
}

Matrix DualHeads::embed_audio(const Matrix& features) const {
  return audio ? predict(*audio, features) : features;
}

Matrix DualHeads::embed_video(const Matrix& features) const { return predict(video, features); }

DualHeads init_heads(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  DualHeads heads;
  heads.config = cfg;
  if (cfg.head_mode == HeadMode::Dual) {
    heads.audio = init_mlp(cfg.audio_head_spec(), derive_seed(seed, streams::kInit, 0));
  }
  heads.video = init_mlp(cfg.video_head_spec(), derive_seed(seed, streams::kInit, 1));
  return heads;
}

std::string TrainHistory::to_csv() const {
  std::string out = "epoch,train_loss,val_loss,lr\n";
  for (const auto& e : epochs) {
    out += fmt::format("{},{:.17g},{:.17g},{:.17g}\n", e.epoch, e.train_loss, e.val_loss, e.lr);
  }
  return out;
}

Matrix to_matrix(const EmbeddingTable& table) {
  Matrix m(static_cast<Eigen::Index>(table.count()), static_cast<Eigen::Index>(table.dim));
  for (std::size_t r = 0; r < table.count(); ++r) {
    const auto row = table.row(r);
    for (std::size_t c = 0; c < table.dim; ++c) m(Eigen::Index(r), Eigen::Index(c)) = row[c];
  }
  return m;
}

Matrix to_matrix(const EmbeddingTable& table, std::span<const std::size_t> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(table.dim));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto row = table.row(rows[i]);
    for (std::size_t c = 0; c < table.dim; ++c) m(Eigen::Index(i), Eigen::Index(c)) = row[c];
  }
  return m;
}

EmbeddingTable to_table(const Matrix& m, std::vector<SegmentId> ids) {
  if (static_cast<std::size_t>(m.rows()) != ids.size()) {
    throw Error(ErrorKind::Shape, "matrix rows and id count differ");
  }
  EmbeddingTable t;
  t.dim = static_cast<std::size_t>(m.cols());
  t.ids = std::move(ids);
  t.data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) t.data.push_back(static_cast<float>(m(r, c)));
  return t;
}

LossAndGrad mse_loss(const Matrix& prediction, const Matrix& target) {
  if (prediction.rows() != target.rows() || prediction.cols() != target.cols()) {
    throw Error(ErrorKind::Shape, "mse: prediction and target shapes differ");
  }
  const Matrix diff = prediction - target;
  const double n = static_cast<double>(diff.rows());
  return {diff.squaredNorm() / n, (2.0 / n) * diff};
}

LossAndGrad bce_with_logits(const Matrix& logits, const Matrix& targets) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols()) {
    throw Error(ErrorKind::Shape, "bce: logits and targets shapes differ");
  }
  const double n = static_cast<double>(logits.size());
  LossAndGrad out;
  out.grad.resize(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      const double z = logits(r, c), y = targets(r, c);
      // log(1 + e^z) - y z, written to avoid overflow.
      out.loss += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
      out.grad(r, c) = (1.0 / (1.0 + std::exp(-z)) - y) / n;
    }
  }
  out.loss /= n;
  return out;
}

LossAndGrad softmax_cross_entropy(const Matrix& logits, const Matrix& targets) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols()) {
    throw Error(ErrorKind::Shape, "cross-entropy: logits and targets shapes differ");
  }
  const double n = static_cast<double>(logits.rows());
  LossAndGrad out;
  out.grad.resize(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double max = logits.row(r).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(r).array() - max).exp().matrix();
    const double sum = e.sum();
    const double lse = max + std::log(sum);
    out.loss += targets.row(r).sum() * lse - targets.row(r).dot(logits.row(r));
    out.grad.row(r) = (targets.row(r).sum() * e / sum - targets.row(r)) / n;
  }
  out.loss /= n;
  return out;
}

namespace {

void require_finite(double loss, std::size_t epoch, std::size_t step) {
  if (!std::isfinite(loss)) {
    throw Error(ErrorKind::Divergence,
                fmt::format("non-finite loss at epoch {} step {}", epoch, step));
  }
}

std::vector<std::string> row_video_ids(const PairedDataset& ds) {
  std::vector<std::string> ids;
  ids.reserve(ds.size());
  for (const auto& e : ds.manifest.entries) ids.push_back(e.video_id);
  return ids;
}

std::size_t distinct_videos(const PairedDataset& ds, std::span<const std::size_t> rows) {
  std::set<std::string_view> v;
  for (auto r : rows) v.insert(ds.manifest.entries[r].video_id);
  return v.size();
}

// Eval-mode total loss over a fixed batch plan, weighted by batch size.
double evaluate_contrastive(const DualHeads& heads, const PairedDataset& ds, const BatchPlan& plan) {
  const auto cfg = heads.config.loss();
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& batch : plan.batches) {
    if (batch.size() < 2) continue;
    const Matrix ea = heads.embed_audio(to_matrix(ds.audio, batch));
    const Matrix ev = heads.embed_video(to_matrix(ds.video, batch));
    total += contrastive_loss(similarity_matrix(ea, ev), cfg).loss * static_cast<double>(batch.size());
    count += batch.size();
  }
  return count ? total / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN();
}

constexpr std::uint64_t kFixedPlanIndex = 0xffffffffULL;

}  // namespace

ContrastiveResult train_contrastive(const PairedDataset& dataset, const ModelConfig& mcfg,
                                    const TrainConfig& tcfg) {
  mcfg.validate();
  tcfg.validate();
  auto heads = init_heads(mcfg, tcfg.seed);
  if (mcfg.init == InitMode::Autoencoder) {
    const auto train_rows = dataset.rows_in(Split::Train);
    if (heads.audio) {
      heads.audio = train_autoencoder(to_matrix(dataset.audio, train_rows), mcfg.audio_head_spec(), tcfg).encoder;
    }
    TrainConfig video_cfg = tcfg;
    video_cfg.seed = derive_seed(tcfg.seed, "autoencoder-video");
    heads.video = train_autoencoder(to_matrix(dataset.video, train_rows), mcfg.video_head_spec(), video_cfg).encoder;
  }
  return train_contrastive(dataset, tcfg, std::move(heads));
}

ContrastiveResult train_contrastive(const PairedDataset& dataset, const TrainConfig& tcfg,
                                    DualHeads heads) {
  tcfg.validate();
  heads.config.validate();
  if (dataset.audio.dim != heads.config.audio_in || dataset.video.dim != heads.config.video_in) {
    throw Error(ErrorKind::Shape,
                fmt::format("dataset dims audio={} video={} do not match model audio_in={} video_in={}",
                            dataset.audio.dim, dataset.video.dim, heads.config.audio_in,
                            heads.config.video_in));
  }
  const auto train_rows = dataset.rows_in(Split::Train);
  const auto val_rows = dataset.rows_in(Split::Val);
  if (train_rows.empty() || val_rows.empty()) {
    throw Error(ErrorKind::Validation, "contrastive training needs non-empty train and val splits");
  }
  const auto video_ids = row_video_ids(dataset);
  const auto loss_cfg = heads.config.loss();

  // Validation batches use the same distinct-video constraint; the size is
  // capped by the number of val videos so small val splits stay feasible.
  const std::size_t val_batch = std::min(tcfg.batch_size, distinct_videos(dataset, val_rows));
  const std::size_t train_eval_batch = std::min(tcfg.batch_size, distinct_videos(dataset, train_rows));
  const auto val_plan =
      plan_batches(video_ids, val_rows, std::max<std::size_t>(val_batch, 2),
                   derive_seed(tcfg.seed, streams::kBatch, kFixedPlanIndex));
  const auto train_eval_plan =
      plan_batches(video_ids, train_rows, std::max<std::size_t>(train_eval_batch, 2),
                   derive_seed(tcfg.seed, streams::kBatch, kFixedPlanIndex - 1));

  ContrastiveResult result;
  auto& history = result.history;
  EarlyStopping stopper(tcfg.patience_epochs);
  {
    EpochRecord rec;
    rec.epoch = 0;
    rec.train_loss = evaluate_contrastive(heads, dataset, train_eval_plan);
    rec.val_loss = evaluate_contrastive(heads, dataset, val_plan);
    require_finite(rec.val_loss, 0, 0);
    stopper.update(rec.val_loss);
    history.epochs.push_back(rec);
    history.best_epoch = 0;
    history.best_val_loss = rec.val_loss;
    result.heads = heads;
  }

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < tcfg.max_epochs; ++epoch) {
    const double lr = lr_at(epoch, tcfg);
    const auto plan = plan_batches(video_ids, train_rows, tcfg.batch_size,
                                   derive_seed(tcfg.seed, streams::kBatch, epoch));
    double loss_sum = 0.0;
    std::size_t loss_rows = 0;
    for (const auto& batch : plan.batches) {
      if (batch.size() < 2) continue;  // a single pair has no negatives
      const Matrix xa = to_matrix(dataset.audio, batch);
      const Matrix xv = to_matrix(dataset.video, batch);
      auto fv = forward(heads.video, xv, Mode::Train, derive_seed(tcfg.seed, streams::kDropout, 2 * step + 1));
      std::optional<ForwardResult> fa;
      if (heads.audio) {
        fa = forward(*heads.audio, xa, Mode::Train, derive_seed(tcfg.seed, streams::kDropout, 2 * step));
      }
      const auto lg = contrastive_loss_backward(fa ? fa->output : xa, fv.output, loss_cfg);
      require_finite(lg.value.loss, epoch + 1, step);
      if (heads.audio) sgd_step(*heads.audio, backward(*heads.audio, *fa->tape, lg.grad_audio), lr);
      sgd_step(heads.video, backward(heads.video, *fv.tape, lg.grad_video), lr);
      loss_sum += lg.value.loss * static_cast<double>(batch.size());
      loss_rows += batch.size();
      ++step;
    }
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.lr = lr;
    rec.train_loss = loss_rows ? loss_sum / static_cast<double>(loss_rows) : 0.0;
    rec.val_loss = evaluate_contrastive(heads, dataset, val_plan);
    require_finite(rec.val_loss, epoch + 1, step);
    history.epochs.push_back(rec);
    if (stopper.update(rec.val_loss)) {
      history.best_epoch = rec.epoch;
      history.best_val_loss = rec.val_loss;
      result.heads = heads;
    }
    if (stopper.should_stop()) {
      history.early_stopped = true;
      break;
    }
  }
  return result;
}

AutoencoderResult train_autoencoder(const Matrix& data, const MlpSpec& encoder, const TrainConfig& tcfg) {
  tcfg.validate();
  if (data.rows() == 0) throw Error(ErrorKind::Validation, "autoencoder needs at least one row");
  if (encoder.dims.empty() || encoder.dims.front() != static_cast<std::size_t>(data.cols())) {
    throw Error(ErrorKind::Shape, "encoder input dim does not match the data");
  }
  MlpSpec decoder_spec{{encoder.dims.rbegin(), encoder.dims.rend()}, Activation::Relu,
                       Activation::Identity, encoder.dropout};
  Mlp net = init_mlp(encoder, derive_seed(tcfg.seed, streams::kInit, 10));
  const std::size_t n_encoder = net.layers.size();
  {
    Mlp dec = init_mlp(decoder_spec, derive_seed(tcfg.seed, streams::kInit, 11));
    for (auto& l : dec.layers) net.layers.push_back(std::move(l));
  }

  auto full_loss = [&](const Mlp& m) { return mse_loss(predict(m, data), data).loss; };
  AutoencoderResult result;
  result.loss_history.push_back(full_loss(net));
  EarlyStopping stopper(tcfg.patience_epochs);
  stopper.update(result.loss_history.back());
  Mlp best = net;

  const std::size_t n = static_cast<std::size_t>(data.rows());
  const std::size_t batch = std::min(tcfg.batch_size, n);
  std::vector<std::size_t> order(n);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < tcfg.max_epochs; ++epoch) {
    const double lr = lr_at(epoch, tcfg);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    auto rng = stream(tcfg.seed, streams::kBatch, epoch);
    rng.shuffle(std::span(order));
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t len = std::min(batch, n - start);
      Matrix x(static_cast<Eigen::Index>(len), data.cols());
      for (std::size_t i = 0; i < len; ++i) x.row(Eigen::Index(i)) = data.row(Eigen::Index(order[start + i]));
      auto fr = forward(net, x, Mode::Train, derive_seed(tcfg.seed, streams::kDropout, step));
      const auto lg = mse_loss(fr.output, x);
      require_finite(lg.loss, epoch + 1, step);
      sgd_step(net, backward(net, *fr.tape, lg.grad), lr);
      ++step;
    }
    result.loss_history.push_back(full_loss(net));
    require_finite(result.loss_history.back(), epoch + 1, step);
    if (stopper.update(result.loss_history.back())) best = net;
    if (stopper.should_stop()) break;
  }
  result.encoder.layers.assign(best.layers.begin(), best.layers.begin() + static_cast<long>(n_encoder));
  result.decoder.layers.assign(best.layers.begin() + static_cast<long>(n_encoder), best.layers.end());
  return result;
}

AutoencoderResult train_autoencoder(const EmbeddingTable& table, const MlpSpec& encoder,
                                    const TrainConfig& tcfg) {
  return train_autoencoder(to_matrix(table), encoder, tcfg);
}

EmbeddingTable embed_dataset(const DualHeads& heads, const EmbeddingTable& table, Modality modality) {
  if (modality == Modality::Audio) {
    if (table.dim != heads.config.audio_in) {
      throw Error(ErrorKind::Shape, fmt::format("audio table dim {} != audio_in {}", table.dim,
                                                heads.config.audio_in));
    }
    if (!heads.audio) return table;
    return to_table(predict(*heads.audio, to_matrix(table)), table.ids);
  }
  if (table.dim != heads.config.video_in) {
    throw Error(ErrorKind::Shape,
                fmt::format("video table dim {} != video_in {}", table.dim, heads.config.video_in));
  }
  return to_table(predict(heads.video, to_matrix(table)), table.ids);
}

}  // namespace cadenza

namespace cadenza {

Checkpoint to_checkpoint(const DualHeads& heads) {
  Checkpoint ck;
  ck.config_json = to_json(heads.config).dump();
  if (heads.audio) ck.mlps.push_back({"audio", *heads.audio});
  ck.mlps.push_back({"video", heads.video});
  return ck;
}

DualHeads heads_from_checkpoint(const Checkpoint& ck) {
  DualHeads heads;
  try {
    apply_json(json::parse(ck.config_json), heads.config);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::BadHeader, std::string("checkpoint config is not valid JSON: ") + e.what());
  }
  heads.config.validate();
  auto expect = [](const Mlp* mlp, const MlpSpec& spec, const char* name) {
    if (!mlp) throw Error(ErrorKind::Shape, fmt::format("checkpoint has no '{}' head", name));
    if (mlp->dims() != spec.dims) throw Error(ErrorKind::Shape, fmt::format("'{}' head dims do not match its config", name));
    return *mlp;
  };
  if (heads.config.head_mode == HeadMode::Dual) heads.audio = expect(ck.find("audio"), heads.config.audio_head_spec(), "audio");
  heads.video = expect(ck.find("video"), heads.config.video_head_spec(), "video");
  return heads;
}

}  // namespace cadenza
