#include "cadenza/probe.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <fmt/format.h>

#include "cadenza/error.hpp"
#include "cadenza/rng.hpp"

namespace cadenza {

using nlohmann::json;

std::string_view to_string(ProbeTask task) { return task == ProbeTask::Genre ? "genre" : "tags"; }

ProbeTask parse_probe_task(std::string_view text) {
  if (text == "tags" || text == "multilabel_tags") return ProbeTask::MultilabelTags;
  if (text == "genre") return ProbeTask::Genre;
  throw Error(ErrorKind::Config, "unknown task '" + std::string(text) + "'");
}

json to_json(const ProbeConfig& c) {
  json j = to_json(c.train);
  j["hidden"] = c.hidden;
  j["dropout"] = c.dropout;
  j["top_k"] = c.top_k;
  j["threshold"] = c.threshold;
  return j;
}

void apply_json(const json& j, ProbeConfig& c) {
  json train = json::object();
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "hidden") c.hidden = value.get<std::vector<std::size_t>>();
      else if (key == "dropout") c.dropout = value.get<double>();
      else if (key == "top_k") c.top_k = value.get<std::size_t>();
      else if (key == "threshold") c.threshold = value.get<double>();
      else train[key] = value;
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Config, "probe config key '" + key + "': " + e.what());
    }
  }
  apply_json(train, c.train);
}

LossAndGrad probe_loss(const Matrix& logits, const Matrix& targets, ProbeTask task) {
  return task == ProbeTask::Genre ? softmax_cross_entropy(logits, targets) : bce_with_logits(logits, targets);
}

Matrix probe_probabilities(const Mlp& probe, const Matrix& features, ProbeTask task) {
  Matrix logits = predict(probe, features);
  if (task == ProbeTask::MultilabelTags) {
    return logits.unaryExpr([](double z) { return 1.0 / (1.0 + std::exp(-z)); });
  }
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double max = logits.row(r).maxCoeff();
    logits.row(r) = (logits.row(r).array() - max).exp().matrix();
    logits.row(r) /= logits.row(r).sum();
  }
  return logits;
}

ProbeResult train_probe(const Matrix& train_x, const Matrix& train_y, const Matrix& val_x, const Matrix& val_y,
                        ProbeTask task, const ProbeConfig& cfg) {
  cfg.train.validate();
  if (train_x.rows() != train_y.rows() || val_x.rows() != val_y.rows()) {
    throw Error(ErrorKind::Shape, "features and labels are not row-aligned");
  }
  if (train_x.rows() == 0 || val_x.rows() == 0) {
    throw Error(ErrorKind::Validation, "probe training needs non-empty train and val rows");
  }
  if (train_x.cols() != val_x.cols() || train_y.cols() != val_y.cols() || train_y.cols() == 0) {
    throw Error(ErrorKind::Shape, "train and val feature/label widths differ");
  }
  if (task == ProbeTask::Genre) {
    for (Eigen::Index c = 0; c < train_y.cols(); ++c) {
      if (train_y.col(c).sum() == 0.0) {
        throw Error(ErrorKind::Validation, fmt::format("genre class {} has no training examples", c));
      }
    }
  }

  std::vector<std::size_t> dims{static_cast<std::size_t>(train_x.cols())};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(static_cast<std::size_t>(train_y.cols()));
  const auto& tcfg = cfg.train;
  Mlp model = init_mlp({dims, Activation::Relu, Activation::Identity, cfg.dropout},
                       derive_seed(tcfg.seed, streams::kInit, 20));

  auto eval_loss = [&](const Mlp& m, const Matrix& x, const Matrix& y) {
    return probe_loss(predict(m, x), y, task).loss;
  };

  ProbeResult result;
  auto& history = result.history;
  EarlyStopping stopper(tcfg.patience_epochs);
  history.epochs.push_back({0, eval_loss(model, train_x, train_y), eval_loss(model, val_x, val_y), 0.0});
  stopper.update(history.epochs.back().val_loss);
  history.best_val_loss = history.epochs.back().val_loss;
  result.model = model;

  const std::size_t n = static_cast<std::size_t>(train_x.rows());
  const std::size_t batch = std::min(tcfg.batch_size, n);
  std::vector<std::size_t> order(n);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < tcfg.max_epochs; ++epoch) {
    const double lr = lr_at(epoch, tcfg);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    auto rng = stream(tcfg.seed, streams::kBatch, epoch);
    rng.shuffle(std::span(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t len = std::min(batch, n - start);
      Matrix x(Eigen::Index(len), train_x.cols()), y(Eigen::Index(len), train_y.cols());
      for (std::size_t i = 0; i < len; ++i) {
        x.row(Eigen::Index(i)) = train_x.row(Eigen::Index(order[start + i]));
        y.row(Eigen::Index(i)) = train_y.row(Eigen::Index(order[start + i]));
      }
      auto fr = forward(model, x, Mode::Train, derive_seed(tcfg.seed, streams::kDropout, step));
      const auto lg = probe_loss(fr.output, y, task);
      if (!std::isfinite(lg.loss)) {
        throw Error(ErrorKind::Divergence, fmt::format("non-finite probe loss at epoch {} step {}", epoch + 1, step));
      }
      sgd_step(model, backward(model, *fr.tape, lg.grad), lr);
      loss_sum += lg.loss * static_cast<double>(len);
      ++step;
    }
    EpochRecord rec{epoch + 1, loss_sum / static_cast<double>(n), eval_loss(model, val_x, val_y), lr};
    history.epochs.push_back(rec);
    if (stopper.update(rec.val_loss)) {
      history.best_epoch = rec.epoch;
      history.best_val_loss = rec.val_loss;
      result.model = model;
    }
    if (stopper.should_stop()) {
      history.early_stopped = true;
      break;
    }
  }
  return result;
}

std::string_view to_string(FeatureSource s) {
  switch (s) {
    case FeatureSource::ContrastiveAudio: return "contrastive-audio";
    case FeatureSource::ContrastiveVideo: return "contrastive-video";
    case FeatureSource::ContrastiveAgg: return "contrastive-agg";
    case FeatureSource::BackboneAudio: return "backbone-audio";
    case FeatureSource::BackboneVideo: return "backbone-video";
    case FeatureSource::BackboneConcat: return "backbone-concat";
  }
  return "backbone-audio";
}

FeatureSource parse_feature_source(std::string_view text) {
  for (auto s : {FeatureSource::ContrastiveAudio, FeatureSource::ContrastiveVideo, FeatureSource::ContrastiveAgg,
                 FeatureSource::BackboneAudio, FeatureSource::BackboneVideo, FeatureSource::BackboneConcat}) {
    if (to_string(s) == text) return s;
  }
  throw Error(ErrorKind::Config, "unknown feature source '" + std::string(text) + "'");
}

bool needs_heads(FeatureSource s) {
  return s == FeatureSource::ContrastiveAudio || s == FeatureSource::ContrastiveVideo ||
         s == FeatureSource::ContrastiveAgg;
}

namespace {

EmbeddingTable concat_columns(const EmbeddingTable& a, const EmbeddingTable& b) {
  if (a.ids != b.ids) throw Error(ErrorKind::Pairing, "cannot concatenate tables with different ids");
  EmbeddingTable out;
  out.dim = a.dim + b.dim;
  out.ids = a.ids;
  out.data.reserve(out.count() * out.dim);
  for (std::size_t r = 0; r < a.count(); ++r) {
    const auto ra = a.row(r), rb = b.row(r);
    out.data.insert(out.data.end(), ra.begin(), ra.end());
    out.data.insert(out.data.end(), rb.begin(), rb.end());
  }
  return out;
}

}  // namespace

EmbeddingTable build_features(const PairedDataset& dataset, FeatureSource source, const DualHeads* heads) {
  if (needs_heads(source) && heads == nullptr) {
    throw Error(ErrorKind::Config, std::string(to_string(source)) + " needs a trained checkpoint");
  }
  switch (source) {
    case FeatureSource::BackboneAudio: return dataset.audio;
    case FeatureSource::BackboneVideo: return dataset.video;
    case FeatureSource::BackboneConcat: return concat_columns(dataset.audio, dataset.video);
    case FeatureSource::ContrastiveAudio: return embed_dataset(*heads, dataset.audio, Modality::Audio);
    case FeatureSource::ContrastiveVideo: return embed_dataset(*heads, dataset.video, Modality::Video);
    case FeatureSource::ContrastiveAgg:
      return concat_columns(embed_dataset(*heads, dataset.audio, Modality::Audio),
                            embed_dataset(*heads, dataset.video, Modality::Video));
  }
  return dataset.audio;
}

ProbeLabels build_labels(const PairedDataset& dataset, ProbeTask task, std::size_t top_k) {
  ProbeLabels labels;
  const auto& entries = dataset.manifest.entries;
  if (task == ProbeTask::MultilabelTags) {
    labels.names = select_top_tags(dataset.manifest, top_k);
  } else {
    std::set<std::string> genres;
    for (const auto& e : entries) {
      if (!e.genre) throw Error(ErrorKind::Validation, "manifest entry " + to_string(e.id()) + " has no genre");
      genres.insert(*e.genre);
    }
    labels.names.assign(genres.begin(), genres.end());
  }
  std::map<std::string_view, Eigen::Index> column;
  for (std::size_t i = 0; i < labels.names.size(); ++i) column.emplace(labels.names[i], Eigen::Index(i));
  labels.targets = Matrix::Zero(Eigen::Index(entries.size()), Eigen::Index(labels.names.size()));
  for (std::size_t r = 0; r < entries.size(); ++r) {
    if (task == ProbeTask::Genre) {
      labels.targets(Eigen::Index(r), column.at(*entries[r].genre)) = 1.0;
    } else {
      for (const auto& t : entries[r].tags) {
        if (auto it = column.find(t); it != column.end()) labels.targets(Eigen::Index(r), it->second) = 1.0;
      }
    }
  }
  return labels;
}

ProbeRun run_probe(const PairedDataset& dataset, const EmbeddingTable& features, const ProbeLabels& labels,
                   ProbeTask task, const ProbeConfig& cfg) {
  if (features.count() != dataset.size() || labels.targets.rows() != Eigen::Index(dataset.size())) {
    throw Error(ErrorKind::Shape, "features and labels must be row-aligned with the dataset");
  }
  auto gather = [&](const std::vector<std::size_t>& rows) {
    Matrix y(Eigen::Index(rows.size()), labels.targets.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) y.row(Eigen::Index(i)) = labels.targets.row(Eigen::Index(rows[i]));
    return std::pair{to_matrix(features, rows), y};
  };
  const auto train_rows = dataset.rows_in(Split::Train);
  const auto val_rows = dataset.rows_in(Split::Val);
  const auto test_rows = dataset.rows_in(Split::Test);
  if (test_rows.empty()) throw Error(ErrorKind::Validation, "test split is empty");
  const auto [train_x, train_y] = gather(train_rows);
  const auto [val_x, val_y] = gather(val_rows);

  ProbeRun run;
  run.result = train_probe(train_x, train_y, val_x, val_y, task, cfg);
  run.label_names = labels.names;
  run.feature_dim = features.dim;

  // Per-video prediction = mean of its segment probabilities.
  const auto [test_x, test_y] = gather(test_rows);
  const Matrix probs = probe_probabilities(run.result.model, test_x, task);
  std::map<std::string_view, std::vector<Eigen::Index>> by_video;
  for (std::size_t i = 0; i < test_rows.size(); ++i) {
    by_video[dataset.manifest.entries[test_rows[i]].video_id].push_back(Eigen::Index(i));
  }
  Matrix video_probs(Eigen::Index(by_video.size()), probs.cols());
  Matrix video_labels(Eigen::Index(by_video.size()), probs.cols());
  Eigen::Index v = 0;
  for (const auto& [_, idx] : by_video) {
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(probs.cols());
    for (auto i : idx) sum += probs.row(i);
    video_probs.row(v) = sum / static_cast<double>(idx.size());
    video_labels.row(v) = test_y.row(idx.front());
    ++v;
  }
  run.test_videos = by_video.size();
  run.metrics = probe_metrics(video_probs, video_labels, labels.names, cfg.threshold);
  return run;
}

}  // namespace cadenza
