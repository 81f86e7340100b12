#include <algorithm>
#include <numeric>

#include "cadenza/error.hpp"
#include "cadenza/eval.hpp"

namespace cadenza {

std::optional<double> roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(ErrorKind::Shape, "scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Rank-sum form of the Mann-Whitney statistic with mid-ranks for ties.
  double positive_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] != 0) {
        positive_rank_sum += mid_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double f1_score(std::size_t tp, std::size_t fp, std::size_t fn) {
  const std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

namespace {

double column_f1(const Matrix& probs, const Matrix& labels, Eigen::Index c, double threshold) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    const bool predicted = probs(r, c) >= threshold;
    const bool actual = labels(r, c) > 0.5;
    tp += predicted && actual;
    fp += predicted && !actual;
    fn += !predicted && actual;
  }
  return f1_score(tp, fp, fn);
}

}  // namespace

double f1_macro(const Matrix& probs, const Matrix& labels, double threshold) {
  if (probs.rows() != labels.rows() || probs.cols() != labels.cols()) {
    throw Error(ErrorKind::Shape, "probs and labels shapes differ");
  }
  if (probs.cols() == 0) return 0.0;
  double sum = 0.0;
  for (Eigen::Index c = 0; c < probs.cols(); ++c) sum += column_f1(probs, labels, c, threshold);
  return sum / static_cast<double>(probs.cols());
}

ProbeMetrics probe_metrics(const Matrix& probs, const Matrix& labels, const std::vector<std::string>& names,
                           double threshold) {
  if (probs.rows() != labels.rows() || probs.cols() != labels.cols() ||
      names.size() != static_cast<std::size_t>(probs.cols())) {
    throw Error(ErrorKind::Shape, "probs, labels and label names disagree");
  }
  ProbeMetrics m;
  m.threshold = threshold;
  double auc_sum = 0.0, f1_sum = 0.0;
  std::size_t evaluable = 0;
  std::vector<double> scores(static_cast<std::size_t>(probs.rows()));
  std::vector<int> truth(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index c = 0; c < probs.cols(); ++c) {
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
      scores[std::size_t(r)] = probs(r, c);
      truth[std::size_t(r)] = labels(r, c) > 0.5 ? 1 : 0;
    }
    const auto auc = roc_auc(scores, truth);
    if (!auc) {
      m.non_evaluable.push_back(names[std::size_t(c)]);
      continue;
    }
    m.per_label_auc[names[std::size_t(c)]] = *auc;
    auc_sum += *auc;
    f1_sum += column_f1(probs, labels, c, threshold);
    ++evaluable;
  }
  if (evaluable > 0) {
    m.macro_auc = auc_sum / static_cast<double>(evaluable);
    m.macro_f1 = f1_sum / static_cast<double>(evaluable);
  }
  std::size_t correct = 0;
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    Eigen::Index p = 0, t = 0;
    probs.row(r).maxCoeff(&p);
    labels.row(r).maxCoeff(&t);
    correct += p == t;
  }
  m.accuracy = probs.rows() ? static_cast<double>(correct) / static_cast<double>(probs.rows()) : 0.0;
  return m;
}

}  // namespace cadenza
