#include "cadenza/reports.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace cadenza {

using nlohmann::json;

namespace {

json rank_json(const RankResult& r) {
  return {{"direction", to_string(r.direction)},
          {"median_rank", r.median_rank},
          {"pool_size", r.pool_size},
          {"queries", r.per_query_rank.size()}};
}

}  // namespace

json rank_report_json(const RankResult& a2v, const RankResult& v2a) {
  return {{"audio_to_video", rank_json(a2v)},
          {"video_to_audio", rank_json(v2a)},
          {"pool_size", a2v.pool_size},
          {"tie_rule", kRankTieRule},
          {"median_rule", kMedianRule}};
}

std::string rank_report_text(const RankResult& a2v, const RankResult& v2a) {
  std::string out;
  out += fmt::format("# tie rule: {}\n# median: {}\n", kRankTieRule, kMedianRule);
  out += fmt::format("{:<16}{:>12}{:>8}\n", "direction", "median_rank", "M");
  for (const auto* r : {&a2v, &v2a}) {
    out += fmt::format("{:<16}{:>12.1f}{:>8}\n", to_string(r->direction), r->median_rank, r->pool_size);
  }
  return out;
}

json probe_report_json(const ProbeMetrics& m) {
  return {{"macro_auc", m.macro_auc},         {"macro_f1", m.macro_f1},
          {"threshold", m.threshold},         {"accuracy", m.accuracy},
          {"per_label_auc", m.per_label_auc}, {"non_evaluable", m.non_evaluable}};
}

std::string probe_report_text(const ProbeMetrics& m) {
  std::size_t width = 8;
  for (const auto& [name, _] : m.per_label_auc) width = std::max(width, name.size() + 2);
  for (const auto& name : m.non_evaluable) width = std::max(width, name.size() + 2);
  std::string out = fmt::format("macro_auc {:.4f}\nmacro_f1  {:.4f} (threshold {})\naccuracy  {:.4f}\n",
                                m.macro_auc, m.macro_f1, m.threshold, m.accuracy);
  out += fmt::format("{:<{}}{:>8}\n", "label", width, "auc");
  for (const auto& [name, auc] : m.per_label_auc) out += fmt::format("{:<{}}{:>8.4f}\n", name, width, auc);
  for (const auto& name : m.non_evaluable) out += fmt::format("{:<{}}{:>8}\n", name, width, "n/a");
  return out;
}

json contrast_report_json(const ContrastReport& r) {
  json j = {{"grouping", to_string(r.grouping)},
            {"mean_within", r.mean_within},
            {"mean_between", r.mean_between},
            {"gap", r.gap},
            {"n_items", r.n_items},
            {"n_groups", r.n_groups},
            {"within_pairs", r.within_pairs},
            {"between_pairs", r.between_pairs},
            {"skipped_groups", r.skipped_groups},
            {"subsampled", r.subsampled},
            {"ci_low", r.ci_low},
            {"ci_high", r.ci_high},
            {"confidence", r.confidence},
            {"bootstrap_reps", r.bootstrap_reps},
            {"bootstrap_seed", r.seed}};
  return j;
}

std::string contrast_report_text(const ContrastReport& r) {
  std::string out = fmt::format("grouping      {}\n", to_string(r.grouping));
  out += fmt::format("mean_within   {:.6f}  ({} pairs)\n", r.mean_within, r.within_pairs);
  out += fmt::format("mean_between  {:.6f}  ({} pairs)\n", r.mean_between, r.between_pairs);
  out += fmt::format("gap           {:.6f}  {:.0f}% CI [{:.6f}, {:.6f}]\n", r.gap, r.confidence * 100.0, r.ci_low,
                     r.ci_high);
  out += fmt::format("items {}  groups {}  skipped {}  bootstrap {} reps, seed {}\n", r.n_items, r.n_groups,
                     r.skipped_groups.size(), r.bootstrap_reps, r.seed);
  out += "pairs: exact, no subsampling\n";
  return out;
}

json retrieval_report_json(const RetrievalReport& r) {
  json results = json::array();
  for (const auto& s : r.results) {
    json neighbors = json::array();
    for (const auto& n : s.neighbors) {
      // Rounded so the JSON and text reports agree.
      neighbors.push_back({{"id", n.key}, {"similarity", std::stod(fmt::format("{:.4f}", n.similarity))}});
    }
    results.push_back({{"seed", s.seed}, {"neighbors", neighbors}});
  }
  return {{"level", to_string(r.level)}, {"k", r.k}, {"results", results}};
}

std::string retrieval_report_text(const RetrievalReport& r) {
  std::size_t width = 6;
  for (const auto& s : r.results) {
    width = std::max(width, s.seed.size() + 2);
    for (const auto& n : s.neighbors) width = std::max(width, n.key.size() + 2);
  }
  std::string out = fmt::format("{:<{}}{:>6}{:<{}}{:>10}\n", "seed", width, "rank", "  neighbor", width + 2, "sim");
  for (const auto& s : r.results) {
    for (std::size_t i = 0; i < s.neighbors.size(); ++i) {
      out += fmt::format("{:<{}}{:>6}  {:<{}}{:>10.4f}\n", i == 0 ? s.seed : "", width, i + 1, s.neighbors[i].key,
                         width, s.neighbors[i].similarity);
    }
  }
  return out;
}

}  // namespace cadenza
