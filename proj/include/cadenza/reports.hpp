#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "cadenza/eval.hpp"

namespace cadenza {

// Both directions go in one report so the pool size and tie rule sit next to
// the numbers they qualify.
nlohmann::json rank_report_json(const RankResult& a2v, const RankResult& v2a);
std::string rank_report_text(const RankResult& a2v, const RankResult& v2a);

nlohmann::json probe_report_json(const ProbeMetrics& m);
std::string probe_report_text(const ProbeMetrics& m);

nlohmann::json contrast_report_json(const ContrastReport& r);
std::string contrast_report_text(const ContrastReport& r);

nlohmann::json retrieval_report_json(const RetrievalReport& r);
std::string retrieval_report_text(const RetrievalReport& r);

// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);

}  // namespace cadenza
