#pragma once

#include <cstdio>
#include <sstream>
#include <string>

#include <json.hpp>

#include "gcr/evaluator.hpp"
#include "gcr/metrics.hpp"
#include "gcr/trainer.hpp"

namespace gcr {

inline nlohmann::json to_json(const MetricsTable& t) {
  nlohmann::json j;
  j["mrr"] = t.mrr;
  for (std::size_t i = 0; i < kHitCutoffs.size(); ++i) j["hit@" + std::to_string(kHitCutoffs[i])] = t.hit[i];
  for (std::size_t i = 0; i < kNdcgCutoffs.size(); ++i) j["ndcg@" + std::to_string(kNdcgCutoffs[i])] = t.ndcg[i];
  j["queries"] = t.queries;
  j["skipped"] = t.skipped;
  j["degenerate"] = t.degenerate;
  return j;
}

inline nlohmann::json to_json(const DegreeBreakdown& b) {
  nlohmann::json buckets = nlohmann::json::array();
  for (const auto& bucket : b.buckets) {
    buckets.push_back({{"bucket", bucket.label()},
                       {"population", bucket.population},
                       {"metrics", bucket.metrics ? to_json(*bucket.metrics) : nlohmann::json(nullptr)}});
  }
  return {{"buckets", buckets}, {"unbucketed", b.unbucketed}};
}

inline nlohmann::json to_json(const EpochReport& r) {
  nlohmann::json j;
  j["epoch"] = r.epoch;
  j["loss"] = r.loss;
  j["gcr"] = r.gcr;
  j["logic"] = r.logic;
  j["l2"] = r.l2;
  nlohmann::json laws;
  for (std::size_t k = 0; k < kLogicLawNames.size(); ++k) laws[std::string(kLogicLawNames[k])] = r.logic_terms[k];
  j["logic_terms"] = laws;
  j["validation"] = r.validation ? nlohmann::json(*r.validation) : nlohmann::json(nullptr);
  j["learning_rate"] = r.learning_rate;
  j["seconds"] = r.seconds;
  return j;
}

/// Fixed-width text table of a metrics row.
inline std::string format_table(const MetricsTable& t) {
  std::ostringstream os;
  char buf[64];
  os << "MRR     ";
  for (auto k : kHitCutoffs) os << "Hit@" << k << (k < 10 ? "   " : "  ");
  for (auto k : kNdcgCutoffs) os << "NDCG@" << k << (k < 10 ? "  " : " ");
  os << "queries\n";
  std::snprintf(buf, sizeof buf, "%-8.4f", t.mrr);
  os << buf;
  for (double v : t.hit) {
    std::snprintf(buf, sizeof buf, "%-8.4f", v);
    os << buf;
  }
  for (double v : t.ndcg) {
    std::snprintf(buf, sizeof buf, "%-8.4f", v);
    os << buf;
  }
  os << t.queries;
  if (t.skipped) os << " (" << t.skipped << " skipped)";
  if (t.degenerate) os << " [degenerate: single candidate]";
  os << '\n';
  return os.str();
}

}  // namespace gcr
