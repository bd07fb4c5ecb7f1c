#include "seqtag/eval.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace seqtag {

PRF prf_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  PRF r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  r.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  r.f1 = r.precision + r.recall > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

PRF entity_prf(const LabelSet& labels,
               const std::vector<std::vector<int>>& gold,
               const std::vector<std::vector<int>>& predicted) {
  if (gold.size() != predicted.size()) {
    throw std::invalid_argument("entity_prf: corpus size mismatch");
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].size() != predicted[i].size()) {
      throw std::invalid_argument("entity_prf: sentence length mismatch at " +
                                  std::to_string(i));
    }
    auto gspans = spans_from_tags(labels, gold[i]);
    auto pspans = spans_from_tags(labels, predicted[i]);
    std::set<std::tuple<std::size_t, std::size_t, int>> gset;
    for (const Span& s : gspans) gset.emplace(s.start, s.end, s.type);
    for (const Span& s : pspans) {
      if (gset.erase({s.start, s.end, s.type}) > 0) {
        ++tp;
      } else {
        ++fp;
      }
    }
    fn += gset.size();
  }
  return prf_from_counts(tp, fp, fn);
}

CoverageResult coverage_at_k(const std::vector<std::vector<int>>& gold,
                             const std::vector<std::vector<ScoredPath>>& kbest,
                             double overlap_threshold) {
  if (gold.size() != kbest.size()) {
    throw std::invalid_argument("coverage_at_k: corpus size mismatch");
  }
  CoverageResult r;
  r.overlap_threshold = overlap_threshold;
  r.total = gold.size();
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (kbest[i].empty()) {
      throw std::invalid_argument("coverage_at_k: empty candidate list at " +
                                  std::to_string(i));
    }
    double best = 0.0;
    for (const ScoredPath& cand : kbest[i]) {
      if (cand.labels.size() != gold[i].size()) {
        throw std::invalid_argument("coverage_at_k: candidate length mismatch");
      }
      std::size_t agree = 0;
      for (std::size_t t = 0; t < gold[i].size(); ++t) {
        if (cand.labels[t] == gold[i][t]) ++agree;
      }
      best = std::max(best, static_cast<double>(agree) /
                                static_cast<double>(gold[i].size()));
    }
    if (best >= overlap_threshold) ++r.covered;
  }
  r.fraction = r.total > 0 ? static_cast<double>(r.covered) /
                                 static_cast<double>(r.total)
                           : 0.0;
  return r;
}

void write_report(const Report& report, std::ostream& out) {
  nlohmann::ordered_json j;
  j["meta"] = report.meta;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : report.config) cfg[k] = v;
  j["config"] = cfg;
  j["metrics"] = {{"precision", report.metrics.precision},
                  {"recall", report.metrics.recall},
                  {"f1", report.metrics.f1},
                  {"tp", report.metrics.tp},
                  {"fp", report.metrics.fp},
                  {"fn", report.metrics.fn}};
  if (report.has_coverage) {
    j["coverage"] = {{"covered", report.coverage.covered},
                     {"total", report.coverage.total},
                     {"fraction", report.coverage.fraction},
                     {"overlap_threshold", report.coverage.overlap_threshold}};
  } else {
    j["coverage"] = nullptr;
  }
  nlohmann::ordered_json history = nlohmann::ordered_json::array();
  for (const auto& it : report.history) {
    history.push_back({{"dev_precision", it.dev_precision},
                       {"dev_recall", it.dev_recall},
                       {"dev_f1", it.dev_f1},
                       {"accepted", it.accepted},
                       {"mean_loss", it.mean_loss},
                       {"lambda_final", it.lambda_final},
                       {"temperature", it.temperature}});
  }
  j["history"] = history;
  out << j.dump(2) << '\n';
}

void write_report_file(const Report& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report file: " + path);
  write_report(report, out);
}

}  // namespace seqtag
