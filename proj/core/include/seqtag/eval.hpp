// Entity-level precision/recall/F1, top-K gold-path coverage diagnostic, and
// machine-readable JSON experiment reports.

#ifndef SEQTAG_EVAL_HPP
#define SEQTAG_EVAL_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "seqtag/labels.hpp"
#include "seqtag/lattice.hpp"

namespace seqtag {

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

PRF prf_from_counts(std::size_t tp, std::size_t fp, std::size_t fn);

// Exact-match span scoring, micro-averaged over the corpus.
PRF entity_prf(const LabelSet& labels,
               const std::vector<std::vector<int>>& gold,
               const std::vector<std::vector<int>>& predicted);

struct CoverageResult {
  std::size_t covered = 0;
  std::size_t total = 0;
  double fraction = 0.0;
  double overlap_threshold = 0.7;
};

// A sentence is covered iff some candidate agrees with gold on at least
// `overlap_threshold` of its tokens (O included).
CoverageResult coverage_at_k(const std::vector<std::vector<int>>& gold,
                             const std::vector<std::vector<ScoredPath>>& kbest,
                             double overlap_threshold = 0.7);

struct IterationRecord {
  double dev_precision = 0.0;
  double dev_recall = 0.0;
  double dev_f1 = 0.0;
  bool accepted = false;
  double mean_loss = 0.0;
  double lambda_final = 0.0;
  double temperature = 0.0;
};

struct Report {
  std::string meta;                       // free-form run description
  std::vector<std::pair<std::string, std::string>> config;  // effective config
  PRF metrics;
  CoverageResult coverage;
  bool has_coverage = false;
  std::vector<IterationRecord> history;
};

// Deterministic field ordering; parseable back as JSON.
void write_report(const Report& report, std::ostream& out);
void write_report_file(const Report& report, const std::string& path);

}  // namespace seqtag

#endif  // SEQTAG_EVAL_HPP
