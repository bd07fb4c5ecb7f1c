// Iterative training pipeline: k-fold stacking for q estimation, candidate
// masks from K-best and dictionary candidates, iterative sample selection,
// and dev-F1-gated model updates.

#ifndef SEQTAG_PIPELINE_HPP
#define SEQTAG_PIPELINE_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "seqtag/corpus.hpp"
#include "seqtag/encoder.hpp"
#include "seqtag/eval.hpp"
#include "seqtag/objectives.hpp"
#include "seqtag/qestimate.hpp"

namespace seqtag {

enum class QInit { HardO, Uniform };

struct PipelineConfig {
  std::size_t k_folds = 2;
  std::size_t iterations = 5;
  std::size_t top_k = 5;
  std::size_t freq_threshold = 2;   // dictionary frequency cutoff c
  double selection_tau = 0.5;
  TemperatureSchedule temperature;  // iterations field is filled from above
  double gamma = 2.0;
  TrainConfig train;
  FeatureConfig features;
  QInit q_init = QInit::HardO;
  QMode q_mode = QMode::Interpolated;
  KBestRefresh kbest_refresh = KBestRefresh::PerEpoch;
  bool length_normalize_score = true;
  bool accumulate_dictionary = false;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  double init_scale = 0.01;

  // Ablation switches; all on for the full pipeline, all off recovers the
  // plain k-fold weighted-CRF loop.
  bool use_kbest_term = true;
  bool use_candidate_mask = true;
  bool use_selection = true;

  void validate() const;
  std::vector<std::pair<std::string, std::string>> effective_config() const;
};

// Flat key-value file, one "key = value" per line, '#' comments.
PipelineConfig parse_pipeline_config(std::istream& in);
void apply_config_line(PipelineConfig& config, const std::string& key,
                       const std::string& value);

// Surface token-sequence -> (entity type, frequency).
class EntityDictionary {
 public:
  void add(const std::vector<std::string>& surface, int type, std::size_t count = 1);
  // Highest-frequency type for a surface form, or nullopt.
  std::optional<int> lookup(const std::vector<std::string>& surface) const;
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t max_surface_length() const { return max_len_; }

  const std::map<std::vector<std::string>, std::pair<int, std::size_t>>& entries() const {
    return entries_;
  }

 private:
  std::map<std::vector<std::string>, std::pair<int, std::size_t>> entries_;
  std::size_t max_len_ = 0;
};

// Seeded shuffle then contiguous near-equal partition; returns the fold index
// of every item.
std::vector<std::size_t> split_folds(std::size_t num_items, std::size_t k,
                                     std::uint64_t seed);

// Annotation constraints of a partially tagged sentence: annotated rows are
// singletons, unannotated rows allow every label.
AllowedMask annotation_mask(const PartialTags& tags, std::size_t L);

// Constrained K-best decode (structural BIO constraints applied); paths with
// -inf score are dropped.
std::vector<ScoredPath> build_kbest_candidates(const ModelParams& model,
                                               const Sentence& sentence,
                                               const PartialTags& tags,
                                               std::size_t k);

// Count (surface form, type) pairs over the predicted paths and keep those
// with frequency >= c; a surface form keeps its higher-frequency type, ties
// going to the lower type index.
EntityDictionary build_entity_dictionary(const PartialDataset& data,
                                         const std::vector<std::vector<int>>& predicted,
                                         std::size_t freq_threshold);

// Leftmost-longest non-overlapping dictionary matching; matched spans tagged
// B/I of the dictionary type, everything else O.
std::vector<int> self_built_candidate(const LabelSet& labels,
                                      const Sentence& sentence,
                                      const EntityDictionary& dictionary);

// Annotated token -> singleton; unannotated token j -> {O} + self_built[j]
// + every candidate path label at j.
AllowedMask build_candidate_mask(const LabelSet& labels, const PartialTags& tags,
                                 const std::vector<ScoredPath>& kbest,
                                 const std::vector<int>& self_built);

struct Selection {
  std::vector<std::size_t> indices;
  bool fallback = false;  // empty selection fell back to the full dataset
};

Selection select_samples(const std::vector<double>& scores, double tau);

struct PipelineResult {
  ModelParams model;  // last accepted model
  std::vector<IterationRecord> history;
  EntityDictionary dictionary;
  bool selection_warning = false;
};

PipelineResult run_pipeline(const PartialDataset& train_data,
                            const PartialDataset& dev_data,
                            const PipelineConfig& config);

}  // namespace seqtag

#endif  // SEQTAG_PIPELINE_HPP
