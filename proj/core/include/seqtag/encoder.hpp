// Sentence scorer producing a Lattice: a hashed sparse linear feature model
// with learned transition scores, trained by first-order updates chained
// through the lattice gradients of any objective.

#ifndef SEQTAG_ENCODER_HPP
#define SEQTAG_ENCODER_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "seqtag/corpus.hpp"
#include "seqtag/labels.hpp"
#include "seqtag/lattice.hpp"
#include "seqtag/objectives.hpp"
#include "seqtag/qestimate.hpp"

namespace seqtag {

struct FeatureConfig {
  // Default template set: word identity, word shape, prefixes/suffixes of
  // lengths 1-3 and case/digit flags, each over window offsets -2..+2.
  std::vector<std::string> templates = {"word", "shape", "prefix", "suffix", "flags"};
  std::uint64_t hash_dim = 1ull << 20;  // power of two, >= 2^10
  std::uint64_t hash_seed = 0x517a67a9ull;

  void validate() const;
};

// Per-token hashed feature indices (all < hash_dim).
using TokenFeatures = std::vector<std::vector<std::uint32_t>>;

TokenFeatures extract_features(const Sentence& sentence, const FeatureConfig& config);

struct ModelParams {
  LabelSet label_set;
  FeatureConfig feature_config;
  std::vector<double> emit_weights;  // hash_dim * L row-major (feature-major)
  std::vector<double> trans;         // L*L
  std::vector<double> start;         // L
  std::vector<double> stop;          // L

  std::size_t num_labels() const { return label_set.size(); }

  static ModelParams init(const LabelSet& labels, const FeatureConfig& config,
                          std::uint64_t seed, double scale = 0.01);
};

Lattice score_sentence(const ModelParams& params, const TokenFeatures& features);
Lattice score_sentence(const ModelParams& params, const Sentence& sentence);

enum class Optimizer { AdaGradStyle, PlainSGD };

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 8;
  double learning_rate = 0.1;
  double l2 = 1e-5;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::AdaGradStyle;

  void validate() const;
};

// One sentence prepared for training. `gold` is required for NLL, `q` for
// the weighted and combined objectives.
struct TrainingInstance {
  TokenFeatures features;
  AllowedMask mask;
  std::optional<QFactorized> q;
  std::optional<std::vector<int>> gold;
};

struct TrainResult {
  ModelParams params;
  std::vector<double> epoch_mean_loss;
};

// Mini-batch training; deterministic given the seed. Throws on non-finite
// mean loss.
TrainResult train(const std::vector<TrainingInstance>& data,
                  const LossConfig& loss_config, const TrainConfig& train_config,
                  ModelParams initial);

// Viterbi decode with structural BIO constraints applied.
ScoredPath predict(const ModelParams& params, const Sentence& sentence,
                   const AllowedMask* mask = nullptr);

struct SentenceScore {
  ScoredPath path;
  double s = 0.0;  // probability score in (0, 1]
};

// Constrained decode plus s = exp((score - logZ) / norm), norm = n when
// length-normalized.
SentenceScore probability_score(const ModelParams& params, const Sentence& sentence,
                                const AllowedMask& mask,
                                bool length_normalize = true);

void save_model(const ModelParams& params, std::ostream& out);
ModelParams load_model(std::istream& in);
void save_model_file(const ModelParams& params, const std::string& path);
ModelParams load_model_file(const std::string& path);

}  // namespace seqtag

#endif  // SEQTAG_ENCODER_HPP
