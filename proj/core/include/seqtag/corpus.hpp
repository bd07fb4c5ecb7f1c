// CoNLL-style corpus reading/writing, annotation-removal schemes for
// simulating incomplete annotation, and a seeded synthetic corpus generator.

#ifndef SEQTAG_CORPUS_HPP
#define SEQTAG_CORPUS_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "seqtag/labels.hpp"

namespace seqtag {

inline constexpr int kUnannotated = -1;

struct Sentence {
  std::vector<std::string> tokens;

  std::size_t size() const { return tokens.size(); }
};

// Per-token label index, or kUnannotated for a missing label.
using PartialTags = std::vector<int>;

struct DatasetItem {
  Sentence sentence;
  PartialTags tags;
  std::optional<std::vector<int>> gold;  // retained for diagnostics
};

struct Provenance {
  std::string scheme;  // "random", "entity", "synthetic", or ""
  double rho = 0.0;
  std::uint64_t seed = 0;
};

struct PartialDataset {
  LabelSet labels;
  std::vector<DatasetItem> items;
  Provenance provenance;
  bool warning = false;

  bool fully_annotated() const;
  // Entity mentions counted over annotated tokens only.
  std::size_t annotated_entity_count() const;
};

// One token per line, token first column and tag last, sentences separated by
// a blank line; "-" parses as unannotated; -DOCSTART- lines are skipped.
// The label set is inferred from the tags in order of first appearance.
PartialDataset read_conll(std::istream& in);
// Validates that every tag is expressible in `labels`.
PartialDataset read_conll(std::istream& in, const LabelSet& labels);

void write_conll(const PartialDataset& dataset, std::ostream& out);

PartialDataset read_conll_file(const std::string& path);
void write_conll_file(const PartialDataset& dataset, const std::string& path);

enum class CorruptionScheme { RandomBased, EntityBased };

struct CorruptionConfig {
  CorruptionScheme scheme = CorruptionScheme::RandomBased;
  double rho = 0.2;  // fraction of entity mentions that keep their annotation
  std::uint64_t seed = 0;
};

// Keeps exactly round(rho * E) seeded-randomly chosen entity mentions
// annotated; every other token, including all O tokens, becomes unannotated.
PartialDataset corrupt_random(const PartialDataset& gold, double rho,
                              std::uint64_t seed);

// Draws surface forms in seeded random order and removes all their mentions
// until the remaining count is <= round(rho * E).
PartialDataset corrupt_entity_based(const PartialDataset& gold, double rho,
                                    std::uint64_t seed);

PartialDataset corrupt(const PartialDataset& gold, const CorruptionConfig& config);

struct SynthConfig {
  std::size_t num_sentences = 500;
  // One lexicon per entity type; entries are token sequences.
  std::vector<std::pair<EntityType, std::vector<std::vector<std::string>>>> lexicons;
  std::vector<std::string> filler;
  std::size_t min_length = 6;
  std::size_t max_length = 14;
  double entity_prob = 0.22;  // chance of starting an entity at a position
  std::uint64_t seed = 0;
};

// Deterministic per seed; lexicon tokens must be disjoint from the filler
// vocabulary.
PartialDataset generate_synthetic(const SynthConfig& config);

}  // namespace seqtag

#endif  // SEQTAG_CORPUS_HPP
