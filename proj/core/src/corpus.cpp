#include "seqtag/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "seqtag/rng.hpp"

namespace seqtag {

namespace {

struct RawSentence {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
};

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream ss(line);
  std::string f;
  while (ss >> f) fields.push_back(f);
  return fields;
}

std::vector<RawSentence> read_raw(std::istream& in) {
  std::vector<RawSentence> sentences;
  RawSentence current;
  std::string line;
  std::size_t lineno = 0;
  auto flush = [&] {
    if (!current.tokens.empty()) {
      sentences.push_back(std::move(current));
      current = RawSentence{};
    }
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> fields = split_fields(line);
    if (fields.empty()) {
      flush();
      continue;
    }
    if (fields[0] == "-DOCSTART-") continue;
    if (fields.size() < 2) {
      throw std::runtime_error("read_conll: line " + std::to_string(lineno) +
                               ": expected token and tag columns");
    }
    current.tokens.push_back(fields.front());
    current.tags.push_back(fields.back());
  }
  flush();
  if (sentences.empty()) {
    throw std::runtime_error("read_conll: no sentences in input");
  }
  return sentences;
}

PartialDataset convert_raw(const std::vector<RawSentence>& raw,
                           const LabelSet& labels) {
  PartialDataset ds;
  ds.labels = labels;
  for (const auto& s : raw) {
    DatasetItem item;
    item.sentence.tokens = s.tokens;
    item.tags.reserve(s.tags.size());
    for (const auto& tag : s.tags) {
      if (tag == "-") {
        item.tags.push_back(kUnannotated);
        continue;
      }
      int idx = labels.parse_label(tag);
      if (idx < 0) {
        throw std::runtime_error("read_conll: unknown label '" + tag + "'");
      }
      item.tags.push_back(idx);
    }
    ds.items.push_back(std::move(item));
  }
  return ds;
}

}  // namespace

bool PartialDataset::fully_annotated() const {
  for (const auto& item : items) {
    for (int t : item.tags) {
      if (t == kUnannotated) return false;
    }
  }
  return true;
}

std::size_t PartialDataset::annotated_entity_count() const {
  std::size_t count = 0;
  for (const auto& item : items) {
    for (int t : item.tags) {
      if (t == kUnannotated) continue;
      if (labels.label_at(t).kind == LabelKind::Begin) ++count;
    }
  }
  return count;
}

PartialDataset read_conll(std::istream& in) {
  std::vector<RawSentence> raw = read_raw(in);
  // label set inferred in order of first appearance
  std::vector<EntityType> types;
  std::unordered_set<std::string> seen;
  for (const auto& s : raw) {
    for (const auto& tag : s.tags) {
      if (tag.size() >= 3 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-') {
        std::string name = tag.substr(2);
        if (seen.insert(name).second) types.push_back(EntityType{name});
      } else if (tag != "O" && tag != "-") {
        throw std::runtime_error("read_conll: unknown label '" + tag + "'");
      }
    }
  }
  if (types.empty()) {
    throw std::runtime_error("read_conll: corpus declares no entity types");
  }
  return convert_raw(raw, LabelSet::build(types));
}

PartialDataset read_conll(std::istream& in, const LabelSet& labels) {
  return convert_raw(read_raw(in), labels);
}

void write_conll(const PartialDataset& dataset, std::ostream& out) {
  for (const auto& item : dataset.items) {
    for (std::size_t i = 0; i < item.sentence.size(); ++i) {
      out << item.sentence.tokens[i] << ' ';
      if (item.tags[i] == kUnannotated) {
        out << '-';
      } else {
        out << dataset.labels.label_string(item.tags[i]);
      }
      out << '\n';
    }
    out << '\n';
  }
}

PartialDataset read_conll_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  return read_conll(in);
}

void write_conll_file(const PartialDataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write corpus file: " + path);
  write_conll(dataset, out);
}

namespace {

struct Mention {
  std::size_t item;
  Span span;
};

std::vector<Mention> collect_mentions(const PartialDataset& gold) {
  std::vector<Mention> mentions;
  for (std::size_t i = 0; i < gold.items.size(); ++i) {
    for (const Span& s : spans_from_tags(gold.labels, gold.items[i].tags)) {
      mentions.push_back(Mention{i, s});
    }
  }
  return mentions;
}

std::size_t round_half_up(double x) {
  return static_cast<std::size_t>(std::floor(x + 0.5));
}

PartialDataset corrupted_from_kept(const PartialDataset& gold,
                                   const std::vector<Mention>& kept,
                                   const char* scheme, double rho,
                                   std::uint64_t seed) {
  PartialDataset out;
  out.labels = gold.labels;
  out.provenance = Provenance{scheme, rho, seed};
  out.items.reserve(gold.items.size());
  for (const auto& item : gold.items) {
    DatasetItem corrupted;
    corrupted.sentence = item.sentence;
    corrupted.tags.assign(item.tags.size(), kUnannotated);
    corrupted.gold = item.tags;
    out.items.push_back(std::move(corrupted));
  }
  for (const Mention& m : kept) {
    auto& tags = out.items[m.item].tags;
    for (std::size_t i = m.span.start; i < m.span.end; ++i) {
      tags[i] = i == m.span.start ? gold.labels.begin_of(m.span.type)
                                  : gold.labels.inside_of(m.span.type);
    }
  }
  return out;
}

void check_gold_input(const PartialDataset& gold, double rho) {
  if (!(rho > 0.0 && rho <= 1.0)) {
    throw std::invalid_argument("corruption: rho must be in (0, 1]");
  }
  if (!gold.fully_annotated()) {
    throw std::invalid_argument("corruption requires a fully annotated dataset");
  }
}

PartialDataset unchanged_with_warning(const PartialDataset& gold) {
  PartialDataset out = gold;
  out.warning = true;
  return out;
}

}  // namespace

PartialDataset corrupt_random(const PartialDataset& gold, double rho,
                              std::uint64_t seed) {
  check_gold_input(gold, rho);
  std::vector<Mention> mentions = collect_mentions(gold);
  if (mentions.empty()) return unchanged_with_warning(gold);

  std::size_t keep = round_half_up(rho * static_cast<double>(mentions.size()));
  Rng rng(seed);
  rng.shuffle(mentions);
  mentions.resize(keep);
  return corrupted_from_kept(gold, mentions, "random", rho, seed);
}

PartialDataset corrupt_entity_based(const PartialDataset& gold, double rho,
                                    std::uint64_t seed) {
  check_gold_input(gold, rho);
  std::vector<Mention> mentions = collect_mentions(gold);
  if (mentions.empty()) return unchanged_with_warning(gold);

  auto surface = [&](const Mention& m) {
    std::string key;
    const auto& toks = gold.items[m.item].sentence.tokens;
    for (std::size_t i = m.span.start; i < m.span.end; ++i) {
      if (!key.empty()) key += '\x1f';
      key += toks[i];
    }
    return key;
  };

  // distinct surface forms in order of first appearance
  std::vector<std::string> forms;
  std::map<std::string, std::size_t> form_count;
  for (const Mention& m : mentions) {
    std::string key = surface(m);
    if (form_count.emplace(key, 0).second) forms.push_back(key);
    ++form_count[key];
  }

  std::size_t target = round_half_up(rho * static_cast<double>(mentions.size()));
  Rng rng(seed);
  rng.shuffle(forms);

  std::unordered_set<std::string> removed;
  std::size_t remaining = mentions.size();
  for (const std::string& f : forms) {
    if (remaining <= target) break;
    removed.insert(f);
    remaining -= form_count[f];
  }

  std::vector<Mention> kept;
  for (const Mention& m : mentions) {
    if (!removed.count(surface(m))) kept.push_back(m);
  }
  return corrupted_from_kept(gold, kept, "entity", rho, seed);
}

PartialDataset corrupt(const PartialDataset& gold, const CorruptionConfig& config) {
  return config.scheme == CorruptionScheme::RandomBased
             ? corrupt_random(gold, config.rho, config.seed)
             : corrupt_entity_based(gold, config.rho, config.seed);
}

PartialDataset generate_synthetic(const SynthConfig& config) {
  if (config.filler.empty()) {
    throw std::invalid_argument("generate_synthetic: filler vocabulary is empty");
  }
  if (config.lexicons.empty()) {
    throw std::invalid_argument("generate_synthetic: no entity lexicons");
  }
  if (config.min_length == 0 || config.max_length < config.min_length) {
    throw std::invalid_argument("generate_synthetic: bad length range");
  }
  std::unordered_set<std::string> filler_set(config.filler.begin(),
                                             config.filler.end());
  std::vector<EntityType> types;
  for (const auto& [type, entries] : config.lexicons) {
    types.push_back(type);
    if (entries.empty()) {
      throw std::invalid_argument("generate_synthetic: empty lexicon for type " +
                                  type.name);
    }
    for (const auto& entry : entries) {
      if (entry.empty()) {
        throw std::invalid_argument("generate_synthetic: empty lexicon entry");
      }
      for (const auto& tok : entry) {
        if (filler_set.count(tok)) {
          throw std::invalid_argument(
              "generate_synthetic: lexicon token '" + tok +
              "' also appears in the filler vocabulary");
        }
      }
    }
  }

  PartialDataset ds;
  ds.labels = LabelSet::build(types);
  ds.provenance = Provenance{"synthetic", 0.0, config.seed};

  Rng rng(config.seed);
  for (std::size_t s = 0; s < config.num_sentences; ++s) {
    std::size_t len = config.min_length +
                      rng.below(config.max_length - config.min_length + 1);
    DatasetItem item;
    std::size_t pos = 0;
    while (pos < len) {
      bool entity = rng.unit() < config.entity_prob;
      if (entity) {
        std::size_t type = rng.below(config.lexicons.size());
        const auto& entries = config.lexicons[type].second;
        const auto& entry = entries[rng.below(entries.size())];
        if (pos + entry.size() <= len) {
          for (std::size_t i = 0; i < entry.size(); ++i) {
            item.sentence.tokens.push_back(entry[i]);
            item.tags.push_back(i == 0 ? ds.labels.begin_of(static_cast<int>(type))
                                       : ds.labels.inside_of(static_cast<int>(type)));
          }
          pos += entry.size();
          continue;
        }
      }
      item.sentence.tokens.push_back(config.filler[rng.below(config.filler.size())]);
      item.tags.push_back(LabelSet::outside());
      ++pos;
    }
    ds.items.push_back(std::move(item));
  }
  return ds;
}

}  // namespace seqtag
