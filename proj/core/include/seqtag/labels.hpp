// BIO label alphabet: entity types, span<->tag conversion, transition legality.

#ifndef SEQTAG_LABELS_HPP
#define SEQTAG_LABELS_HPP

#include <cstddef>
#include <string>
#include <vector>

namespace seqtag {

struct EntityType {
  std::string name;  // short identifier, e.g. "PER"

  bool operator==(const EntityType&) const = default;
};

enum class LabelKind { Outside, Begin, Inside };

struct Label {
  LabelKind kind = LabelKind::Outside;
  int type = -1;  // index into LabelSet::types; -1 for Outside
};

// Half-open token span [start, end) of one entity type.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  int type = 0;

  bool operator==(const Span&) const = default;
};

// Ordered label alphabet: index 0 is O, then B-t, I-t per declared type.
// Immutable after construction; indices are stable across runs.
class LabelSet {
 public:
  static LabelSet build(const std::vector<EntityType>& types);

  std::size_t size() const { return 1 + 2 * types_.size(); }
  std::size_t num_types() const { return types_.size(); }
  const std::vector<EntityType>& types() const { return types_; }

  static constexpr int outside() { return 0; }
  int begin_of(int type) const { return 1 + 2 * type; }
  int inside_of(int type) const { return 2 + 2 * type; }

  Label label_at(int index) const;
  int index_of(const Label& label) const;

  // "O" | "B-<type>" | "I-<type>", case-sensitive.
  std::string label_string(int index) const;
  // Returns -1 if the string names no label in this set ("-" included).
  int parse_label(const std::string& s) const;

  int type_index(const std::string& name) const;  // -1 if absent

  bool operator==(const LabelSet&) const = default;

 private:
  std::vector<EntityType> types_;
};

// Maximal entity mentions from a tag sequence. An Inside tag with no
// compatible predecessor is repaired as a Begin (conlleval convention).
std::vector<Span> spans_from_tags(const LabelSet& labels,
                                  const std::vector<int>& tags);

// Inverse of spans_from_tags on well-formed input. Throws on overlap or
// out-of-range spans.
std::vector<int> tags_from_spans(const LabelSet& labels,
                                 const std::vector<Span>& spans,
                                 std::size_t length);

// Hard BIO legality. allowed[a*L+b] iff b may follow a; initial[l] iff l may
// start a sentence (no I-*); every label may end one.
struct StructuralTransitions {
  std::size_t L = 0;
  std::vector<char> allowed;  // L*L row-major
  std::vector<char> initial;  // L

  bool transition(int a, int b) const { return allowed[a * L + b] != 0; }
};

StructuralTransitions structural_transitions(const LabelSet& labels);

}  // namespace seqtag

#endif  // SEQTAG_LABELS_HPP
