#include "seqtag/labels.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <unordered_set>

namespace seqtag {

namespace {

bool valid_type_name(const std::string& name) {
  if (name.empty()) return false;
  for (char c : name) {
    if (c == '-' || c == '|') return false;
    if (std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

}  // namespace

LabelSet LabelSet::build(const std::vector<EntityType>& types) {
  if (types.empty()) {
    throw std::invalid_argument("LabelSet: at least one entity type required");
  }
  std::unordered_set<std::string> seen;
  for (const auto& t : types) {
    if (!valid_type_name(t.name)) {
      throw std::invalid_argument("LabelSet: invalid type name '" + t.name + "'");
    }
    if (!seen.insert(t.name).second) {
      throw std::invalid_argument("LabelSet: duplicate type name '" + t.name + "'");
    }
  }
  LabelSet ls;
  ls.types_ = types;
  return ls;
}

Label LabelSet::label_at(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= size()) {
    throw std::out_of_range("LabelSet: label index out of range");
  }
  if (index == 0) return Label{LabelKind::Outside, -1};
  int t = (index - 1) / 2;
  return Label{(index - 1) % 2 == 0 ? LabelKind::Begin : LabelKind::Inside, t};
}

int LabelSet::index_of(const Label& label) const {
  switch (label.kind) {
    case LabelKind::Outside: return 0;
    case LabelKind::Begin: return begin_of(label.type);
    case LabelKind::Inside: return inside_of(label.type);
  }
  return -1;
}

std::string LabelSet::label_string(int index) const {
  Label l = label_at(index);
  switch (l.kind) {
    case LabelKind::Outside: return "O";
    case LabelKind::Begin: return "B-" + types_[l.type].name;
    case LabelKind::Inside: return "I-" + types_[l.type].name;
  }
  return {};
}

int LabelSet::parse_label(const std::string& s) const {
  if (s == "O") return 0;
  if (s.size() < 3 || s[1] != '-') return -1;
  int t = type_index(s.substr(2));
  if (t < 0) return -1;
  if (s[0] == 'B') return begin_of(t);
  if (s[0] == 'I') return inside_of(t);
  return -1;
}

int LabelSet::type_index(const std::string& name) const {
  for (std::size_t i = 0; i < types_.size(); ++i) {
    if (types_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

std::vector<Span> spans_from_tags(const LabelSet& labels,
                                  const std::vector<int>& tags) {
  std::vector<Span> spans;
  int open_type = -1;
  std::size_t open_start = 0;
  auto close = [&](std::size_t end) {
    if (open_type >= 0) {
      spans.push_back(Span{open_start, end, open_type});
      open_type = -1;
    }
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    Label l = labels.label_at(tags[i]);
    switch (l.kind) {
      case LabelKind::Outside:
        close(i);
        break;
      case LabelKind::Begin:
        close(i);
        open_type = l.type;
        open_start = i;
        break;
      case LabelKind::Inside:
        if (open_type != l.type) {
          // orphan Inside: repaired as Begin
          close(i);
          open_type = l.type;
          open_start = i;
        }
        break;
    }
  }
  close(tags.size());
  return spans;
}

std::vector<int> tags_from_spans(const LabelSet& labels,
                                 const std::vector<Span>& spans,
                                 std::size_t length) {
  std::vector<int> tags(length, LabelSet::outside());
  std::vector<char> taken(length, 0);
  for (const auto& s : spans) {
    if (s.start >= s.end || s.end > length) {
      throw std::invalid_argument("tags_from_spans: span out of range");
    }
    for (std::size_t i = s.start; i < s.end; ++i) {
      if (taken[i]) throw std::invalid_argument("tags_from_spans: overlapping spans");
      taken[i] = 1;
      tags[i] = i == s.start ? labels.begin_of(s.type) : labels.inside_of(s.type);
    }
  }
  return tags;
}

StructuralTransitions structural_transitions(const LabelSet& labels) {
  const std::size_t L = labels.size();
  StructuralTransitions st;
  st.L = L;
  st.allowed.assign(L * L, 1);
  st.initial.assign(L, 1);
  for (std::size_t b = 0; b < L; ++b) {
    Label lb = labels.label_at(static_cast<int>(b));
    if (lb.kind != LabelKind::Inside) continue;
    st.initial[b] = 0;
    for (std::size_t a = 0; a < L; ++a) {
      Label la = labels.label_at(static_cast<int>(a));
      bool ok = (la.kind == LabelKind::Begin || la.kind == LabelKind::Inside) &&
                la.type == lb.type;
      st.allowed[a * L + b] = ok ? 1 : 0;
    }
  }
  return st;
}

}  // namespace seqtag
