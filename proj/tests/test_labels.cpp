#include <doctest.h>

#include "seqtag/labels.hpp"
#include "seqtag/rng.hpp"

using namespace seqtag;

namespace {
LabelSet per_loc() { return LabelSet::build({{"PER"}, {"LOC"}}); }
}  // namespace

TEST_CASE("label set ordering and size") {
  LabelSet ls = per_loc();
  CHECK(ls.size() == 5);
  CHECK(ls.label_string(0) == "O");
  CHECK(ls.label_string(1) == "B-PER");
  CHECK(ls.label_string(2) == "I-PER");
  CHECK(ls.label_string(3) == "B-LOC");
  CHECK(ls.label_string(4) == "I-LOC");

  LabelSet one = LabelSet::build({{"X"}});
  CHECK(one.size() == 3);
  CHECK(one.label_string(2) == "I-X");
}

TEST_CASE("label set construction errors") {
  CHECK_THROWS(LabelSet::build({}));
  CHECK_THROWS(LabelSet::build({{"PER"}, {"PER"}}));
  CHECK_THROWS(LabelSet::build({{""}}));
  CHECK_THROWS(LabelSet::build({{"A-B"}}));
  CHECK_THROWS(LabelSet::build({{"A B"}}));
  CHECK_THROWS(LabelSet::build({{"A|B"}}));
}

TEST_CASE("label string parsing is exact and case-sensitive") {
  LabelSet ls = per_loc();
  CHECK(ls.parse_label("O") == 0);
  CHECK(ls.parse_label("B-LOC") == 3);
  CHECK(ls.parse_label("b-loc") == -1);
  CHECK(ls.parse_label("-") == -1);
  CHECK(ls.parse_label("B-ORG") == -1);
}

TEST_CASE("spans from tags") {
  LabelSet ls = per_loc();
  const int O = 0, BP = 1, IP = 2, BL = 3;

  auto spans = spans_from_tags(ls, {BP, IP, O, BL});
  REQUIRE(spans.size() == 2);
  CHECK(spans[0] == Span{0, 2, 0});
  CHECK(spans[1] == Span{3, 4, 1});

  // orphan Inside repaired as Begin
  spans = spans_from_tags(ls, {O, IP, IP});
  REQUIRE(spans.size() == 1);
  CHECK(spans[0] == Span{1, 3, 0});

  CHECK(spans_from_tags(ls, {O, O}).empty());
}

TEST_CASE("tags from spans and errors") {
  LabelSet ls = per_loc();
  CHECK(tags_from_spans(ls, {Span{0, 2, 0}}, 3) == std::vector<int>{1, 2, 0});
  CHECK(tags_from_spans(ls, {}, 2) == std::vector<int>{0, 0});
  CHECK_THROWS(tags_from_spans(ls, {Span{0, 2, 0}, Span{1, 3, 1}}, 3));
  CHECK_THROWS(tags_from_spans(ls, {Span{1, 4, 0}}, 3));
}

TEST_CASE("span round trip on well-formed sequences") {
  LabelSet ls = per_loc();
  Rng rng(7);
  for (int iter = 0; iter < 50; ++iter) {
    std::size_t n = 1 + rng.below(10);
    std::vector<Span> spans;
    std::size_t pos = 0;
    while (pos < n) {
      if (rng.unit() < 0.4) {
        std::size_t len = 1 + rng.below(3);
        len = std::min(len, n - pos);
        spans.push_back({pos, pos + len, static_cast<int>(rng.below(2))});
        pos += len;
      } else {
        ++pos;
      }
    }
    auto tags = tags_from_spans(ls, spans, n);
    CHECK(spans_from_tags(ls, tags) == spans);
  }
}

TEST_CASE("structural transitions follow BIO legality") {
  LabelSet ls = per_loc();
  auto st = structural_transitions(ls);
  const int O = 0, BP = 1, IP = 2, BL = 3, IL = 4;
  CHECK_FALSE(st.transition(O, IP));
  CHECK(st.transition(BP, IP));
  CHECK_FALSE(st.transition(BP, IL));
  CHECK(st.transition(IP, IP));
  CHECK(st.transition(O, BL));
  CHECK(st.transition(BL, O));
  CHECK_FALSE(st.transition(BL, IP));
  // sentence-initial: no Inside
  CHECK(st.initial[O] != 0);
  CHECK(st.initial[BP] != 0);
  CHECK(st.initial[IP] == 0);
  CHECK(st.initial[IL] == 0);
}

TEST_CASE("structural transitions depend only on BIO kinds") {
  auto a = structural_transitions(LabelSet::build({{"PER"}, {"LOC"}}));
  auto b = structural_transitions(LabelSet::build({{"AA"}, {"BB"}}));
  CHECK(a.allowed == b.allowed);
  CHECK(a.initial == b.initial);
}
