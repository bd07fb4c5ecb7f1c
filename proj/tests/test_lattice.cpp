#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "helpers.hpp"
#include "seqtag/lattice.hpp"
#include "seqtag/rng.hpp"

using namespace seqtag;

TEST_CASE("path score on simple lattices") {
  Lattice zero(3, 4);
  CHECK(path_score(zero, {0, 1, 2}) == doctest::Approx(0.0));

  Lattice lat(2, 2);
  lat.emit_at(0, 0) = 2.0;
  lat.emit_at(1, 1) = 3.0;
  CHECK(path_score(lat, {0, 1}) == doctest::Approx(5.0));

  CHECK_THROWS(path_score(lat, {0}));
}

TEST_CASE("path score matches manual recomputation on random lattices") {
  Rng rng(11);
  for (int iter = 0; iter < 30; ++iter) {
    std::size_t n = 1 + rng.below(6), L = 2 + rng.below(4);
    Lattice lat = testutil::random_lattice(rng, n, L);
    std::vector<int> path(n);
    for (auto& p : path) p = static_cast<int>(rng.below(L));
    double expect = lat.start[path[0]] + lat.stop[path[n - 1]];
    for (std::size_t t = 0; t < n; ++t) expect += lat.emit_at(t, path[t]);
    for (std::size_t t = 1; t < n; ++t) expect += lat.trans_at(path[t - 1], path[t]);
    CHECK(path_score(lat, path) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("log partition on uniform lattices") {
  Lattice a(1, 5);
  CHECK(log_partition(a, AllowedMask::full(1, 5)) == doctest::Approx(std::log(5.0)));
  Lattice b(3, 2);
  CHECK(log_partition(b, AllowedMask::full(3, 2)) == doctest::Approx(3 * std::log(2.0)));
}

TEST_CASE("empty mask row rejected") {
  AllowedMask mask(2, 3, false);
  mask.set(0, 1, true);
  Lattice lat(2, 3);
  CHECK_THROWS(log_partition(lat, mask));
  CHECK_THROWS(posterior_marginals(lat, mask));
  CHECK_THROWS(viterbi(lat, mask));
}

TEST_CASE("inference matches the enumeration oracle on random instances") {
  Rng rng(23);
  for (int iter = 0; iter < 60; ++iter) {
    std::size_t n = 1 + rng.below(6), L = 2 + rng.below(4);
    Lattice lat = testutil::random_lattice(rng, n, L);
    AllowedMask mask = testutil::random_mask(rng, n, L);
    auto paths = enumerate_paths_bruteforce(lat, mask);

    // partition
    CHECK(log_partition(lat, mask) ==
          doctest::Approx(testutil::oracle_log_partition(lat, mask)).epsilon(1e-10));

    // marginals
    double log_z = testutil::oracle_log_partition(lat, mask);
    Marginals m = posterior_marginals(lat, mask);
    std::vector<double> tok(n * L, 0.0);
    for (const auto& p : paths) {
      double w = std::exp(p.score - log_z);
      for (std::size_t t = 0; t < n; ++t) tok[t * L + p.labels[t]] += w;
    }
    for (std::size_t i = 0; i < tok.size(); ++i) {
      CHECK(std::fabs(m.token[i] - tok[i]) < 1e-8);
    }

    // viterbi
    double best = kNegInf;
    for (const auto& p : paths) best = std::max(best, p.score);
    CHECK(viterbi(lat, mask).score == doctest::Approx(best).epsilon(1e-10));
  }
}

TEST_CASE("pair marginals are consistent with token marginals") {
  Rng rng(31);
  for (int iter = 0; iter < 20; ++iter) {
    std::size_t n = 2 + rng.below(5), L = 2 + rng.below(4);
    Lattice lat = testutil::random_lattice(rng, n, L);
    AllowedMask mask = testutil::random_mask(rng, n, L);
    Marginals m = posterior_marginals(lat, mask);
    for (std::size_t t = 0; t + 1 < n; ++t) {
      for (std::size_t a = 0; a < L; ++a) {
        double row = 0.0;
        for (std::size_t b = 0; b < L; ++b) row += m.pair_at(t, a, b);
        CHECK(std::fabs(row - m.token_at(t, a)) < 1e-9);
      }
    }
    for (std::size_t t = 0; t < n; ++t) {
      double sum = 0.0;
      for (std::size_t l = 0; l < L; ++l) {
        sum += m.token_at(t, l);
        if (!mask.allows(t, l)) CHECK(m.token_at(t, l) == 0.0);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("masking by -inf emissions equals masking by AllowedMask") {
  Rng rng(37);
  for (int iter = 0; iter < 20; ++iter) {
    std::size_t n = 1 + rng.below(5), L = 2 + rng.below(4);
    Lattice lat = testutil::random_lattice(rng, n, L);
    AllowedMask mask = testutil::random_mask(rng, n, L);
    Lattice inf_lat = lat;
    for (std::size_t t = 0; t < n; ++t) {
      for (std::size_t l = 0; l < L; ++l) {
        if (!mask.allows(t, l)) inf_lat.emit_at(t, l) = kNegInf;
      }
    }
    CHECK(log_partition(lat, mask) ==
          doctest::Approx(log_partition(inf_lat, AllowedMask::full(n, L))).epsilon(1e-10));
  }
}

TEST_CASE("viterbi respects masks and simple cases") {
  Lattice lat(2, 2);
  lat.emit_at(0, 0) = 2.0;
  lat.emit_at(1, 1) = 3.0;
  auto best = viterbi(lat, AllowedMask::full(2, 2));
  CHECK(best.labels == std::vector<int>{0, 1});
  CHECK(best.score == doctest::Approx(5.0));

  AllowedMask forced(2, 2, true);
  forced.restrict_to(0, 1);
  auto constrained = viterbi(lat, forced);
  CHECK(constrained.labels == std::vector<int>{1, 1});
  CHECK(constrained.score == doctest::Approx(3.0));
}

TEST_CASE("viterbi dominates random allowed paths") {
  Rng rng(41);
  for (int iter = 0; iter < 10; ++iter) {
    std::size_t n = 1 + rng.below(6), L = 2 + rng.below(4);
    Lattice lat = testutil::random_lattice(rng, n, L);
    AllowedMask mask = testutil::random_mask(rng, n, L);
    auto best = viterbi(lat, mask);
    for (int s = 0; s < 100; ++s) {
      std::vector<int> path(n);
      for (std::size_t t = 0; t < n; ++t) {
        int l;
        do {
          l = static_cast<int>(rng.below(L));
        } while (!mask.allows(t, l));
        path[t] = l;
      }
      CHECK(best.score >= path_score(lat, path) - 1e-12);
    }
  }
}

TEST_CASE("kbest matches the enumeration oracle") {
  Rng rng(43);
  for (int iter = 0; iter < 40; ++iter) {
    std::size_t n = 1 + rng.below(5), L = 2 + rng.below(4);
    Lattice lat = testutil::random_lattice(rng, n, L);
    AllowedMask mask = testutil::random_mask(rng, n, L);
    auto paths = enumerate_paths_bruteforce(lat, mask);
    std::stable_sort(paths.begin(), paths.end(), [](const auto& a, const auto& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.labels < b.labels;
    });
    std::size_t k = 1 + rng.below(5);
    auto kb = kbest_viterbi(lat, mask, k);
    REQUIRE(kb.size() == std::min(k, paths.size()));
    for (std::size_t i = 0; i < kb.size(); ++i) {
      CHECK(std::fabs(kb[i].score - paths[i].score) < 1e-9);
      CHECK(kb[i].labels == paths[i].labels);
    }
    // first element equals viterbi
    if (!kb.empty()) CHECK(kb[0].labels == viterbi(lat, mask).labels);
  }
}

TEST_CASE("kbest paths are distinct, sorted, mask compliant") {
  Rng rng(47);
  std::size_t n = 4, L = 3;
  Lattice lat = testutil::random_lattice(rng, n, L);
  AllowedMask mask = testutil::random_mask(rng, n, L);
  auto kb = kbest_viterbi(lat, mask, 10);
  std::set<std::vector<int>> seen;
  for (std::size_t i = 0; i < kb.size(); ++i) {
    CHECK(seen.insert(kb[i].labels).second);
    if (i > 0) CHECK(kb[i - 1].score >= kb[i].score - 1e-12);
    for (std::size_t t = 0; t < n; ++t) CHECK(mask.allows(t, kb[i].labels[t]));
  }
}

TEST_CASE("enumeration and path counting") {
  // one annotated token among six, five labels
  AllowedMask mask(6, 5, true);
  mask.restrict_to(2, 1);
  CHECK(count_paths(mask) == 3125);
  Lattice lat(6, 5);
  CHECK(enumerate_paths_bruteforce(lat, mask).size() == 3125);

  AllowedMask all_singleton(3, 4, false);
  for (std::size_t t = 0; t < 3; ++t) all_singleton.set(t, 0, true);
  CHECK(count_paths(all_singleton) == 1);
  CHECK(enumerate_paths_bruteforce(Lattice(3, 4), all_singleton).size() == 1);

  AllowedMask two_rows(2, 3, true);
  two_rows.set(0, 0, false);  // row of 2
  CHECK(count_paths(two_rows) == 6);

  CHECK(enumerate_paths_bruteforce(Lattice(2, 2), AllowedMask::full(2, 2)).size() == 4);
}

TEST_CASE("enumeration guard") {
  AllowedMask big = AllowedMask::full(10, 5);  // 5^10 ~ 9.7e6
  Lattice lat(10, 5);
  CHECK_THROWS(enumerate_paths_bruteforce(lat, big));
}

TEST_CASE("normalized path probability lies in (0, 1]") {
  Rng rng(53);
  Lattice lat = testutil::random_lattice(rng, 4, 3);
  AllowedMask mask = AllowedMask::full(4, 3);
  double log_z = log_partition(lat, mask);
  for (const auto& p : enumerate_paths_bruteforce(lat, mask)) {
    double prob = std::exp(p.score - log_z);
    CHECK(prob > 0.0);
    CHECK(prob <= 1.0 + 1e-12);
  }
}

TEST_CASE("structural constraint transform blocks illegal transitions") {
  LabelSet ls = LabelSet::build({{"PER"}});
  auto st = structural_transitions(ls);
  Rng rng(59);
  Lattice lat = testutil::random_lattice(rng, 4, ls.size());
  Lattice constrained = apply_structural_constraints(lat, st);
  auto best = viterbi(constrained, AllowedMask::full(4, ls.size()));
  // decoded sequence never starts with Inside and never has O -> I-PER
  CHECK(best.labels[0] != 2);
  for (std::size_t t = 1; t < 4; ++t) {
    if (best.labels[t] == 2) CHECK(best.labels[t - 1] != 0);
  }
}
