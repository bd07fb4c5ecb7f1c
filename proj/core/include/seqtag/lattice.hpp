// Linear-chain lattice and all dynamic-programming inference over it:
// partition function, posterior marginals, (K-best) Viterbi, plus the
// brute-force enumeration used as a test oracle.

#ifndef SEQTAG_LATTICE_HPP
#define SEQTAG_LATTICE_HPP

#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "seqtag/labels.hpp"

namespace seqtag {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Log-potentials of one sentence: emission, transition, boundary scores.
// path score = start[y_0] + sum_t emit[t][y_t] + sum_t trans[y_{t-1}][y_t]
//            + stop[y_{n-1}].
struct Lattice {
  std::size_t n = 0;
  std::size_t L = 0;
  std::vector<double> emit;   // n*L row-major
  std::vector<double> trans;  // L*L row-major
  std::vector<double> start;  // L
  std::vector<double> stop;   // L

  Lattice() = default;
  Lattice(std::size_t n_, std::size_t L_)
      : n(n_), L(L_), emit(n_ * L_, 0.0), trans(L_ * L_, 0.0),
        start(L_, 0.0), stop(L_, 0.0) {}

  double& emit_at(std::size_t t, std::size_t l) { return emit[t * L + l]; }
  double emit_at(std::size_t t, std::size_t l) const { return emit[t * L + l]; }
  double& trans_at(std::size_t a, std::size_t b) { return trans[a * L + b]; }
  double trans_at(std::size_t a, std::size_t b) const { return trans[a * L + b]; }
};

// Per-token permitted labels. Rows of annotated tokens are singletons.
class AllowedMask {
 public:
  AllowedMask() = default;
  AllowedMask(std::size_t n, std::size_t L, bool all_allowed = true)
      : n_(n), L_(L), allow_(n * L, all_allowed ? 1 : 0) {}

  static AllowedMask full(std::size_t n, std::size_t L) { return {n, L, true}; }

  std::size_t n() const { return n_; }
  std::size_t L() const { return L_; }
  bool allows(std::size_t t, std::size_t l) const { return allow_[t * L_ + l] != 0; }
  void set(std::size_t t, std::size_t l, bool v) { allow_[t * L_ + l] = v ? 1 : 0; }
  void restrict_to(std::size_t t, std::size_t l);  // singleton row

  std::size_t row_size(std::size_t t) const;
  // Throws if any row is empty.
  void check_valid() const;

  bool operator==(const AllowedMask&) const = default;

 private:
  std::size_t n_ = 0;
  std::size_t L_ = 0;
  std::vector<char> allow_;
};

struct ScoredPath {
  std::vector<int> labels;
  double score = 0.0;
};

// Token and adjacent-pair posterior marginals under a mask.
struct Marginals {
  std::size_t n = 0;
  std::size_t L = 0;
  double log_z = 0.0;
  std::vector<double> token;  // n*L
  std::vector<double> pair;   // (n-1)*L*L, pair[t] couples tokens t and t+1

  double token_at(std::size_t t, std::size_t l) const { return token[t * L + l]; }
  double pair_at(std::size_t t, std::size_t a, std::size_t b) const {
    return pair[(t * L + a) * L + b];
  }
};

double log_sum_exp(const double* v, std::size_t n);

double path_score(const Lattice& lat, const std::vector<int>& labels);

double log_partition(const Lattice& lat, const AllowedMask& mask);

Marginals posterior_marginals(const Lattice& lat, const AllowedMask& mask);

// Max-scoring allowed path; ties broken by lowest label index at each
// backtrack step.
ScoredPath viterbi(const Lattice& lat, const AllowedMask& mask);

// Top-K allowed paths, strictly sorted by (score desc, lexicographic label
// order asc). Returns fewer than K iff fewer allowed paths exist.
std::vector<ScoredPath> kbest_viterbi(const Lattice& lat, const AllowedMask& mask,
                                      std::size_t k);

// Every allowed path with its score (test oracle). Throws if the number of
// allowed paths exceeds 10^6.
std::vector<ScoredPath> enumerate_paths_bruteforce(const Lattice& lat,
                                                   const AllowedMask& mask);

// Product of row cardinalities (no transition filtering); saturates at
// uint64 max.
std::uint64_t count_paths(const AllowedMask& mask);

// Decoding-time transform: sets BIO-illegal transitions and sentence-initial
// I-* starts to -inf.
Lattice apply_structural_constraints(Lattice lat, const StructuralTransitions& st);

}  // namespace seqtag

#endif  // SEQTAG_LATTICE_HPP
