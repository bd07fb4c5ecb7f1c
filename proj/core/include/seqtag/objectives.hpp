// Training objectives over a scored lattice, each with its analytic gradient
// with respect to the lattice scores: plain NLL, fuzzy (all possible paths),
// q-weighted, the auxiliary K-best term, and their annealed combination.

#ifndef SEQTAG_OBJECTIVES_HPP
#define SEQTAG_OBJECTIVES_HPP

#include "seqtag/lattice.hpp"
#include "seqtag/qestimate.hpp"

namespace seqtag {

enum class LossKind { NLL, Fuzzy, Weighted, Combined };
enum class KBestRefresh { PerEpoch, PerStep };

struct LossConfig {
  LossKind kind = LossKind::Combined;
  std::size_t k = 5;
  double gamma = 2.0;
  KBestRefresh kbest_refresh = KBestRefresh::PerEpoch;
};

// Adjoint of a loss with respect to every lattice score.
struct LatticeGradient {
  std::size_t n = 0;
  std::size_t L = 0;
  std::vector<double> d_emit;   // n*L
  std::vector<double> d_trans;  // L*L
  std::vector<double> d_start;  // L
  std::vector<double> d_stop;   // L

  LatticeGradient() = default;
  LatticeGradient(std::size_t n_, std::size_t L_)
      : n(n_), L(L_), d_emit(n_ * L_, 0.0), d_trans(L_ * L_, 0.0),
        d_start(L_, 0.0), d_stop(L_, 0.0) {}

  void axpy(double a, const LatticeGradient& other);
};

struct LossResult {
  double loss = 0.0;
  LatticeGradient grad;
};

struct KBestLossResult {
  double loss = 0.0;
  LatticeGradient grad;
  std::vector<ScoredPath> paths;
};

struct LossBreakdown {
  double total = 0.0;
  double weighted_term = 0.0;
  double kbest_term = 0.0;
  double lambda = 0.0;
};

struct CombinedLossResult {
  LossBreakdown breakdown;
  LatticeGradient grad;
};

LossResult nll_loss(const Lattice& lat, const std::vector<int>& gold);

LossResult fuzzy_loss(const Lattice& lat, const AllowedMask& mask);

LossResult weighted_crf_loss(const Lattice& lat, const AllowedMask& mask,
                             const QFactorized& q);

// The K-best path set is treated as a constant during differentiation. When
// `fixed_paths` is given the decode is skipped and the supplied set is used.
KBestLossResult kbest_aux_loss(const Lattice& lat, const AllowedMask& mask,
                               std::size_t k,
                               const std::vector<ScoredPath>* fixed_paths = nullptr);

// Annealing weight exp(gamma * (b/B - 1)); reaches 1 at b = B.
double lambda_at(std::size_t step, std::size_t total_steps, double gamma);

CombinedLossResult combined_loss(const Lattice& lat, const AllowedMask& mask,
                         const QFactorized& q, std::size_t k, double lambda,
                         const std::vector<ScoredPath>* fixed_paths = nullptr);

}  // namespace seqtag

#endif  // SEQTAG_OBJECTIVES_HPP
