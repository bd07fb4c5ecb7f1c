#include "seqtag/objectives.hpp"

#include <cmath>
#include <stdexcept>

namespace seqtag {

namespace {

// d logZ / d score = posterior expectation of the corresponding indicator.
LatticeGradient gradient_of_log_partition(const Lattice& lat,
                                          const AllowedMask& mask) {
  Marginals m = posterior_marginals(lat, mask);
  const std::size_t n = lat.n, L = lat.L;
  LatticeGradient g(n, L);
  g.d_emit = m.token;
  for (std::size_t t = 0; t + 1 < n; ++t) {
    for (std::size_t a = 0; a < L; ++a) {
      for (std::size_t b = 0; b < L; ++b) {
        g.d_trans[a * L + b] += m.pair_at(t, a, b);
      }
    }
  }
  for (std::size_t l = 0; l < L; ++l) {
    g.d_start[l] = m.token_at(0, l);
    g.d_stop[l] = m.token_at(n - 1, l);
  }
  return g;
}

void subtract_path_indicators(LatticeGradient& g, const std::vector<int>& labels,
                              double weight) {
  const std::size_t n = g.n, L = g.L;
  for (std::size_t t = 0; t < n; ++t) g.d_emit[t * L + labels[t]] -= weight;
  for (std::size_t t = 1; t < n; ++t) {
    g.d_trans[labels[t - 1] * L + labels[t]] -= weight;
  }
  g.d_start[labels[0]] -= weight;
  g.d_stop[labels[n - 1]] -= weight;
}

void check_q(const Lattice& lat, const AllowedMask& mask, const QFactorized& q) {
  if (q.n != lat.n || q.L != lat.L) {
    throw std::invalid_argument("q shape does not match lattice");
  }
  for (std::size_t t = 0; t < q.n; ++t) {
    for (std::size_t l = 0; l < q.L; ++l) {
      if (!mask.allows(t, l) && q.at(t, l) != kNegInf) {
        throw std::invalid_argument("q puts weight on a masked label");
      }
    }
  }
}

}  // namespace

void LatticeGradient::axpy(double a, const LatticeGradient& other) {
  for (std::size_t i = 0; i < d_emit.size(); ++i) d_emit[i] += a * other.d_emit[i];
  for (std::size_t i = 0; i < d_trans.size(); ++i) d_trans[i] += a * other.d_trans[i];
  for (std::size_t i = 0; i < d_start.size(); ++i) d_start[i] += a * other.d_start[i];
  for (std::size_t i = 0; i < d_stop.size(); ++i) d_stop[i] += a * other.d_stop[i];
}

LossResult nll_loss(const Lattice& lat, const std::vector<int>& gold) {
  AllowedMask full = AllowedMask::full(lat.n, lat.L);
  LossResult r;
  r.loss = log_partition(lat, full) - path_score(lat, gold);
  r.grad = gradient_of_log_partition(lat, full);
  subtract_path_indicators(r.grad, gold, 1.0);
  return r;
}

LossResult fuzzy_loss(const Lattice& lat, const AllowedMask& mask) {
  AllowedMask full = AllowedMask::full(lat.n, lat.L);
  LossResult r;
  r.loss = log_partition(lat, full) - log_partition(lat, mask);
  r.grad = gradient_of_log_partition(lat, full);
  r.grad.axpy(-1.0, gradient_of_log_partition(lat, mask));
  return r;
}

LossResult weighted_crf_loss(const Lattice& lat, const AllowedMask& mask,
                             const QFactorized& q) {
  check_q(lat, mask, q);
  Lattice augmented = lat;
  for (std::size_t i = 0; i < augmented.emit.size(); ++i) {
    augmented.emit[i] += q.logw[i];
  }
  AllowedMask full = AllowedMask::full(lat.n, lat.L);
  LossResult r;
  r.loss = log_partition(lat, full) - log_partition(augmented, mask);
  r.grad = gradient_of_log_partition(lat, full);
  r.grad.axpy(-1.0, gradient_of_log_partition(augmented, mask));
  return r;
}

KBestLossResult kbest_aux_loss(const Lattice& lat, const AllowedMask& mask,
                               std::size_t k,
                               const std::vector<ScoredPath>* fixed_paths) {
  KBestLossResult r;
  r.paths = fixed_paths ? *fixed_paths : kbest_viterbi(lat, mask, k);
  if (r.paths.empty()) throw std::invalid_argument("kbest_aux_loss: no paths");

  // Path-set scores are recomputed against this lattice so that a fixed set
  // carried across updates stays consistent with the current parameters.
  std::vector<double> scores(r.paths.size());
  for (std::size_t i = 0; i < r.paths.size(); ++i) {
    scores[i] = path_score(lat, r.paths[i].labels);
  }
  double lse = log_sum_exp(scores.data(), scores.size());

  AllowedMask full = AllowedMask::full(lat.n, lat.L);
  r.loss = log_partition(lat, full) - lse;
  r.grad = gradient_of_log_partition(lat, full);
  for (std::size_t i = 0; i < r.paths.size(); ++i) {
    subtract_path_indicators(r.grad, r.paths[i].labels, std::exp(scores[i] - lse));
  }
  return r;
}

double lambda_at(std::size_t step, std::size_t total_steps, double gamma) {
  if (total_steps == 0) throw std::invalid_argument("lambda_at: B must be >= 1");
  if (!(gamma > 0.0)) throw std::invalid_argument("lambda_at: gamma must be > 0");
  double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return std::exp(gamma * (frac - 1.0));
}

CombinedLossResult combined_loss(const Lattice& lat, const AllowedMask& mask,
                         const QFactorized& q, std::size_t k, double lambda,
                         const std::vector<ScoredPath>* fixed_paths) {
  if (lambda < 0.0 || lambda > 1.0) {
    throw std::invalid_argument("combined_loss: lambda outside [0,1]");
  }
  LossResult weighted = weighted_crf_loss(lat, mask, q);
  KBestLossResult kbest = kbest_aux_loss(lat, mask, k, fixed_paths);

  CombinedLossResult r;
  r.breakdown.weighted_term = weighted.loss;
  r.breakdown.kbest_term = kbest.loss;
  r.breakdown.lambda = lambda;
  r.breakdown.total = (1.0 - lambda) * weighted.loss + lambda * kbest.loss;
  r.grad = LatticeGradient(lat.n, lat.L);
  r.grad.axpy(1.0 - lambda, weighted.grad);
  r.grad.axpy(lambda, kbest.grad);
  return r;
}

}  // namespace seqtag
