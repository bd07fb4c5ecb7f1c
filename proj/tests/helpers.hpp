// Shared test utilities: random lattice/mask generation and oracle math.

#ifndef SEQTAG_TESTS_HELPERS_HPP
#define SEQTAG_TESTS_HELPERS_HPP

#include <cmath>
#include <functional>
#include <vector>

#include "seqtag/lattice.hpp"
#include "seqtag/objectives.hpp"
#include "seqtag/qestimate.hpp"
#include "seqtag/rng.hpp"

namespace testutil {

inline seqtag::Lattice random_lattice(seqtag::Rng& rng, std::size_t n, std::size_t L,
                                      double scale = 2.0) {
  seqtag::Lattice lat(n, L);
  auto draw = [&] { return (rng.unit() * 2.0 - 1.0) * scale; };
  for (auto& v : lat.emit) v = draw();
  for (auto& v : lat.trans) v = draw();
  for (auto& v : lat.start) v = draw();
  for (auto& v : lat.stop) v = draw();
  return lat;
}

// Every row keeps at least one allowed label; ~30% of rows become singletons.
inline seqtag::AllowedMask random_mask(seqtag::Rng& rng, std::size_t n, std::size_t L) {
  seqtag::AllowedMask mask(n, L, true);
  for (std::size_t t = 0; t < n; ++t) {
    if (rng.unit() < 0.3) {
      mask.restrict_to(t, static_cast<std::size_t>(rng.below(L)));
      continue;
    }
    for (std::size_t l = 0; l < L; ++l) {
      if (rng.unit() < 0.35) mask.set(t, l, false);
    }
    bool any = false;
    for (std::size_t l = 0; l < L; ++l) any = any || mask.allows(t, l);
    if (!any) mask.set(t, static_cast<std::size_t>(rng.below(L)), true);
  }
  return mask;
}

// Random proper row distributions over the allowed labels, in log space.
inline seqtag::QFactorized random_q(seqtag::Rng& rng, const seqtag::AllowedMask& mask) {
  seqtag::QFactorized q;
  q.mode = seqtag::QMode::Soft;
  q.n = mask.n();
  q.L = mask.L();
  q.logw.assign(q.n * q.L, seqtag::kNegInf);
  for (std::size_t t = 0; t < q.n; ++t) {
    double total = 0.0;
    std::vector<double> w(q.L, 0.0);
    for (std::size_t l = 0; l < q.L; ++l) {
      if (mask.allows(t, l)) {
        w[l] = 0.05 + rng.unit();
        total += w[l];
      }
    }
    for (std::size_t l = 0; l < q.L; ++l) {
      if (mask.allows(t, l)) q.logw[t * q.L + l] = std::log(w[l] / total);
    }
  }
  return q;
}

// Central finite differences of `f` over every lattice coordinate, compared
// against the analytic gradient. Returns the worst relative error.
inline double gradient_check(const seqtag::Lattice& lat,
                             const std::function<double(const seqtag::Lattice&)>& f,
                             const seqtag::LatticeGradient& grad, double h = 1e-5) {
  double worst = 0.0;
  auto probe = [&](std::vector<double> seqtag::Lattice::*field, const std::vector<double>& g) {
    seqtag::Lattice work = lat;
    auto& v = work.*field;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double saved = v[i];
      v[i] = saved + h;
      const double up = f(work);
      v[i] = saved - h;
      const double down = f(work);
      v[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double denom = std::max({std::fabs(fd), std::fabs(g[i]), 1e-3});
      worst = std::max(worst, std::fabs(fd - g[i]) / denom);
    }
  };
  probe(&seqtag::Lattice::emit, grad.d_emit);
  probe(&seqtag::Lattice::trans, grad.d_trans);
  probe(&seqtag::Lattice::start, grad.d_start);
  probe(&seqtag::Lattice::stop, grad.d_stop);
  return worst;
}

inline double oracle_log_partition(const seqtag::Lattice& lat,
                                   const seqtag::AllowedMask& mask) {
  auto paths = seqtag::enumerate_paths_bruteforce(lat, mask);
  std::vector<double> scores;
  scores.reserve(paths.size());
  for (const auto& p : paths) scores.push_back(p.score);
  return seqtag::log_sum_exp(scores.data(), scores.size());
}

}  // namespace testutil

#endif  // SEQTAG_TESTS_HELPERS_HPP
