#include "seqtag/qestimate.hpp"

#include <cmath>
#include <stdexcept>

namespace seqtag {

namespace {

QFactorized from_marginals(const Marginals& m, const AllowedMask& mask) {
  QFactorized q;
  q.n = m.n;
  q.L = m.L;
  q.logw.assign(m.n * m.L, kNegInf);
  for (std::size_t t = 0; t < m.n; ++t) {
    // renormalize over the allowed row; marginals already sum to 1 up to
    // floating error
    double sum = 0.0;
    for (std::size_t l = 0; l < m.L; ++l) {
      if (mask.allows(t, l)) sum += m.token_at(t, l);
    }
    for (std::size_t l = 0; l < m.L; ++l) {
      if (!mask.allows(t, l)) continue;
      double p = m.token_at(t, l) / sum;
      q.logw[t * m.L + l] = p > 0.0 ? std::log(p) : kNegInf;
    }
  }
  return q;
}

}  // namespace

QFactorized estimate_q_hard(const Lattice& lat, const AllowedMask& mask) {
  ScoredPath path = viterbi(lat, mask);
  QFactorized q = q_from_path(path.labels, lat.L);
  q.mode = QMode::Hard;
  return q;
}

QFactorized estimate_q_soft(const Lattice& lat, const AllowedMask& mask) {
  QFactorized q = from_marginals(posterior_marginals(lat, mask), mask);
  q.mode = QMode::Soft;
  q.temperature = 1.0;
  return q;
}

QFactorized estimate_q_interpolated(const Lattice& lat, const AllowedMask& mask,
                                    double temperature) {
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("estimate_q_interpolated: T must be > 0");
  }
  Lattice tempered = lat;
  for (double& v : tempered.emit) v /= temperature;
  for (double& v : tempered.trans) v /= temperature;
  for (double& v : tempered.start) v /= temperature;
  for (double& v : tempered.stop) v /= temperature;
  QFactorized q = from_marginals(posterior_marginals(tempered, mask), mask);
  q.mode = QMode::Interpolated;
  q.temperature = temperature;
  return q;
}

QFactorized q_from_path(const std::vector<int>& labels, std::size_t L) {
  QFactorized q;
  q.mode = QMode::Hard;
  q.n = labels.size();
  q.L = L;
  q.logw.assign(q.n * L, kNegInf);
  for (std::size_t t = 0; t < q.n; ++t) q.logw[t * L + labels[t]] = 0.0;
  return q;
}

QFactorized q_uniform(const AllowedMask& mask) {
  QFactorized q;
  q.mode = QMode::Soft;
  q.n = mask.n();
  q.L = mask.L();
  q.logw.assign(q.n * q.L, kNegInf);
  for (std::size_t t = 0; t < q.n; ++t) {
    double lw = -std::log(static_cast<double>(mask.row_size(t)));
    for (std::size_t l = 0; l < q.L; ++l) {
      if (mask.allows(t, l)) q.logw[t * q.L + l] = lw;
    }
  }
  return q;
}

double temperature_at(std::size_t iteration, const TemperatureSchedule& schedule) {
  if (iteration >= schedule.iterations) {
    throw std::invalid_argument("temperature_at: iteration out of range");
  }
  if (schedule.iterations == 1) return schedule.t_start;
  double frac = static_cast<double>(iteration) /
                static_cast<double>(schedule.iterations - 1);
  return schedule.t_start * std::pow(schedule.t_end / schedule.t_start, frac);
}

}  // namespace seqtag
