// Token-factorized q distribution over possible paths: hard (one-hot on the
// constrained Viterbi path), soft (constrained marginals), and
// temperature-interpolated between the two.

#ifndef SEQTAG_QESTIMATE_HPP
#define SEQTAG_QESTIMATE_HPP

#include "seqtag/lattice.hpp"

namespace seqtag {

enum class QMode { Hard, Soft, Interpolated };

// Row t is a log-distribution over the labels allowed at token t; masked
// cells carry -inf and each row logsumexps to 0.
struct QFactorized {
  QMode mode = QMode::Hard;
  double temperature = 1.0;  // meaningful for Interpolated only
  std::size_t n = 0;
  std::size_t L = 0;
  std::vector<double> logw;  // n*L

  double at(std::size_t t, std::size_t l) const { return logw[t * L + l]; }
};

struct TemperatureSchedule {
  double t_start = 2.0;
  double t_end = 0.5;
  std::size_t iterations = 1;
};

QFactorized estimate_q_hard(const Lattice& lat, const AllowedMask& mask);

QFactorized estimate_q_soft(const Lattice& lat, const AllowedMask& mask);

// Token marginals of the lattice with every score divided by T, renormalized
// per row over the allowed labels. T=1 recovers the soft mode.
QFactorized estimate_q_interpolated(const Lattice& lat, const AllowedMask& mask,
                                    double temperature);

// One-hot q on an explicit path (used for initialization).
QFactorized q_from_path(const std::vector<int>& labels, std::size_t L);

// Uniform q over the allowed labels of each row.
QFactorized q_uniform(const AllowedMask& mask);

// Geometric interpolation from t_start to t_end across the schedule.
double temperature_at(std::size_t iteration, const TemperatureSchedule& schedule);

}  // namespace seqtag

#endif  // SEQTAG_QESTIMATE_HPP
