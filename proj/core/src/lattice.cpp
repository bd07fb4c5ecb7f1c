#include "seqtag/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace seqtag {

void AllowedMask::restrict_to(std::size_t t, std::size_t l) {
  for (std::size_t j = 0; j < L_; ++j) allow_[t * L_ + j] = 0;
  allow_[t * L_ + l] = 1;
}

std::size_t AllowedMask::row_size(std::size_t t) const {
  std::size_t c = 0;
  for (std::size_t l = 0; l < L_; ++l) c += allow_[t * L_ + l];
  return c;
}

void AllowedMask::check_valid() const {
  for (std::size_t t = 0; t < n_; ++t) {
    if (row_size(t) == 0) {
      throw std::invalid_argument("AllowedMask: empty row at token " +
                                  std::to_string(t));
    }
  }
}

double log_sum_exp(const double* v, std::size_t n) {
  double m = kNegInf;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, v[i]);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

namespace {

void check_shapes(const Lattice& lat, const AllowedMask& mask) {
  if (mask.n() != lat.n || mask.L() != lat.L) {
    throw std::invalid_argument("mask shape does not match lattice");
  }
  mask.check_valid();
}

// Forward log-scores: alpha[t][l] includes emit[t][l].
std::vector<double> forward_scores(const Lattice& lat, const AllowedMask& mask) {
  const std::size_t n = lat.n, L = lat.L;
  std::vector<double> alpha(n * L, kNegInf);
  for (std::size_t l = 0; l < L; ++l) {
    if (mask.allows(0, l)) alpha[l] = lat.start[l] + lat.emit_at(0, l);
  }
  std::vector<double> acc(L);
  for (std::size_t t = 1; t < n; ++t) {
    for (std::size_t l = 0; l < L; ++l) {
      if (!mask.allows(t, l)) continue;
      for (std::size_t p = 0; p < L; ++p) {
        acc[p] = alpha[(t - 1) * L + p] + lat.trans_at(p, l);
      }
      alpha[t * L + l] = log_sum_exp(acc.data(), L) + lat.emit_at(t, l);
    }
  }
  return alpha;
}

// Backward log-scores: beta[t][l] excludes emit[t][l], includes stop.
std::vector<double> backward_scores(const Lattice& lat, const AllowedMask& mask) {
  const std::size_t n = lat.n, L = lat.L;
  std::vector<double> beta(n * L, kNegInf);
  for (std::size_t l = 0; l < L; ++l) {
    if (mask.allows(n - 1, l)) beta[(n - 1) * L + l] = lat.stop[l];
  }
  std::vector<double> acc(L);
  for (std::size_t t = n - 1; t-- > 0;) {
    for (std::size_t p = 0; p < L; ++p) {
      if (!mask.allows(t, p)) continue;
      for (std::size_t l = 0; l < L; ++l) {
        acc[l] = lat.trans_at(p, l) + lat.emit_at(t + 1, l) + beta[(t + 1) * L + l];
      }
      beta[t * L + p] = log_sum_exp(acc.data(), L);
    }
  }
  return beta;
}

}  // namespace

double path_score(const Lattice& lat, const std::vector<int>& labels) {
  if (labels.size() != lat.n) {
    throw std::invalid_argument("path_score: label sequence length mismatch");
  }
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= lat.L) {
      throw std::invalid_argument("path_score: label index out of range");
    }
  }
  double s = lat.start[labels[0]] + lat.emit_at(0, labels[0]);
  for (std::size_t t = 1; t < lat.n; ++t) {
    s += lat.trans_at(labels[t - 1], labels[t]) + lat.emit_at(t, labels[t]);
  }
  s += lat.stop[labels[lat.n - 1]];
  return s;
}

double log_partition(const Lattice& lat, const AllowedMask& mask) {
  check_shapes(lat, mask);
  const std::size_t n = lat.n, L = lat.L;
  std::vector<double> alpha = forward_scores(lat, mask);
  std::vector<double> fin(L);
  for (std::size_t l = 0; l < L; ++l) fin[l] = alpha[(n - 1) * L + l] + lat.stop[l];
  return log_sum_exp(fin.data(), L);
}

Marginals posterior_marginals(const Lattice& lat, const AllowedMask& mask) {
  check_shapes(lat, mask);
  const std::size_t n = lat.n, L = lat.L;
  std::vector<double> alpha = forward_scores(lat, mask);
  std::vector<double> beta = backward_scores(lat, mask);

  Marginals m;
  m.n = n;
  m.L = L;
  std::vector<double> fin(L);
  for (std::size_t l = 0; l < L; ++l) fin[l] = alpha[(n - 1) * L + l] + lat.stop[l];
  m.log_z = log_sum_exp(fin.data(), L);

  m.token.assign(n * L, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t l = 0; l < L; ++l) {
      double lp = alpha[t * L + l] + beta[t * L + l] - m.log_z;
      m.token[t * L + l] = lp == kNegInf ? 0.0 : std::exp(lp);
    }
  }
  if (n > 1) {
    m.pair.assign((n - 1) * L * L, 0.0);
    for (std::size_t t = 0; t + 1 < n; ++t) {
      for (std::size_t a = 0; a < L; ++a) {
        if (alpha[t * L + a] == kNegInf) continue;
        for (std::size_t b = 0; b < L; ++b) {
          double lp = alpha[t * L + a] + lat.trans_at(a, b) + lat.emit_at(t + 1, b) +
                      beta[(t + 1) * L + b] - m.log_z;
          m.pair[(t * L + a) * L + b] = lp == kNegInf ? 0.0 : std::exp(lp);
        }
      }
    }
  }
  return m;
}

ScoredPath viterbi(const Lattice& lat, const AllowedMask& mask) {
  check_shapes(lat, mask);
  const std::size_t n = lat.n, L = lat.L;
  std::vector<double> delta(n * L, kNegInf);
  std::vector<int> psi(n * L, -1);
  for (std::size_t l = 0; l < L; ++l) {
    if (mask.allows(0, l)) delta[l] = lat.start[l] + lat.emit_at(0, l);
  }
  for (std::size_t t = 1; t < n; ++t) {
    for (std::size_t l = 0; l < L; ++l) {
      if (!mask.allows(t, l)) continue;
      double best = kNegInf;
      int arg = -1;
      for (std::size_t p = 0; p < L; ++p) {
        double s = delta[(t - 1) * L + p] + lat.trans_at(p, l);
        if (s > best || arg < 0) {  // strict >: ties keep lowest index
          best = s;
          arg = static_cast<int>(p);
        }
      }
      delta[t * L + l] = best + lat.emit_at(t, l);
      psi[t * L + l] = arg;
    }
  }
  double best = kNegInf;
  int arg = -1;
  for (std::size_t l = 0; l < L; ++l) {
    if (!mask.allows(n - 1, l)) continue;
    double s = delta[(n - 1) * L + l] + lat.stop[l];
    if (s > best || arg < 0) {
      best = s;
      arg = static_cast<int>(l);
    }
  }
  ScoredPath path;
  path.score = best;
  path.labels.assign(n, 0);
  path.labels[n - 1] = arg;
  for (std::size_t t = n - 1; t > 0; --t) {
    path.labels[t - 1] = psi[t * L + path.labels[t]];
  }
  return path;
}

namespace {

struct KCand {
  double score;    // prefix score including emit at current token
  int prev_label;  // -1 at t = 0
  int prev_rank;
};

// table[t][l] holds ranked prefix candidates ending at (t, l).
using KTable = std::vector<std::vector<std::vector<KCand>>>;

std::vector<int> reconstruct(const KTable& table, std::size_t t, int label,
                             int rank) {
  std::vector<int> path(t + 1);
  int l = label, r = rank;
  for (std::size_t i = t + 1; i-- > 0;) {
    path[i] = l;
    const KCand& c = table[i][l][r];
    l = c.prev_label;
    r = c.prev_rank;
  }
  return path;
}

}  // namespace

std::vector<ScoredPath> kbest_viterbi(const Lattice& lat, const AllowedMask& mask,
                                      std::size_t k) {
  check_shapes(lat, mask);
  if (k == 0) throw std::invalid_argument("kbest_viterbi: K must be >= 1");
  const std::size_t n = lat.n, L = lat.L;

  KTable table(n, std::vector<std::vector<KCand>>(L));
  // Ties in score are broken by lexicographic order of the prefix path,
  // which extension preserves.
  auto chain_of = [&](std::size_t t, const KCand& c) {
    // prefix path of the candidate *excluding* the current label
    std::vector<int> path;
    if (c.prev_label < 0) return path;
    path = reconstruct(table, t - 1, c.prev_label, c.prev_rank);
    return path;
  };

  for (std::size_t l = 0; l < L; ++l) {
    if (mask.allows(0, l)) {
      table[0][l].push_back(KCand{lat.start[l] + lat.emit_at(0, l), -1, -1});
    }
  }
  for (std::size_t t = 1; t < n; ++t) {
    for (std::size_t l = 0; l < L; ++l) {
      if (!mask.allows(t, l)) continue;
      std::vector<KCand> cands;
      for (std::size_t p = 0; p < L; ++p) {
        const auto& prev = table[t - 1][p];
        for (std::size_t r = 0; r < prev.size(); ++r) {
          cands.push_back(KCand{prev[r].score + lat.trans_at(p, l) + lat.emit_at(t, l),
                                static_cast<int>(p), static_cast<int>(r)});
        }
      }
      std::stable_sort(cands.begin(), cands.end(), [&](const KCand& a, const KCand& b) {
        if (a.score != b.score) return a.score > b.score;
        return chain_of(t, a) < chain_of(t, b);
      });
      if (cands.size() > k) cands.resize(k);
      table[t][l] = std::move(cands);
    }
  }

  struct Final {
    double score;
    std::vector<int> labels;
  };
  std::vector<Final> finals;
  for (std::size_t l = 0; l < L; ++l) {
    const auto& ends = table[n - 1][l];
    for (std::size_t r = 0; r < ends.size(); ++r) {
      Final f;
      f.score = ends[r].score + lat.stop[l];
      f.labels = reconstruct(table, n - 1, static_cast<int>(l), static_cast<int>(r));
      finals.push_back(std::move(f));
    }
  }
  std::stable_sort(finals.begin(), finals.end(), [](const Final& a, const Final& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.labels < b.labels;
  });
  if (finals.size() > k) finals.resize(k);

  std::vector<ScoredPath> out;
  out.reserve(finals.size());
  for (auto& f : finals) out.push_back(ScoredPath{std::move(f.labels), f.score});
  return out;
}

std::vector<ScoredPath> enumerate_paths_bruteforce(const Lattice& lat,
                                                   const AllowedMask& mask) {
  check_shapes(lat, mask);
  const std::size_t n = lat.n, L = lat.L;
  if (count_paths(mask) > 1000000ull) {
    throw std::invalid_argument("enumerate_paths_bruteforce: too many paths");
  }
  std::vector<std::vector<int>> rows(n);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t l = 0; l < L; ++l) {
      if (mask.allows(t, l)) rows[t].push_back(static_cast<int>(l));
    }
  }
  std::vector<ScoredPath> out;
  std::vector<std::size_t> odo(n, 0);
  std::vector<int> labels(n);
  for (;;) {
    for (std::size_t t = 0; t < n; ++t) labels[t] = rows[t][odo[t]];
    out.push_back(ScoredPath{labels, path_score(lat, labels)});
    std::size_t t = n;
    while (t-- > 0) {
      if (++odo[t] < rows[t].size()) break;
      odo[t] = 0;
      if (t == 0) return out;
    }
  }
}

std::uint64_t count_paths(const AllowedMask& mask) {
  std::uint64_t total = 1;
  for (std::size_t t = 0; t < mask.n(); ++t) {
    std::uint64_t r = mask.row_size(t);
    if (r != 0 && total > std::numeric_limits<std::uint64_t>::max() / r) {
      return std::numeric_limits<std::uint64_t>::max();  // saturate
    }
    total *= r;
  }
  return total;
}

Lattice apply_structural_constraints(Lattice lat, const StructuralTransitions& st) {
  if (st.L != lat.L) {
    throw std::invalid_argument("structural constraints label count mismatch");
  }
  for (std::size_t a = 0; a < lat.L; ++a) {
    for (std::size_t b = 0; b < lat.L; ++b) {
      if (!st.allowed[a * lat.L + b]) lat.trans_at(a, b) = kNegInf;
    }
  }
  for (std::size_t l = 0; l < lat.L; ++l) {
    if (!st.initial[l]) lat.start[l] = kNegInf;
  }
  return lat;
}

}  // namespace seqtag
