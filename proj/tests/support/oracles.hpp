#ifndef EDAAN_TESTS_ORACLES_HPP_
#define EDAAN_TESTS_ORACLES_HPP_

// Independent, deliberately naive reference computations used as test
// oracles. Nothing here calls into the library's scoring code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

inline double clamp_score(double s) { return std::min(std::max(s, 1e-7), 1.0 - 1e-7); }

inline double adversarial_d(const std::vector<double>& real, const std::vector<double>& fake) {
  double a = 0, b = 0;
  for (double r : real) a += -std::log(clamp_score(r));
  for (double f : fake) b += -std::log(1.0 - clamp_score(f));
  return a / real.size() + b / fake.size();
}

inline double adversarial_g(const std::vector<double>& fake) {
  double a = 0;
  for (double f : fake) a += -std::log(clamp_score(f));
  return a / fake.size();
}

inline double mean_l1(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
  return s / a.size();
}

inline double sqdist(const std::vector<double>& a, const std::vector<double>& b, int dim, int row) {
  double s = 0;
  for (int k = 0; k < dim; ++k) {
    const double d = a[row * dim + k] - b[row * dim + k];
    s += d * d;
  }
  return s;
}

inline double triplet(const std::vector<double>& a, const std::vector<double>& p, const std::vector<double>& n,
                      int dim, double tau1, bool literal) {
  const int rows = static_cast<int>(a.size()) / dim;
  double s = 0;
  for (int i = 0; i < rows; ++i) {
    const double diff = sqdist(a, p, dim, i) - sqdist(a, n, dim, i);
    s += literal ? std::max(diff, tau1) : std::max(0.0, diff + tau1);
  }
  return s / rows;
}

inline double quartet(const std::vector<double>& x1, const std::vector<double>& x2, const std::vector<double>& x3,
                      const std::vector<double>& x4, int dim, double tau1, double tau2, bool literal) {
  const int rows = static_cast<int>(x1.size()) / dim;
  double s = 0;
  for (int i = 0; i < rows; ++i) {
    const double d12 = sqdist(x1, x2, dim, i), d13 = sqdist(x1, x3, dim, i), d43 = sqdist(x4, x3, dim, i);
    if (literal)
      s += std::max(d12 - d13 + d12 - d43, tau1);
    else
      s += std::max(0.0, d12 - d13 + tau1) + std::max(0.0, d12 - d43 + tau2);
  }
  return s / rows;
}

inline double cross_entropy(const std::vector<double>& logits, const std::vector<int>& labels, int classes) {
  double s = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    double z = 0;
    for (int c = 0; c < classes; ++c) z += std::exp(logits[i * classes + c]);
    s += std::log(z) - logits[i * classes + labels[i]];
  }
  return s / labels.size();
}

// Central finite differences of a scalar function of a vector.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double h = 1e-4) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

// max_i |a_i - n_i| / max(|a_i|, |n_i|); pairs where both magnitudes are
// below 1e-8 contribute their absolute difference instead.
inline double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  double worst = 0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double diff = std::fabs(analytic[i] - numeric[i]);
    const double scale = std::max(std::fabs(analytic[i]), std::fabs(numeric[i]));
    worst = std::max(worst, scale < 1e-8 ? diff : diff / scale);
  }
  return worst;
}

// Brute-force single-query scoring. `order` lists gallery indices by rank.
struct Scored {
  bool valid = false;
  int first_good_rank = -1;  // 0-based among non-junk entries
  double ap = 0;
};

inline Scored score_query(const std::vector<int>& order, int qid, int qcam, const std::vector<int>& gid,
                          const std::vector<int>& gcam) {
  std::vector<int> kept;
  for (int idx : order)
    if (!(gid[idx] == qid && gcam[idx] == qcam)) kept.push_back(idx);
  int total_good = 0;
  for (int idx : kept) total_good += gid[idx] == qid;
  Scored s;
  if (total_good == 0) return s;
  s.valid = true;
  int hits = 0;
  double precision_sum = 0;
  for (std::size_t r = 0; r < kept.size(); ++r) {
    if (gid[kept[r]] != qid) continue;
    if (s.first_good_rank < 0) s.first_good_rank = static_cast<int>(r);
    ++hits;
    precision_sum += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  s.ap = precision_sum / total_good;
  return s;
}

inline double iou(const std::vector<double>& map, const std::vector<double>& gt, double threshold) {
  int inter = 0, uni = 0;
  for (std::size_t i = 0; i < map.size(); ++i) {
    const bool a = map[i] >= threshold, b = gt[i] >= 0.5;
    inter += a && b;
    uni += a || b;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

}  // namespace oracle

#endif  // EDAAN_TESTS_ORACLES_HPP_
