#pragma once
// Reference implementations used by the unit and acceptance suites. They are
// written from the textbook definitions with plain loops and share no code
// with the library beyond its data types.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <set>
#include <vector>

#include "sprintopt/calibrate.hpp"
#include "sprintopt/testbed.hpp"

namespace oracle {

inline double f_beta(std::int64_t tp, std::int64_t fp, std::int64_t fn, double beta = 1.0) {
  const double b2 = beta * beta;
  const double denom = (1.0 + b2) * static_cast<double>(tp) + b2 * static_cast<double>(fn) + static_cast<double>(fp);
  return denom > 0.0 ? (1.0 + b2) * static_cast<double>(tp) / denom : 0.0;
}

// F-beta of the cut "predict positive when p > t".
inline double f_at(const std::vector<sprintopt::calibrate::ScoredInstance>& xs, double t, double beta = 1.0) {
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (const auto& x : xs) {
    const bool pos = x.probability > t;
    if (pos && x.gold) ++tp;
    if (pos && !x.gold) ++fp;
    if (!pos && x.gold) ++fn;
  }
  return f_beta(tp, fp, fn, beta);
}

// Maximum F-beta over 0, 1 and every midpoint of consecutive distinct
// probabilities, evaluated one cut at a time.
inline double best_midpoint_f(const std::vector<sprintopt::calibrate::ScoredInstance>& xs, double beta = 1.0) {
  std::set<double> distinct;
  for (const auto& x : xs) distinct.insert(x.probability);
  std::vector<double> cuts{0.0, 1.0};
  for (auto it = distinct.begin(); it != distinct.end(); ++it) {
    auto next = std::next(it);
    if (next != distinct.end()) cuts.push_back(0.5 * (*it + *next));
  }
  double best = 0.0;
  for (double c : cuts) best = std::max(best, f_at(xs, c, beta));
  return best;
}

inline double matern52(double r) {
  const double a = std::sqrt(5.0) * r;
  return (1.0 + a + a * a / 3.0) * std::exp(-a);
}

inline double matern32(double r) {
  const double a = std::sqrt(3.0) * r;
  return (1.0 + a) * std::exp(-a);
}

inline double matern12(double r) { return std::exp(-r); }

// Gauss-Jordan inverse with partial pivoting.
inline std::vector<std::vector<double>> invert(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  std::vector<std::vector<double>> inv(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    std::swap(inv[c], inv[piv]);
    const double d = a[c][c];
    for (std::size_t k = 0; k < n; ++k) {
      a[c][k] /= d;
      inv[c][k] /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a[r][c];
      if (f == 0.0) continue;
      for (std::size_t k = 0; k < n; ++k) {
        a[r][k] -= f * a[c][k];
        inv[r][k] -= f * inv[c][k];
      }
    }
  }
  return inv;
}

// 1-D Matérn-5/2 GP on targets standardized by mean and population sd.
struct Gp1d {
  std::vector<double> x, y;
  double length = 0.2, signal = 1.0, noise = 0.0;
  double mean_y = 0.0, scale = 1.0;
  std::vector<std::vector<double>> kinv;
  std::vector<double> alpha;

  Gp1d(std::vector<double> xs, std::vector<double> ys, double l, double s, double nz)
      : x(std::move(xs)), y(std::move(ys)), length(l), signal(s), noise(nz) {
    const std::size_t n = x.size();
    for (double v : y) mean_y += v;
    mean_y /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : y) ss += (v - mean_y) * (v - mean_y);
    scale = std::sqrt(ss / static_cast<double>(n));
    if (scale <= 1e-12) scale = 1.0;
    std::vector<std::vector<double>> k(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        k[i][j] = signal * matern52(std::fabs(x[i] - x[j]) / length) + (i == j ? noise : 0.0);
    kinv = invert(k);
    alpha.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) alpha[i] += kinv[i][j] * (y[j] - mean_y) / scale;
  }

  std::pair<double, double> predict(double u) const {
    const std::size_t n = x.size();
    std::vector<double> ks(n);
    for (std::size_t i = 0; i < n; ++i) ks[i] = signal * matern52(std::fabs(x[i] - u) / length);
    double m = 0.0, q = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      m += ks[i] * alpha[i];
      for (std::size_t j = 0; j < n; ++j) q += ks[i] * kinv[i][j] * ks[j];
    }
    return {mean_y + scale * m, std::max(0.0, signal - q) * scale * scale};
  }
};

inline double Phi(double z) { return 0.5 * (1.0 + std::erf(z / std::numbers::sqrt2)); }
inline double phi(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

enum class Acq { pi, ei, lcb };

// Minimization form; larger is better.
inline double acquisition(Acq a, double mean, double sd, double best, double param) {
  const double imp = best - param - mean;
  switch (a) {
    case Acq::pi: return sd > 0 ? Phi(imp / sd) : (imp > 0 ? 1.0 : 0.0);
    case Acq::ei: return sd > 0 ? imp * Phi(imp / sd) + sd * phi(imp / sd) : std::max(imp, 0.0);
    case Acq::lcb: return param * sd - mean;
  }
  return 0.0;
}

// Parzen estimator on [0, 1]: the uniform prior plus one Gaussian per
// observation, truncated to the interval, bandwidth = distance to the
// nearest other observation floored at 1/(n+2) and capped at 1.
struct Parzen {
  std::vector<double> c, h, z;

  explicit Parzen(const std::vector<double>& us) : c(us) {
    const std::size_t n = us.size();
    for (std::size_t i = 0; i < n; ++i) {
      double nearest = n > 1 ? std::numeric_limits<double>::infinity() : 0.0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) nearest = std::min(nearest, std::fabs(us[i] - us[j]));
      const double bw = std::min(1.0, std::max(nearest, 1.0 / static_cast<double>(n + 2)));
      h.push_back(bw);
      z.push_back(Phi((1.0 - us[i]) / bw) - Phi(-us[i] / bw));
    }
  }

  double pdf(double u) const {
    if (u < 0.0 || u > 1.0) return 0.0;
    double t = 1.0;
    for (std::size_t i = 0; i < c.size(); ++i) t += phi((u - c[i]) / h[i]) / h[i] / z[i];
    return t / static_cast<double>(c.size() + 1);
  }
};

// Composite Simpson rule on [a, b] with an even number of panels.
template <typename F>
double simpson(F f, double a, double b, int panels) {
  const double h = (b - a) / panels;
  double s = f(a) + f(b);
  for (int i = 1; i < panels; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// Exhaustive search over the calibration grid of the toy pipeline: mention
// and coref thresholds in steps of 0.025 on [0, 1], and a common offset in
// steps of 0.025 on [-0.5, 0.5] added to the given relation thresholds.
// Three-dimensional suffix sums make the 41^3 scan cheap.
struct GridOptimum {
  double best = -1.0;
  std::vector<std::array<double, 3>> args;  // (mention, coref, offset)
};

inline GridOptimum calibration_grid(const std::vector<sprintopt::ToyDocument>& docs,
                                    const sprintopt::SplitProbabilities& p, const std::vector<double>& relation) {
  constexpr int G = 41;
  constexpr double step = 0.025;
  std::vector<std::int64_t> tp(G * G * G, 0), fp(G * G * G, 0);
  std::int64_t gold = 0;
  auto idx = [](int a, int b, int c) { return (a * G + b) * G + c; };
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const auto& doc = docs[d];
    for (std::size_t i = 0; i < doc.relations.size(); ++i) {
      const auto& r = doc.relations[i];
      const auto& pair = doc.pairs[static_cast<std::size_t>(r.pair)];
      gold += r.gold;
      const double am = std::min(p.mention[d][static_cast<std::size_t>(pair.a)], p.mention[d][static_cast<std::size_t>(pair.b)]);
      const double ac = p.coref[d][static_cast<std::size_t>(r.pair)];
      const double ar = p.relation[d][i];
      // number of grid values strictly below each probability
      int km = 0, kc = 0, ko = 0;
      while (km < G && km * step < am) ++km;
      while (kc < G && kc * step < ac) ++kc;
      while (ko < G && ar > std::clamp(relation[static_cast<std::size_t>(r.class_id)] + (ko - 20) * step, 0.0, 1.0)) ++ko;
      if (km && kc && ko) (r.gold ? tp : fp)[static_cast<std::size_t>(idx(km - 1, kc - 1, ko - 1))]++;
    }
  }
  for (auto* v : {&tp, &fp}) {
    auto& x = *v;
    auto at = [&](int a, int b, int c) -> std::int64_t { return a < G && b < G && c < G ? x[static_cast<std::size_t>(idx(a, b, c))] : 0; };
    for (int a = G - 1; a >= 0; --a)
      for (int b = G - 1; b >= 0; --b)
        for (int c = G - 1; c >= 0; --c)
          x[static_cast<std::size_t>(idx(a, b, c))] += at(a + 1, b, c) + at(a, b + 1, c) + at(a, b, c + 1) -
                                                        at(a + 1, b + 1, c) - at(a + 1, b, c + 1) -
                                                        at(a, b + 1, c + 1) + at(a + 1, b + 1, c + 1);
  }
  GridOptimum g;
  for (int a = 0; a < G; ++a)
    for (int b = 0; b < G; ++b)
      for (int c = 0; c < G; ++c) {
        const auto k = static_cast<std::size_t>(idx(a, b, c));
        const double f = f_beta(tp[k], fp[k], gold - tp[k]);
        if (f > g.best) {
          g.best = f;
          g.args.clear();
        }
        if (f == g.best) g.args.push_back({a * step, b * step, (c - 20) * step});
      }
  return g;
}

}  // namespace oracle
