#pragma once

// Gaussian-process regression with an ARD Matérn kernel, marginal-likelihood
// hyperparameter fitting, and the PI / EI / LCB acquisition functions.
//
// Points are rows of a dense matrix. All routines are templated on the scalar
// type; the optimizer front end instantiates them with double.

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>

#include "sprintopt/errors.hpp"
#include "sprintopt/random.hpp"

namespace sprintopt::gp {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

enum class Smoothness { half, three_halves, five_halves };

inline const char* to_string(Smoothness nu) {
  switch (nu) {
    case Smoothness::half: return "1/2";
    case Smoothness::three_halves: return "3/2";
    case Smoothness::five_halves: return "5/2";
  }
  return "?";
}

inline Smoothness smoothness_from_string(const std::string& s) {
  for (auto nu : {Smoothness::half, Smoothness::three_halves, Smoothness::five_halves})
    if (s == to_string(nu)) return nu;
  throw InvalidArgument("unknown Matern smoothness '" + s + "' (1/2|3/2|5/2)");
}

template <typename Scalar>
struct KernelSpec {
  Smoothness smoothness = Smoothness::five_halves;
  Vector<Scalar> length_scales;
  Scalar signal_variance = Scalar(1);

  static KernelSpec isotropic(Eigen::Index dim, Scalar length_scale, Scalar signal_variance = Scalar(1),
                              Smoothness nu = Smoothness::five_halves) {
    return {nu, Vector<Scalar>::Constant(dim, length_scale), signal_variance};
  }

  void validate() const {
    if (length_scales.size() == 0 || !(length_scales.array() > Scalar(0)).all())
      throw InvalidArgument("kernel length scales must be positive");
    if (!(signal_variance > Scalar(0))) throw InvalidArgument("signal variance must be positive");
  }
};

/// Matérn correlation as a function of the length-scaled distance r.
template <typename Scalar>
Scalar matern_profile(Scalar r, Smoothness nu) {
  using std::exp;
  using std::sqrt;
  switch (nu) {
    case Smoothness::half: return exp(-r);
    case Smoothness::three_halves: {
      const Scalar a = sqrt(Scalar(3)) * r;
      return (Scalar(1) + a) * exp(-a);
    }
    case Smoothness::five_halves: {
      const Scalar a = sqrt(Scalar(5)) * r;
      return (Scalar(1) + a + a * a / Scalar(3)) * exp(-a);
    }
  }
  return Scalar(0);
}

/// d k / d log(length_scale_j) divided by (signal_variance * (delta_j / l_j)^2).
/// Finite at r = 0 for nu >= 3/2; the nu = 1/2 case is singular there and
/// returns 0 (the derivative is 0 on the diagonal).
template <typename Scalar>
Scalar matern_log_length_factor(Scalar r, Smoothness nu) {
  using std::exp;
  using std::sqrt;
  switch (nu) {
    case Smoothness::half: return r > Scalar(0) ? exp(-r) / r : Scalar(0);
    case Smoothness::three_halves: return Scalar(3) * exp(-sqrt(Scalar(3)) * r);
    case Smoothness::five_halves: {
      const Scalar a = sqrt(Scalar(5)) * r;
      return Scalar(5) / Scalar(3) * (Scalar(1) + a) * exp(-a);
    }
  }
  return Scalar(0);
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar matern_kernel(const Eigen::MatrixBase<DerivedA>& a,
                                        const Eigen::MatrixBase<DerivedB>& b,
                                        const KernelSpec<typename DerivedA::Scalar>& spec) {
  using Scalar = typename DerivedA::Scalar;
  if (a.size() != b.size() || a.size() != spec.length_scales.size())
    throw InvalidArgument("matern_kernel: dimension mismatch (" + std::to_string(a.size()) + ", " +
                          std::to_string(b.size()) + ", " + std::to_string(spec.length_scales.size()) + ")");
  Scalar r2(0);
  for (Eigen::Index j = 0; j < a.size(); ++j) {
    const Scalar t = (a(j) - b(j)) / spec.length_scales(j);
    r2 += t * t;
  }
  using std::sqrt;
  return spec.signal_variance * matern_profile(sqrt(r2), spec.smoothness);
}

/// K(A, B) for row-point matrices A (n x d) and B (m x d).
template <typename Scalar>
Matrix<Scalar> cross_covariance(const Matrix<Scalar>& A, const Matrix<Scalar>& B,
                                const KernelSpec<Scalar>& spec) {
  if (A.cols() != spec.length_scales.size() || B.cols() != spec.length_scales.size())
    throw InvalidArgument("cross_covariance: dimension mismatch");
  const Vector<Scalar> inv = spec.length_scales.cwiseInverse();
  const Matrix<Scalar> As = A * inv.asDiagonal();
  const Matrix<Scalar> Bs = B * inv.asDiagonal();
  Matrix<Scalar> K(A.rows(), B.rows());
  for (Eigen::Index j = 0; j < B.rows(); ++j)
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      using std::sqrt;
      const Scalar r = sqrt((As.row(i) - Bs.row(j)).squaredNorm());
      K(i, j) = spec.signal_variance * matern_profile(r, spec.smoothness);
    }
  return K;
}

template <typename Scalar>
Matrix<Scalar> gram(const Matrix<Scalar>& X, const KernelSpec<Scalar>& spec) {
  const Vector<Scalar> inv = spec.length_scales.cwiseInverse();
  const Matrix<Scalar> Xs = X * inv.asDiagonal();
  const Eigen::Index n = X.rows();
  Matrix<Scalar> K(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    K(j, j) = spec.signal_variance;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      using std::sqrt;
      const Scalar r = sqrt((Xs.row(i) - Xs.row(j)).squaredNorm());
      K(i, j) = K(j, i) = spec.signal_variance * matern_profile(r, spec.smoothness);
    }
  }
  return K;
}

/// Jitter schedule for Gram matrices that fail to factor.
template <typename Scalar>
struct JitterPolicy {
  Scalar initial = Scalar(1e-10);
  Scalar growth = Scalar(10);
  Scalar maximum = Scalar(1e-4);
};

/// Factors K + noise*I, escalating diagonal jitter on failure. Returns the
/// jitter that was needed (0 when none), or nullopt if even the maximum failed.
template <typename Scalar>
std::optional<Scalar> factor_with_jitter(Matrix<Scalar> K, Scalar noise, Eigen::LLT<Matrix<Scalar>>& llt,
                                         const JitterPolicy<Scalar>& policy = {}) {
  K.diagonal().array() += noise;
  llt.compute(K);
  if (llt.info() == Eigen::Success) return Scalar(0);
  for (Scalar jitter = policy.initial; jitter <= policy.maximum * Scalar(1.0000001); jitter *= policy.growth) {
    Matrix<Scalar> Kj = K;
    Kj.diagonal().array() += jitter;
    llt.compute(Kj);
    if (llt.info() == Eigen::Success) return jitter;
  }
  return std::nullopt;
}

template <typename Scalar>
struct Posterior {
  Scalar mean;
  Scalar variance;
};

/// Zero-mean GP on standardized targets; predictions are reported in the
/// original target units.
template <typename Scalar>
class GaussianProcess {
 public:
  static GaussianProcess fit(Matrix<Scalar> X, const Vector<Scalar>& y, KernelSpec<Scalar> spec,
                             Scalar noise_variance, const JitterPolicy<Scalar>& jitter = {}) {
    if (X.rows() == 0) throw InvalidArgument("gp_fit needs at least one point");
    if (X.rows() != y.size()) throw InvalidArgument("gp_fit: point/score count mismatch");
    if (!y.allFinite()) throw InvalidArgument("gp_fit: scores must be finite");
    if (noise_variance < Scalar(0)) throw InvalidArgument("gp_fit: noise must be non-negative");
    spec.validate();
    if (X.cols() != spec.length_scales.size()) throw InvalidArgument("gp_fit: dimension mismatch");

    GaussianProcess gp;
    gp.X_ = std::move(X);
    gp.spec_ = std::move(spec);
    gp.noise_ = noise_variance;
    gp.y_mean_ = y.mean();
    using std::sqrt;
    const Scalar sd = sqrt((y.array() - gp.y_mean_).square().mean());
    gp.y_scale_ = sd > Scalar(1e-12) ? sd : Scalar(1);
    gp.y_std_ = (y.array() - gp.y_mean_) / gp.y_scale_;

    auto j = factor_with_jitter(gram(gp.X_, gp.spec_), gp.noise_, gp.llt_, jitter);
    if (!j) throw NumericalError("ill-conditioned kernel");
    gp.jitter_ = *j;
    gp.alpha_ = gp.llt_.solve(gp.y_std_);
    return gp;
  }

  Posterior<Scalar> predict(const Vector<Scalar>& x) const {
    Matrix<Scalar> row = x.transpose();
    Vector<Scalar> mean, var;
    predict(row, mean, var);
    return {mean(0), var(0)};
  }

  /// Posterior mean and latent variance for each row of Xs.
  void predict(const Matrix<Scalar>& Xs, Vector<Scalar>& mean, Vector<Scalar>& variance) const {
    const Matrix<Scalar> Ks = cross_covariance(X_, Xs, spec_);  // n x m
    mean = (Ks.transpose() * alpha_).array() * y_scale_ + y_mean_;
    const Matrix<Scalar> V = llt_.matrixL().solve(Ks);
    variance = (spec_.signal_variance - V.colwise().squaredNorm().array()).max(Scalar(0)) * y_scale_ * y_scale_;
  }

  /// Log marginal likelihood of the standardized targets.
  Scalar log_marginal_likelihood() const {
    using std::log;
    const Matrix<Scalar>& L = llt_.matrixLLT();
    return Scalar(-0.5) * y_std_.dot(alpha_) - L.diagonal().array().log().sum() -
           Scalar(0.5) * Scalar(X_.rows()) * log(Scalar(2) * std::numbers::pi_v<Scalar>);
  }

  const Matrix<Scalar>& train_points() const noexcept { return X_; }
  const Vector<Scalar>& standardized_scores() const noexcept { return y_std_; }
  const KernelSpec<Scalar>& kernel() const noexcept { return spec_; }
  Scalar noise_variance() const noexcept { return noise_; }
  Scalar jitter() const noexcept { return jitter_; }
  Scalar score_mean() const noexcept { return y_mean_; }
  Scalar score_scale() const noexcept { return y_scale_; }

 private:
  Matrix<Scalar> X_;
  Vector<Scalar> y_std_;
  Vector<Scalar> alpha_;
  KernelSpec<Scalar> spec_;
  Eigen::LLT<Matrix<Scalar>> llt_;
  Scalar noise_ = Scalar(0);
  Scalar jitter_ = Scalar(0);
  Scalar y_mean_ = Scalar(0);
  Scalar y_scale_ = Scalar(1);
};

template <typename Scalar>
GaussianProcess<Scalar> gp_fit(Matrix<Scalar> X, const Vector<Scalar>& y, KernelSpec<Scalar> spec,
                               Scalar noise_variance) {
  return GaussianProcess<Scalar>::fit(std::move(X), y, std::move(spec), noise_variance);
}

// ---------------------------------------------------------------------------
// Hyperparameter fitting

template <typename Scalar>
struct HyperparameterBounds {
  Scalar min_length = Scalar(0.01);
  Scalar max_length = Scalar(100);
  Scalar min_signal = Scalar(0.01);
  Scalar max_signal = Scalar(1000);
  Scalar min_noise = Scalar(1e-8);
  Scalar max_noise = Scalar(1);
};

template <typename Scalar>
struct FitOptions {
  int restarts = 5;
  int max_iterations = 25;
  bool fit_noise = true;
  HyperparameterBounds<Scalar> bounds;
};

template <typename Scalar>
struct Hyperparameters {
  KernelSpec<Scalar> kernel;
  Scalar noise_variance;
  Scalar log_likelihood;
};

/// Log marginal likelihood of standardized targets `y` and its gradient with
/// respect to (log l_1..log l_d, log signal_variance[, log noise]).
/// Returns -inf when the Gram matrix cannot be factored.
template <typename Scalar>
Scalar log_likelihood_with_gradient(const Matrix<Scalar>& X, const Vector<Scalar>& y,
                                    const KernelSpec<Scalar>& spec, Scalar noise, bool noise_param,
                                    Vector<Scalar>* gradient) {
  using std::exp;
  using std::log;
  using std::sqrt;
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  const Vector<Scalar> inv = spec.length_scales.cwiseInverse();
  const Matrix<Scalar> Xs = X * inv.asDiagonal();

  Matrix<Scalar> K(n, n);
  Matrix<Scalar> F(n, n);  // length-scale derivative factor per pair
  for (Eigen::Index j = 0; j < n; ++j) {
    K(j, j) = spec.signal_variance;
    F(j, j) = Scalar(0);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const Scalar r = sqrt((Xs.row(i) - Xs.row(j)).squaredNorm());
      K(i, j) = K(j, i) = spec.signal_variance * matern_profile(r, spec.smoothness);
      F(i, j) = F(j, i) = spec.signal_variance * matern_log_length_factor(r, spec.smoothness);
    }
  }
  Eigen::LLT<Matrix<Scalar>> llt;
  auto jitter = factor_with_jitter(K, noise, llt);
  if (!jitter) return -std::numeric_limits<Scalar>::infinity();

  const Vector<Scalar> alpha = llt.solve(y);
  const Matrix<Scalar>& L = llt.matrixLLT();
  const Scalar value = Scalar(-0.5) * y.dot(alpha) - L.diagonal().array().log().sum() -
                       Scalar(0.5) * Scalar(n) * log(Scalar(2) * std::numbers::pi_v<Scalar>);
  if (!gradient) return value;

  // W = alpha alpha^T - K^{-1}; dLML/dtheta = 0.5 tr(W dK/dtheta)
  Matrix<Scalar> W = -llt.solve(Matrix<Scalar>::Identity(n, n));
  W.noalias() += alpha * alpha.transpose();

  gradient->setZero(d + 1 + (noise_param ? 1 : 0));
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const Scalar w = W(i, j) * F(i, j);  // symmetric pair counted twice, times 0.5
      if (w == Scalar(0)) continue;
      for (Eigen::Index c = 0; c < d; ++c) {
        const Scalar t = Xs(i, c) - Xs(j, c);
        (*gradient)(c) += w * t * t;
      }
    }
  // dK/dlog(signal) = K without the noise term
  (*gradient)(d) = Scalar(0.5) * (W.cwiseProduct(K)).sum();
  if (noise_param) (*gradient)(d + 1) = Scalar(0.5) * noise * W.trace();
  return value;
}

namespace detail {

template <typename Scalar>
struct ParamLayout {
  Eigen::Index dims;
  bool noise;
  Vector<Scalar> lower, upper;

  ParamLayout(Eigen::Index d, bool fit_noise, const HyperparameterBounds<Scalar>& b)
      : dims(d), noise(fit_noise), lower(d + 1 + (fit_noise ? 1 : 0)), upper(lower.size()) {
    using std::log;
    lower.head(d).setConstant(log(b.min_length));
    upper.head(d).setConstant(log(b.max_length));
    lower(d) = log(b.min_signal);
    upper(d) = log(b.max_signal);
    if (fit_noise) {
      lower(d + 1) = log(b.min_noise);
      upper(d + 1) = log(b.max_noise);
    }
  }

  Vector<Scalar> project(Vector<Scalar> theta) const { return theta.cwiseMax(lower).cwiseMin(upper); }

  Vector<Scalar> pack(const KernelSpec<Scalar>& spec, Scalar noise_variance) const {
    Vector<Scalar> t(lower.size());
    t.head(dims) = spec.length_scales.array().log();
    using std::log;
    t(dims) = log(spec.signal_variance);
    if (noise) t(dims + 1) = log(std::max(noise_variance, Scalar(1e-300)));
    return project(t);
  }

  void unpack(const Vector<Scalar>& t, Smoothness nu, Scalar fixed_noise, KernelSpec<Scalar>& spec,
              Scalar& noise_variance) const {
    spec.smoothness = nu;
    spec.length_scales = t.head(dims).array().exp();
    using std::exp;
    spec.signal_variance = exp(t(dims));
    noise_variance = noise ? exp(t(dims + 1)) : fixed_noise;
  }
};

}  // namespace detail

/// Maximizes the log marginal likelihood over log-hyperparameters with a
/// multi-start projected gradient ascent (Barzilai-Borwein steps, Armijo
/// backtracking). The first start is `initial`; the rest are drawn
/// log-uniformly inside the bounds. Scores are standardized internally.
template <typename Scalar>
Hyperparameters<Scalar> fit_hyperparameters(const Matrix<Scalar>& X, const Vector<Scalar>& y_raw,
                                            const KernelSpec<Scalar>& initial, Scalar initial_noise,
                                            const FitOptions<Scalar>& options, Rng& rng) {
  const Eigen::Index d = X.cols();
  const detail::ParamLayout<Scalar> layout(d, options.fit_noise, options.bounds);
  Vector<Scalar> y = y_raw.array() - y_raw.mean();
  {
    using std::sqrt;
    const Scalar sd = sqrt(y.squaredNorm() / Scalar(std::max<Eigen::Index>(1, y.size())));
    if (sd > Scalar(1e-12)) y /= sd;
  }

  auto evaluate = [&](const Vector<Scalar>& theta, Vector<Scalar>* grad) {
    KernelSpec<Scalar> spec;
    Scalar noise;
    layout.unpack(theta, initial.smoothness, initial_noise, spec, noise);
    return log_likelihood_with_gradient(X, y, spec, noise, layout.noise, grad);
  };

  Vector<Scalar> best_theta = layout.pack(initial, initial_noise);
  Scalar best_value = evaluate(best_theta, nullptr);

  for (int restart = 0; restart < std::max(1, options.restarts); ++restart) {
    Vector<Scalar> theta = layout.pack(initial, initial_noise);
    if (restart > 0)
      for (Eigen::Index c = 0; c < theta.size(); ++c)
        theta(c) = static_cast<Scalar>(uniform(rng, static_cast<double>(layout.lower(c)),
                                               static_cast<double>(layout.upper(c))));
    Vector<Scalar> g;
    Scalar f = evaluate(theta, &g);
    if (!std::isfinite(static_cast<double>(f))) continue;

    Scalar step = Scalar(0.5) / std::max(g.cwiseAbs().maxCoeff(), Scalar(1e-12));
    for (int it = 0; it < options.max_iterations; ++it) {
      bool accepted = false;
      Vector<Scalar> cand, gc;
      Scalar fc = f;
      for (int bt = 0; bt < 12; ++bt) {
        cand = layout.project(theta + step * g);
        const Vector<Scalar> move = cand - theta;
        if (move.norm() < Scalar(1e-10)) break;
        fc = evaluate(cand, &gc);
        if (std::isfinite(static_cast<double>(fc)) && fc >= f + Scalar(1e-4) * g.dot(move)) {
          accepted = true;
          break;
        }
        step *= Scalar(0.3);
      }
      if (!accepted) break;
      const Vector<Scalar> s = cand - theta;
      const Vector<Scalar> yv = gc - g;
      const Scalar sy = s.dot(yv);
      const Scalar improvement = fc - f;
      theta = cand;
      f = fc;
      g = gc;
      step = sy < Scalar(0) ? s.squaredNorm() / -sy : step * Scalar(2);
      step = std::min(step, Scalar(2) / std::max(g.cwiseAbs().maxCoeff(), Scalar(1e-12)));
      using std::abs;
      if (improvement < Scalar(1e-7) * (Scalar(1) + abs(f))) break;
    }
    if (f > best_value || !std::isfinite(static_cast<double>(best_value))) {
      best_value = f;
      best_theta = theta;
    }
  }

  Hyperparameters<Scalar> out;
  layout.unpack(best_theta, initial.smoothness, initial_noise, out.kernel, out.noise_variance);
  out.log_likelihood = best_value;
  return out;
}

// ---------------------------------------------------------------------------
// Acquisition

enum class Acquisition { pi, ei, lcb };

inline const char* to_string(Acquisition a) {
  switch (a) {
    case Acquisition::pi: return "PI";
    case Acquisition::ei: return "EI";
    case Acquisition::lcb: return "LCB";
  }
  return "?";
}

/// xi for PI/EI, kappa for LCB.
template <typename Scalar>
struct AcquisitionChoice {
  Acquisition function = Acquisition::ei;
  Scalar parameter = Scalar(0.01);
};

template <typename Scalar>
Scalar normal_cdf(Scalar z) {
  using std::erfc;
  using std::sqrt;
  return Scalar(0.5) * erfc(-z / sqrt(Scalar(2)));
}

template <typename Scalar>
Scalar normal_pdf(Scalar z) {
  using std::exp;
  using std::sqrt;
  return exp(Scalar(-0.5) * z * z) / sqrt(Scalar(2) * std::numbers::pi_v<Scalar>);
}

/// Acquisition value for minimization; larger is more attractive. LCB is
/// reported negated so that every function is maximized.
template <typename Scalar>
Scalar acquisition_value(Scalar mean, Scalar sd, Scalar best, const AcquisitionChoice<Scalar>& choice) {
  switch (choice.function) {
    case Acquisition::pi: {
      const Scalar improvement = best - choice.parameter - mean;
      if (sd <= Scalar(0)) return improvement > Scalar(0) ? Scalar(1) : Scalar(0);
      return normal_cdf(improvement / sd);
    }
    case Acquisition::ei: {
      const Scalar improvement = best - choice.parameter - mean;
      if (sd <= Scalar(0)) return std::max(improvement, Scalar(0));
      const Scalar z = improvement / sd;
      return improvement * normal_cdf(z) + sd * normal_pdf(z);
    }
    case Acquisition::lcb: return -(mean - choice.parameter * sd);
  }
  return Scalar(0);
}

/// Index of the candidate row maximizing the acquisition; ties go to the
/// lowest index.
template <typename Scalar>
Eigen::Index acquire_index(const GaussianProcess<Scalar>& model, Scalar best,
                           const AcquisitionChoice<Scalar>& choice, const Matrix<Scalar>& candidates) {
  if (candidates.rows() == 0) throw InvalidArgument("acquire needs at least one candidate");
  Vector<Scalar> mean, var;
  model.predict(candidates, mean, var);
  Eigen::Index arg = 0;
  Scalar top = -std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index i = 0; i < candidates.rows(); ++i) {
    using std::sqrt;
    const Scalar a = acquisition_value(mean(i), sqrt(var(i)), best, choice);
    if (a > top) {
      top = a;
      arg = i;
    }
  }
  return arg;
}

template <typename Scalar>
Vector<Scalar> acquire(const GaussianProcess<Scalar>& model, Scalar best, const AcquisitionChoice<Scalar>& choice,
                       const Matrix<Scalar>& candidates) {
  return candidates.row(acquire_index(model, best, choice, candidates)).transpose();
}

}  // namespace sprintopt::gp
