#pragma once

// Dense linear algebra helpers and the feasibility projection.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

#include "isac/errors.hpp"

namespace isac {

/// Real symmetric 3K x 3K information matrix. Rows/cols are ordered
/// (Re alpha_k, Im alpha_k, tau_k) per target.
class FisherMatrix {
 public:
  FisherMatrix() = default;
  explicit FisherMatrix(Eigen::MatrixXd m) : m_(std::move(m)) {}

  static FisherMatrix zero(int n_targets) {
    return FisherMatrix(Eigen::MatrixXd::Zero(3 * n_targets, 3 * n_targets));
  }

  const Eigen::MatrixXd& matrix() const { return m_; }
  Eigen::MatrixXd& matrix() { return m_; }
  Eigen::Index dim() const { return m_.rows(); }
  int n_targets() const { return static_cast<int>(m_.rows() / 3); }
  double operator()(Eigen::Index r, Eigen::Index c) const { return m_(r, c); }

  Eigen::Matrix3d block(int k, int l) const { return m_.block<3, 3>(3 * k, 3 * l); }

  FisherMatrix& operator+=(const FisherMatrix& other) {
    m_ += other.m_;
    return *this;
  }
  friend FisherMatrix operator+(FisherMatrix a, const FisherMatrix& b) { return a += b; }
  friend FisherMatrix operator*(double s, FisherMatrix a) {
    a.m_ *= s;
    return a;
  }

  /// max |A - A^T| relative to max |A| (0 for the zero matrix).
  double relative_asymmetry() const {
    const double scale = m_.cwiseAbs().maxCoeff();
    if (scale == 0.0) return 0.0;
    return (m_ - m_.transpose()).cwiseAbs().maxCoeff() / scale;
  }

  /// Eigenvalues of the Jacobi-equilibrated matrix, ascending. Entries mix
  /// units (1/s^2 against unitless), so raw eigenvalues are meaningless.
  Eigen::VectorXd equilibrated_eigenvalues() const {
    Eigen::VectorXd d = m_.diagonal().cwiseMax(0.0);
    for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = d(i) > 0 ? 1.0 / std::sqrt(d(i)) : 1.0;
    const Eigen::MatrixXd scaled = d.asDiagonal() * m_ * d.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (scaled + scaled.transpose()),
                                                      Eigen::EigenvaluesOnly);
    return es.eigenvalues();
  }

  bool is_psd(double tol = 1e-10) const {
    if (m_.size() == 0) return true;
    const Eigen::VectorXd ev = equilibrated_eigenvalues();
    return ev(0) >= -tol * std::max(ev(ev.size() - 1), 0.0);
  }

 private:
  Eigen::MatrixXd m_;
};

/// phi(tau)_i = exp(-j 2 pi f0 (i-1) tau), i = 1..n.
inline Eigen::VectorXcd steering_vector(double tau, int n, double f0) {
  Eigen::VectorXcd v(n);
  const double w = 2.0 * std::numbers::pi * f0;
  for (int i = 0; i < n; ++i) v(i) = std::polar(1.0, -w * static_cast<double>(i) * tau);
  return v;
}

/// d phi / d tau.
inline Eigen::VectorXcd steering_derivative(double tau, int n, double f0) {
  Eigen::VectorXcd v = steering_vector(tau, n, f0);
  const double w = 2.0 * std::numbers::pi * f0;
  for (int i = 0; i < n; ++i) v(i) *= std::complex<double>(0.0, -w * static_cast<double>(i));
  return v;
}

/// Inverse of a symmetric positive definite matrix.
///
/// The matrix is Jacobi-equilibrated before the Cholesky factorization. On
/// failure one retry is made with 1e-12 * trace/size added to the (scaled)
/// diagonal before NotPositiveDefinite is thrown.
inline Eigen::MatrixXd inverse_spd(const Eigen::MatrixXd& a) {
  const Eigen::Index n = a.rows();
  if (n == 0) return a;
  Eigen::VectorXd d(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(a(i, i) > 0.0) || !std::isfinite(a(i, i)))
      throw NotPositiveDefinite("inverse_spd: non-positive diagonal entry");
    d(i) = 1.0 / std::sqrt(a(i, i));
  }
  Eigen::MatrixXd scaled = d.asDiagonal() * a * d.asDiagonal();
  scaled = 0.5 * (scaled + scaled.transpose());

  Eigen::LLT<Eigen::MatrixXd> llt(scaled);
  if (llt.info() != Eigen::Success) {
    scaled.diagonal().array() += 1e-12 * scaled.trace() / static_cast<double>(n);
    llt.compute(scaled);
    if (llt.info() != Eigen::Success)
      throw NotPositiveDefinite("inverse_spd: Cholesky factorization failed");
  }
  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(n, n));
  return d.asDiagonal() * inv * d.asDiagonal();
}

inline Eigen::MatrixXd inverse_spd(const FisherMatrix& a) { return inverse_spd(a.matrix()); }

/// Tr(A^{-1}) for symmetric positive definite A.
inline double trace_inverse_psd(const FisherMatrix& a) { return inverse_spd(a).trace(); }

enum class BudgetMode {
  at_most,  ///< sum p <= budget
  exact,    ///< sum p == budget (requires cap * size >= budget)
};

/// Euclidean projection onto {0 <= p_i <= cap, sum p_i <= budget} (or == budget).
///
/// The solution is p_i = clamp(v_i - nu, 0, cap). nu is bracketed by bisection
/// on the monotone map nu -> sum clamp(v_i - nu, 0, cap), then solved exactly
/// on the active set found by the bracket.
inline Eigen::VectorXd project_box_capped_simplex(const Eigen::VectorXd& v, double cap,
                                                  double budget,
                                                  BudgetMode mode = BudgetMode::at_most) {
  const Eigen::Index n = v.size();
  auto clamp_at = [&](double nu) {
    return (v.array() - nu).cwiseMax(0.0).cwiseMin(cap).matrix().eval();
  };
  auto mass = [&](double nu) { return (v.array() - nu).cwiseMax(0.0).cwiseMin(cap).sum(); };

  if (n == 0) return v;
  if (mode == BudgetMode::at_most && mass(0.0) <= budget) return clamp_at(0.0);
  if (cap * static_cast<double>(n) <= budget) return Eigen::VectorXd::Constant(n, cap);

  // mass(lo) >= budget >= mass(hi)
  double lo = v.minCoeff() - cap;
  double hi = v.maxCoeff();
  if (mode == BudgetMode::at_most) lo = std::max(lo, 0.0);
  const double tol = 1e-12 * budget;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double m = mass(mid);
    if (std::abs(m - budget) <= tol * 1e-3) {
      lo = hi = mid;
      break;
    }
    (m > budget ? lo : hi) = mid;
  }

  // Exact nu on the active set at the bracket midpoint.
  double nu = 0.5 * (lo + hi);
  double free_sum = 0.0, capped = 0.0;
  int n_free = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = v(i) - nu;
    if (r >= cap) {
      capped += cap;
    } else if (r > 0.0) {
      free_sum += v(i);
      ++n_free;
    }
  }
  if (n_free > 0) {
    const double exact = (free_sum + capped - budget) / n_free;
    if (std::abs(mass(exact) - budget) <= std::abs(mass(nu) - budget)) nu = exact;
  }
  Eigen::VectorXd p = clamp_at(nu);

  // Absorb roundoff so the budget constraint holds to the last bit.
  const double excess = p.sum() - budget;
  if (excess > 0.0 && mode == BudgetMode::at_most) {
    for (Eigen::Index i = n - 1; i >= 0 && p.sum() > budget; --i) {
      if (p(i) > 0.0) p(i) = std::max(0.0, p(i) - (p.sum() - budget));
    }
  }
  return p;
}

}  // namespace isac
