#pragma once

// Exact observation Fisher information, prior information, and the Bayesian
// CRB that uses them as a distortion surrogate.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <string_view>
#include <vector>

#include "isac/errors.hpp"
#include "isac/numerics.hpp"
#include "isac/parallel.hpp"
#include "isac/rng.hpp"
#include "isac/scenario.hpp"

namespace isac {

/// Which diagonal entries of the inverse information matrix count as distortion.
enum class DistortionScope {
  full,        ///< all 3K entries
  delay_only,  ///< the K delay entries
};

inline std::string_view to_string(DistortionScope s) {
  return s == DistortionScope::full ? "full" : "delay";
}

/// Sum of the selected diagonal entries of an inverse information matrix.
inline double scoped_trace(const Eigen::MatrixXd& inv, DistortionScope scope) {
  if (scope == DistortionScope::full) return inv.trace();
  double s = 0.0;
  for (Eigen::Index i = 2; i < inv.rows(); i += 3) s += inv(i, i);
  return s;
}

/// 0/1 selector for the scoped diagonal.
inline Eigen::VectorXd scope_selector(int n_targets, DistortionScope scope) {
  Eigen::VectorXd s = Eigen::VectorXd::Ones(3 * n_targets);
  if (scope == DistortionScope::delay_only)
    for (int k = 0; k < n_targets; ++k) s(3 * k) = s(3 * k + 1) = 0.0;
  return s;
}

/// Complex power sums for one (m, k, l):
///   u = sum_n w_n e^{j w0 (n-1) (tau_k - tau_l)}, t = sum_n (n-1) w_n e^{...},
///   v = sum_n (n-1)^2 w_n e^{...},
/// with w_n = |x_nm|^2 (per realization) or P_nm (expected). Diagonal k == l
/// entries are real.
struct UtvTriple {
  cdouble u, t, v;
};

class UTVSums {
 public:
  /// `weights` is N x M (|x_nm|^2 or P_nm).
  UTVSums(const Eigen::MatrixXd& weights, const TargetDraw& theta, double omega0)
      : n_symbols_(static_cast<int>(weights.cols())),
        n_targets_(static_cast<int>(theta.size())),
        data_(static_cast<std::size_t>(n_symbols_ * n_targets_ * n_targets_)) {
    const Eigen::Index n_sub = weights.rows();
    for (int m = 0; m < n_symbols_; ++m) {
      double u = 0.0, t = 0.0, v = 0.0;
      for (Eigen::Index n = 0; n < n_sub; ++n) {
        const double w = weights(n, m);
        const double idx = static_cast<double>(n);
        u += w;
        t += idx * w;
        v += idx * idx * w;
      }
      for (int k = 0; k < n_targets_; ++k) at(m, k, k) = {u, t, v};
      for (int k = 0; k < n_targets_; ++k) {
        for (int l = k + 1; l < n_targets_; ++l) {
          const double dtau = theta.targets[k].delay - theta.targets[l].delay;
          cdouble cu{}, ct{}, cv{};
          for (Eigen::Index n = 0; n < n_sub; ++n) {
            const double idx = static_cast<double>(n);
            const cdouble e = weights(n, m) * std::polar(1.0, omega0 * idx * dtau);
            cu += e;
            ct += idx * e;
            cv += idx * idx * e;
          }
          at(m, k, l) = {cu, ct, cv};
          at(m, l, k) = {std::conj(cu), std::conj(ct), std::conj(cv)};
        }
      }
    }
  }

  int n_symbols() const { return n_symbols_; }
  int n_targets() const { return n_targets_; }

  const UtvTriple& operator()(int m, int k, int l) const {
    return data_[static_cast<std::size_t>((m * n_targets_ + k) * n_targets_ + l)];
  }

  /// Sum over symbols for one (k, l).
  UtvTriple summed(int k, int l) const {
    UtvTriple s{};
    for (int m = 0; m < n_symbols_; ++m) {
      const UtvTriple& e = (*this)(m, k, l);
      s.u += e.u;
      s.t += e.t;
      s.v += e.v;
    }
    return s;
  }

 private:
  UtvTriple& at(int m, int k, int l) {
    return data_[static_cast<std::size_t>((m * n_targets_ + k) * n_targets_ + l)];
  }

  int n_symbols_;
  int n_targets_;
  std::vector<UtvTriple> data_;
};

/// Assembles the 3K x 3K FIM from the U/T/V sums:
///   block(k,l) = 2/sigma^2 * Re[ d_k^H d_l ] with
///   d_{k,Re a} = x o phi_k, d_{k,Im a} = j x o phi_k, d_{k,tau} = a_k x o dphi_k.
inline FisherMatrix assemble_fim(const UTVSums& sums, const TargetDraw& theta, double omega0,
                                 double radar_noise_var) {
  const int K = sums.n_targets();
  FisherMatrix J = FisherMatrix::zero(K);
  const double scale = 2.0 / radar_noise_var;
  for (int k = 0; k < K; ++k) {
    const cdouble ak = theta.targets[k].rcs;
    for (int l = 0; l < K; ++l) {
      const cdouble al = theta.targets[l].rcs;
      const UtvTriple s = sums.summed(k, l);
      Eigen::Matrix3d b;
      b(0, 0) = s.u.real();
      b(0, 1) = -s.u.imag();
      b(1, 0) = s.u.imag();
      b(1, 1) = s.u.real();
      b(0, 2) = omega0 * (al * s.t).imag();
      b(1, 2) = -omega0 * (al * s.t).real();
      b(2, 0) = -omega0 * (std::conj(ak) * s.t).imag();
      b(2, 1) = -omega0 * (std::conj(ak) * s.t).real();
      b(2, 2) = omega0 * omega0 * (std::conj(ak) * al * s.v).real();
      J.matrix().block<3, 3>(3 * k, 3 * l) = scale * b;
    }
  }
  return J;
}

/// J^o(x) for one realization of symbols and target parameters (closed form).
inline FisherMatrix observation_fim(const SymbolMatrix& x, const TargetDraw& theta,
                                    const ScenarioConfig& cfg) {
  const Eigen::MatrixXd power = x.cwiseAbs2();
  return assemble_fim(UTVSums(power, theta, cfg.omega0()), theta, cfg.omega0(),
                      cfg.radar_noise_var);
}

/// E_x[J^o(x)] for Gaussian symbols with powers p: J^o is linear in |x_nm|^2.
inline FisherMatrix expected_observation_fim(const PowerAllocation& p, const TargetDraw& theta,
                                             const ScenarioConfig& cfg) {
  return assemble_fim(UTVSums(p.matrix(), theta, cfg.omega0()), theta, cfg.omega0(),
                      cfg.radar_noise_var);
}

enum class DelayDerivative {
  analytic,           ///< alpha_k x o dphi/dtau
  finite_difference,  ///< central difference of mu with step 1e-12 s
};

/// Direct Gram-matrix construction 2/sigma^2 Re[(dmu/dtheta)^H (dmu/dtheta)].
/// Independent of the U/T/V route; used to cross-check observation_fim.
inline FisherMatrix observation_fim_oracle(const SymbolMatrix& x, const TargetDraw& theta,
                                           const ScenarioConfig& cfg,
                                           DelayDerivative mode = DelayDerivative::analytic) {
  const int N = static_cast<int>(x.rows());
  const int M = static_cast<int>(x.cols());
  const int K = static_cast<int>(theta.size());
  const double f0 = cfg.subcarrier_spacing_hz;
  constexpr double kStep = 1e-12;

  FisherMatrix J = FisherMatrix::zero(K);
  for (int m = 0; m < M; ++m) {
    const Eigen::VectorXcd xm = x.col(m);
    Eigen::MatrixXcd d(N, 3 * K);
    for (int k = 0; k < K; ++k) {
      const double tau = theta.targets[k].delay;
      const cdouble a = theta.targets[k].rcs;
      const Eigen::VectorXcd phi = steering_vector(tau, N, f0);
      d.col(3 * k) = xm.cwiseProduct(phi);
      d.col(3 * k + 1) = cdouble(0.0, 1.0) * xm.cwiseProduct(phi);
      if (mode == DelayDerivative::analytic) {
        d.col(3 * k + 2) = a * xm.cwiseProduct(steering_derivative(tau, N, f0));
      } else {
        const Eigen::VectorXcd plus = steering_vector(tau + kStep, N, f0);
        const Eigen::VectorXcd minus = steering_vector(tau - kStep, N, f0);
        d.col(3 * k + 2) = a * xm.cwiseProduct(plus - minus) / (2.0 * kStep);
      }
    }
    J.matrix() += (d.adjoint() * d).real();
  }
  return (2.0 / cfg.radar_noise_var) * J;
}

/// Block-diagonal prior information; each block is the inverse prior covariance.
inline FisherMatrix prior_fim(const std::vector<TargetPrior>& priors) {
  const int K = static_cast<int>(priors.size());
  FisherMatrix J = FisherMatrix::zero(K);
  for (int k = 0; k < K; ++k) {
    Eigen::LLT<Eigen::Matrix3d> llt(priors[k].covariance);
    if (llt.info() != Eigen::Success)
      throw NotPositiveDefinite("prior_fim: covariance of target " + std::to_string(k) +
                                " not positive definite");
    Eigen::Matrix3d inv = llt.solve(Eigen::Matrix3d::Identity());
    J.matrix().block<3, 3>(3 * k, 3 * k) = 0.5 * (inv + inv.transpose());
  }
  return J;
}

/// Moves delays that coincide to within 1e-15 s apart by 1e-12 s.
inline TargetDraw separate_coincident_delays(TargetDraw theta) {
  for (std::size_t k = 0; k < theta.size(); ++k)
    for (std::size_t l = k + 1; l < theta.size(); ++l)
      if (std::abs(theta.targets[k].delay - theta.targets[l].delay) < 1e-15)
        theta.targets[l].delay += 1e-12;
  return theta;
}

/// Tr_scope{[mean_theta J^o(x) + J^p]^{-1}} with the theta expectation
/// replaced by the sample mean over `theta_samples`.
inline double bcrb_given_input(const SymbolMatrix& x, const std::vector<TargetDraw>& theta_samples,
                               const ScenarioConfig& cfg, const FisherMatrix& prior,
                               DistortionScope scope = DistortionScope::full) {
  if (theta_samples.empty()) throw PreconditionError("bcrb_given_input: no theta samples");
  const Eigen::MatrixXd power = x.cwiseAbs2();
  FisherMatrix mean = FisherMatrix::zero(cfg.n_targets());
  for (const TargetDraw& raw : theta_samples) {
    const TargetDraw theta = separate_coincident_delays(raw);
    mean += assemble_fim(UTVSums(power, theta, cfg.omega0()), theta, cfg.omega0(),
                         cfg.radar_noise_var);
  }
  mean = (1.0 / static_cast<double>(theta_samples.size())) * mean;
  return scoped_trace(inverse_spd(mean + prior), scope);
}

inline double bcrb_given_input(const SymbolMatrix& x, const std::vector<TargetDraw>& theta_samples,
                               const ScenarioConfig& cfg,
                               DistortionScope scope = DistortionScope::full) {
  return bcrb_given_input(x, theta_samples, cfg, prior_fim(cfg.priors), scope);
}

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Monte Carlo E_x[BCRB(x)] over `n_x` Gaussian symbol draws with power
/// profile p. Symbol draw i uses substream ("symbols", i); the theta sample
/// set is shared by every x draw.
inline MonteCarloEstimate expected_bcrb(const PowerAllocation& p, const ScenarioConfig& cfg,
                                        int n_x, const std::vector<TargetDraw>& theta_samples,
                                        const Rng& rng,
                                        DistortionScope scope = DistortionScope::full,
                                        unsigned threads = 1) {
  if (n_x < 2) throw PreconditionError("expected_bcrb: n_x must be >= 2");
  if (theta_samples.size() < 1) throw PreconditionError("expected_bcrb: no theta samples");
  const FisherMatrix prior = prior_fim(cfg.priors);
  std::vector<double> values(static_cast<std::size_t>(n_x));
  parallel_for(values.size(), threads, [&](std::size_t i) {
    const SymbolMatrix x = sample_symbol_matrix(p, rng, i);
    values[i] = bcrb_given_input(x, theta_samples, cfg, prior, scope);
  });
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / n_x;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n_x - 1) / n_x)};
}

/// Same, drawing `n_theta` prior samples from substreams ("theta", i).
inline MonteCarloEstimate expected_bcrb(const PowerAllocation& p, const ScenarioConfig& cfg,
                                        int n_x, int n_theta, const Rng& rng,
                                        DistortionScope scope = DistortionScope::full,
                                        unsigned threads = 1) {
  if (n_theta < 2) throw PreconditionError("expected_bcrb: n_theta must be >= 2");
  return expected_bcrb(p, cfg, n_x, sample_targets(cfg.priors, n_theta, rng), rng, scope,
                       threads);
}

}  // namespace isac
