#pragma once

// Asymptotic CRB: the large-N information matrix depends on the transmit
// symbols only through the per-entry powers and is block-diagonal across
// targets. This header provides that matrix, the resulting bound and its
// gradient in p, the zero-mean-RCS closed form, and empirical diagnostics for
// the convergence statements behind it.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "isac/errors.hpp"
#include "isac/fim.hpp"
#include "isac/numerics.hpp"
#include "isac/parallel.hpp"
#include "isac/rng.hpp"
#include "isac/scenario.hpp"

namespace isac {

/// Expected power sums with weights (n-1)^s, s = 0, 1, 2. Entry m of each
/// vector is the per-symbol sum; the totals add over symbols.
struct ExpectedUtv {
  Eigen::VectorXd u, t, v;
  double u_total = 0.0, t_total = 0.0, v_total = 0.0;
};

inline ExpectedUtv expected_utv(const PowerAllocation& p) {
  const int N = p.n_subcarriers();
  const int M = p.n_symbols();
  ExpectedUtv e{Eigen::VectorXd::Zero(M), Eigen::VectorXd::Zero(M), Eigen::VectorXd::Zero(M)};
  for (int m = 0; m < M; ++m) {
    for (int n = 0; n < N; ++n) {
      const double idx = n;
      e.u(m) += p(n, m);
      e.t(m) += idx * p(n, m);
      e.v(m) += idx * idx * p(n, m);
    }
  }
  e.u_total = e.u.sum();
  e.t_total = e.t.sum();
  e.v_total = e.v.sum();
  return e;
}

/// First moments of the RCS under the theta sample set.
struct RcsMoments {
  double mean_re = 0.0;
  double mean_im = 0.0;
  double mean_abs2 = 0.0;
};

inline std::vector<RcsMoments> rcs_moments(const std::vector<TargetDraw>& theta_samples) {
  if (theta_samples.empty()) throw PreconditionError("rcs_moments: no theta samples");
  const std::size_t K = theta_samples.front().size();
  std::vector<RcsMoments> out(K);
  for (const TargetDraw& d : theta_samples) {
    for (std::size_t k = 0; k < K; ++k) {
      out[k].mean_re += d.targets[k].rcs.real();
      out[k].mean_im += d.targets[k].rcs.imag();
      out[k].mean_abs2 += std::norm(d.targets[k].rcs);
    }
  }
  const double inv = 1.0 / static_cast<double>(theta_samples.size());
  for (auto& m : out) {
    m.mean_re *= inv;
    m.mean_im *= inv;
    m.mean_abs2 *= inv;
  }
  return out;
}

/// Each draw followed by its twin with every RCS negated. Under zero-mean
/// symmetric RCS priors the result is still a prior sample, and its RCS
/// sample mean is exactly zero, so the zero-mean closed forms apply to the
/// sampled objective without Monte Carlo error in the first moment.
inline std::vector<TargetDraw> with_negated_rcs(const std::vector<TargetDraw>& samples) {
  std::vector<TargetDraw> out;
  out.reserve(2 * samples.size());
  for (const TargetDraw& d : samples) {
    out.push_back(d);
    TargetDraw twin = d;
    for (auto& t : twin.targets) t.rcs = -t.rcs;
    out.push_back(std::move(twin));
  }
  return out;
}

namespace detail {

inline Eigen::Matrix3d asymptotic_block(const ExpectedUtv& e, const RcsMoments& a, double omega0,
                                        double radar_noise_var) {
  Eigen::Matrix3d b;
  b << e.u_total, 0.0, omega0 * e.t_total * a.mean_im,  //
      0.0, e.u_total, -omega0 * e.t_total * a.mean_re,  //
      omega0 * e.t_total * a.mean_im, -omega0 * e.t_total * a.mean_re,
      omega0 * omega0 * e.v_total * a.mean_abs2;
  return (2.0 / radar_noise_var) * b;
}

/// Diagonal of blkdiag(L_k): (N M)^{-1/2} for the RCS parts, N^{-3/2} M^{-1/2} for delays.
inline Eigen::VectorXd normalization_diagonal(int n_targets, int n_subcarriers, int n_symbols) {
  const double N = n_subcarriers, M = n_symbols;
  Eigen::VectorXd l(3 * n_targets);
  for (int k = 0; k < n_targets; ++k) {
    l(3 * k) = l(3 * k + 1) = 1.0 / std::sqrt(N * M);
    l(3 * k + 2) = 1.0 / (N * std::sqrt(N * M));
  }
  return l;
}

}  // namespace detail

/// Asymptotic (un-normalized) FIM for one theta: block-diagonal, each block
/// the single-target closed form with U, T, V replaced by their expectations.
inline FisherMatrix asymptotic_fim(const PowerAllocation& p, const TargetDraw& theta,
                                   const ScenarioConfig& cfg) {
  const ExpectedUtv e = expected_utv(p);
  const int K = static_cast<int>(theta.size());
  FisherMatrix J = FisherMatrix::zero(K);
  for (int k = 0; k < K; ++k) {
    const cdouble a = theta.targets[k].rcs;
    const RcsMoments m{a.real(), a.imag(), std::norm(a)};
    J.matrix().block<3, 3>(3 * k, 3 * k) =
        detail::asymptotic_block(e, m, cfg.omega0(), cfg.radar_noise_var);
  }
  return J;
}

/// ACRB(p) = Tr_scope{[mean_theta J_hat(p, theta) + J^p]^{-1}} and its gradient.
///
/// The theta-mean of the asymptotic FIM is linear in (Re a, Im a, |a|^2), so
/// the sample set is reduced to its RCS moments once at construction.
class AcrbModel {
 public:
  AcrbModel(const ScenarioConfig& cfg, const std::vector<TargetDraw>& theta_samples,
            DistortionScope scope = DistortionScope::full)
      : omega0_(cfg.omega0()),
        noise_var_(cfg.radar_noise_var),
        n_subcarriers_(cfg.n_subcarriers),
        n_symbols_(cfg.n_symbols),
        scope_(scope),
        prior_(prior_fim(cfg.priors)),
        moments_(rcs_moments(theta_samples)),
        selector_(scope_selector(cfg.n_targets(), scope)),
        l_(detail::normalization_diagonal(cfg.n_targets(), cfg.n_subcarriers, cfg.n_symbols)) {
    if (static_cast<int>(moments_.size()) != cfg.n_targets())
      throw PreconditionError("AcrbModel: theta samples do not match the number of targets");
  }

  int n_targets() const { return static_cast<int>(moments_.size()); }
  DistortionScope scope() const { return scope_; }

  /// mean_theta J_hat(p, theta) + J^p.
  FisherMatrix information(const PowerAllocation& p) const {
    const ExpectedUtv e = expected_utv(p);
    FisherMatrix A = prior_;
    for (int k = 0; k < n_targets(); ++k)
      A.matrix().block<3, 3>(3 * k, 3 * k) +=
          detail::asymptotic_block(e, moments_[k], omega0_, noise_var_);
    return A;
  }

  /// Inverse via the L-normalized matrix.
  Eigen::MatrixXd inverse_information(const PowerAllocation& p) const {
    const Eigen::MatrixXd scaled = l_.asDiagonal() * information(p).matrix() * l_.asDiagonal();
    return l_.asDiagonal() * inverse_spd(scaled) * l_.asDiagonal();
  }

  double value(const PowerAllocation& p) const {
    return scoped_trace(inverse_information(p), scope_);
  }

  /// d ACRB / d P_nm = -Tr(A^{-1} S A^{-1} dA/dP_nm), flattened column-major.
  Eigen::VectorXd gradient(const PowerAllocation& p) const {
    const Eigen::MatrixXd inv = inverse_information(p);
    const Eigen::MatrixXd G = inv * selector_.asDiagonal() * inv;
    // Coefficients of 1, (n-1), (n-1)^2 in -Tr(G dA/dP_nm).
    double c0 = 0.0, c1 = 0.0, c2 = 0.0;
    for (int k = 0; k < n_targets(); ++k) {
      const auto g = G.block<3, 3>(3 * k, 3 * k);
      const RcsMoments& a = moments_[k];
      c0 += g(0, 0) + g(1, 1);
      c1 += 2.0 * omega0_ * (a.mean_im * g(0, 2) - a.mean_re * g(1, 2));
      c2 += omega0_ * omega0_ * a.mean_abs2 * g(2, 2);
    }
    const double s = -2.0 / noise_var_;
    Eigen::VectorXd grad(static_cast<Eigen::Index>(n_subcarriers_) * n_symbols_);
    for (int m = 0; m < n_symbols_; ++m) {
      for (int n = 0; n < n_subcarriers_; ++n) {
        const double idx = n;
        grad(static_cast<Eigen::Index>(m) * n_subcarriers_ + n) =
            s * (c0 + idx * c1 + idx * idx * c2);
      }
    }
    return grad;
  }

 private:
  double omega0_;
  double noise_var_;
  int n_subcarriers_;
  int n_symbols_;
  DistortionScope scope_;
  FisherMatrix prior_;
  std::vector<RcsMoments> moments_;
  Eigen::VectorXd selector_;
  Eigen::VectorXd l_;
};

inline double acrb(const PowerAllocation& p, const std::vector<TargetDraw>& theta_samples,
                   const ScenarioConfig& cfg, DistortionScope scope = DistortionScope::full) {
  return AcrbModel(cfg, theta_samples, scope).value(p);
}

inline Eigen::VectorXd acrb_gradient(const PowerAllocation& p,
                                     const std::vector<TargetDraw>& theta_samples,
                                     const ScenarioConfig& cfg,
                                     DistortionScope scope = DistortionScope::full) {
  return AcrbModel(cfg, theta_samples, scope).gradient(p);
}

/// True when every prior has zero-mean RCS and a diagonal covariance.
inline bool has_zero_mean_diagonal_priors(const ScenarioConfig& cfg) {
  for (const auto& prior : cfg.priors) {
    if (!prior.zero_mean_rcs()) return false;
    const Eigen::Matrix3d& c = prior.covariance;
    if (c(0, 1) != 0.0 || c(0, 2) != 0.0 || c(1, 2) != 0.0 || c(1, 0) != 0.0 || c(2, 0) != 0.0 ||
        c(2, 1) != 0.0)
      return false;
  }
  return true;
}

/// Closed-form ACRB for zero-mean RCS priors with diagonal covariance. The
/// theta-averaged asymptotic FIM is then 2/sigma^2 diag(P, P, (w0 s_k)^2 V)
/// per target, with P the allocated total and V = sum (n-1)^2 P_nm.
inline double acrb_zero_mean(const PowerAllocation& p, const ScenarioConfig& cfg,
                             DistortionScope scope = DistortionScope::full) {
  if (!has_zero_mean_diagonal_priors(cfg))
    throw PreconditionError(
        "acrb_zero_mean: requires zero-mean RCS priors with diagonal covariance");
  const ExpectedUtv e = expected_utv(p);
  const double info = 2.0 / cfg.radar_noise_var;
  const double w0 = cfg.omega0();
  double total = 0.0;
  for (const auto& prior : cfg.priors) {
    const Eigen::Vector3d jp = prior.covariance.diagonal().cwiseInverse();
    total += 1.0 / (info * w0 * w0 * prior.rcs_power() * e.v_total + jp(2));
    if (scope == DistortionScope::full)
      total += 1.0 / (info * e.u_total + jp(0)) + 1.0 / (info * e.u_total + jp(1));
  }
  return total;
}

// ---------------------------------------------------------------------------
// Convergence diagnostics

struct ConvergenceRow {
  int n_subcarriers;
  std::string quantity;
  double param;
  double value;
};

/// Rows in (N, quantity, param) order. Quantities:
///   slln_residual    param s: median |sum_m (U_s - E U_s)| / (M sum_n (n-1)^s)
///   order_sum_zero   param t: |sum (n-1)^t P_nm| / (N^{t+1} M P_max)
///   order_sum_omega  param t: same with phase e^{j omega (n-1)}
///   order_c_fit      param t: N * order_sum_omega
///   order_envelope   param 0: 2 max_{n<=N} |sum_{i<n} e^{j omega i}|, an
///                    Abel-summation bound on N * order_sum_omega for
///                    uniform power and every t
///   omega            param 0: the omega used
///   omega_separated  param 0: 1 when |omega (N-1)| >= pi
///   blockdiag_error  param 0: median relative Frobenius norm of the
///                    off-diagonal blocks of the L-normalized expected FIM
struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;

  std::optional<double> value(int n, const std::string& quantity, double param = 0.0) const {
    for (const auto& r : rows)
      if (r.n_subcarriers == n && r.quantity == quantity && r.param == param) return r.value;
    return std::nullopt;
  }
};

struct ConvergenceOptions {
  int n_symbol_draws = 100;
  int n_theta_draws = 32;
  std::optional<double> omega;  ///< default: w0 |E tau_1 - E tau_2| when K >= 2, else pi/2
  unsigned threads = 1;
};

/// `p` (sized for cfg) re-instantiated on N subcarriers by piecewise-constant
/// resampling of its profile; the per-entry power level is preserved.
inline PowerAllocation resample_profile(const PowerAllocation& p, int n_subcarriers) {
  const int src = p.n_subcarriers();
  PowerAllocation out(n_subcarriers, p.n_symbols());
  for (int m = 0; m < p.n_symbols(); ++m)
    for (int n = 0; n < n_subcarriers; ++n)
      out(n, m) = p(static_cast<int>(static_cast<long long>(n) * src / n_subcarriers), m);
  return out;
}

/// cfg with N subcarriers; the channel is resampled the same way as p.
inline ScenarioConfig with_subcarriers(const ScenarioConfig& cfg, int n_subcarriers) {
  ScenarioConfig out = cfg;
  const int src = cfg.n_subcarriers;
  out.n_subcarriers = n_subcarriers;
  out.comm_channel.resize(static_cast<std::size_t>(n_subcarriers));
  for (int n = 0; n < n_subcarriers; ++n)
    out.comm_channel[static_cast<std::size_t>(n)] =
        cfg.comm_channel[static_cast<std::size_t>(static_cast<long long>(n) * src / n_subcarriers)];
  out.total_power = cfg.total_power * n_subcarriers / src;
  return out;
}

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

/// |sum_n sum_m (n-1)^t P_nm e^{j omega (n-1)}| / (N^{t+1} M P_max).
inline double normalized_order_sum(const PowerAllocation& p, int t, double omega) {
  const double N = p.n_subcarriers(), M = p.n_symbols();
  const double cap = p.matrix().maxCoeff();
  if (cap <= 0.0) return 0.0;
  cdouble s{};
  for (int m = 0; m < p.n_symbols(); ++m)
    for (int n = 0; n < p.n_subcarriers(); ++n)
      s += std::pow(static_cast<double>(n), t) * p(n, m) *
           std::polar(1.0, omega * static_cast<double>(n));
  return std::abs(s) / (std::pow(N, t + 1) * M * cap);
}

inline double partial_sum_envelope(int n, double omega) {
  cdouble s{};
  double best = 0.0;
  for (int i = 0; i < n; ++i) {
    s += std::polar(1.0, omega * static_cast<double>(i));
    best = std::max(best, std::abs(s));
  }
  return 2.0 * best;
}

inline double blockdiag_error(const FisherMatrix& J, int n_subcarriers, int n_symbols) {
  const Eigen::VectorXd l =
      normalization_diagonal(J.n_targets(), n_subcarriers, n_symbols);
  const Eigen::MatrixXd scaled = l.asDiagonal() * J.matrix() * l.asDiagonal();
  Eigen::MatrixXd off = scaled;
  for (int k = 0; k < J.n_targets(); ++k) off.block<3, 3>(3 * k, 3 * k).setZero();
  const double total = scaled.norm();
  return total > 0.0 ? off.norm() / total : 0.0;
}

}  // namespace detail

inline ConvergenceReport convergence_report(const ScenarioConfig& cfg, const PowerAllocation& p,
                                            const std::vector<int>& n_grid, const Rng& rng,
                                            const ConvergenceOptions& opts = {}) {
  for (int n : n_grid)
    if (n < 2) throw PreconditionError("convergence_report: every N must be >= 2");
  double omega = std::numbers::pi / 2.0;
  if (opts.omega) {
    omega = *opts.omega;
  } else if (cfg.n_targets() >= 2) {
    omega = cfg.omega0() * std::abs(cfg.priors[0].mean(2) - cfg.priors[1].mean(2));
  }

  std::vector<std::vector<ConvergenceRow>> per_n(n_grid.size());
  parallel_for(n_grid.size(), opts.threads, [&](std::size_t gi) {
    const int N = n_grid[gi];
    const PowerAllocation pn = resample_profile(p, N);
    const ScenarioConfig cn = with_subcarriers(cfg, N);
    const int M = pn.n_symbols();
    auto& rows = per_n[gi];

    // SLLN residuals of the random power sums.
    std::vector<std::vector<double>> residuals(3);
    for (int draw = 0; draw < opts.n_symbol_draws; ++draw) {
      RandomStream s = rng.stream("converge-symbols", static_cast<std::uint64_t>(draw),
                                  static_cast<std::uint64_t>(N));
      const Eigen::MatrixXd power = draw_symbols(pn, s).cwiseAbs2();
      for (int order = 0; order < 3; ++order) {
        double diff = 0.0, weight = 0.0;
        for (int n = 0; n < N; ++n) {
          const double w = std::pow(static_cast<double>(n), order);
          weight += w;
          for (int m = 0; m < M; ++m) diff += w * (power(n, m) - pn(n, m));
        }
        residuals[static_cast<std::size_t>(order)].push_back(std::abs(diff) / (M * weight));
      }
    }
    for (int order = 0; order < 3; ++order)
      rows.push_back({N, "slln_residual", static_cast<double>(order),
                      detail::median(residuals[static_cast<std::size_t>(order)])});

    for (int t = 0; t < 3; ++t)
      rows.push_back({N, "order_sum_zero", static_cast<double>(t),
                      detail::normalized_order_sum(pn, t, 0.0)});
    for (int t = 0; t < 3; ++t)
      rows.push_back({N, "order_sum_omega", static_cast<double>(t),
                      detail::normalized_order_sum(pn, t, omega)});
    for (int t = 0; t < 3; ++t)
      rows.push_back({N, "order_c_fit", static_cast<double>(t),
                      N * detail::normalized_order_sum(pn, t, omega)});
    rows.push_back({N, "order_envelope", 0.0, detail::partial_sum_envelope(N, omega)});
    rows.push_back({N, "omega", 0.0, omega});
    rows.push_back({N, "omega_separated", 0.0,
                    std::abs(omega * (N - 1)) >= std::numbers::pi ? 1.0 : 0.0});

    // Off-block-diagonal share of the exact expected FIM.
    const auto factors = isac::detail::prior_factors(cfg.priors);
    std::vector<double> errors;
    for (int draw = 0; draw < opts.n_theta_draws; ++draw) {
      RandomStream s = rng.stream("converge-theta", static_cast<std::uint64_t>(draw),
                                  static_cast<std::uint64_t>(N));
      const TargetDraw theta = isac::detail::draw_target(cfg.priors, factors, s);
      errors.push_back(
          detail::blockdiag_error(expected_observation_fim(pn, theta, cn), N, M));
    }
    rows.push_back({N, "blockdiag_error", 0.0, detail::median(errors)});
  });

  ConvergenceReport report;
  for (auto& rows : per_n)
    for (auto& r : rows) report.rows.push_back(std::move(r));
  return report;
}

}  // namespace isac
