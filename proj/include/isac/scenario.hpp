#pragma once

// Scenario description, allocation/symbol containers, and target/symbol sampling.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "isac/errors.hpp"
#include "isac/rng.hpp"

namespace isac {

using cdouble = std::complex<double>;

/// Independent Gaussian prior over (Re alpha, Im alpha, tau) of one target.
struct TargetPrior {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Identity();

  /// E[|alpha|^2] = |E alpha|^2 + Var(Re alpha) + Var(Im alpha).
  double rcs_power() const {
    return mean(0) * mean(0) + mean(1) * mean(1) + covariance(0, 0) + covariance(1, 1);
  }

  bool zero_mean_rcs() const { return mean(0) == 0.0 && mean(1) == 0.0; }

  bool operator==(const TargetPrior&) const = default;
};

struct ScenarioConfig {
  int n_subcarriers = 1;
  int n_symbols = 1;
  double subcarrier_spacing_hz = 15e3;
  double radar_noise_var = 1.0;
  double comm_noise_var = 1.0;
  double total_power = 1.0;
  double per_entry_power_cap = 4.0;
  std::vector<cdouble> comm_channel;  // h^c, one gain per subcarrier
  std::vector<TargetPrior> priors;

  int n_targets() const { return static_cast<int>(priors.size()); }
  int n_entries() const { return n_subcarriers * n_symbols; }
  double omega0() const { return 2.0 * std::numbers::pi * subcarrier_spacing_hz; }

  bool operator==(const ScenarioConfig&) const = default;
};

/// Default cap: four times the uniform per-entry power.
inline double default_power_cap(double total_power, int n_subcarriers, int n_symbols) {
  return 4.0 * total_power / (static_cast<double>(n_subcarriers) * n_symbols);
}

/// Throws ScenarioError naming the first violated invariant.
inline void validate(const ScenarioConfig& cfg) {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (cfg.n_subcarriers < 1) throw ScenarioError("n_subcarriers", "must be a positive integer");
  if (cfg.n_symbols < 1) throw ScenarioError("n_symbols", "must be a positive integer");
  if (cfg.priors.empty()) throw ScenarioError("targets", "at least one target is required");
  if (!positive(cfg.subcarrier_spacing_hz))
    throw ScenarioError("subcarrier_spacing_hz", "must be positive");
  if (!positive(cfg.radar_noise_var)) throw ScenarioError("radar_noise_var", "must be positive");
  if (!positive(cfg.comm_noise_var)) throw ScenarioError("comm_noise_var", "must be positive");
  if (!positive(cfg.total_power)) throw ScenarioError("total_power", "must be positive");
  if (!positive(cfg.per_entry_power_cap))
    throw ScenarioError("per_entry_power_cap", "must be positive");
  if (cfg.per_entry_power_cap * cfg.n_entries() < cfg.total_power * (1.0 - 1e-12))
    throw ScenarioError("total_power",
                        "infeasible power budget: per_entry_power_cap * n_subcarriers * "
                        "n_symbols < total_power");
  if (static_cast<int>(cfg.comm_channel.size()) != cfg.n_subcarriers)
    throw ScenarioError("comm_channel", "length must equal n_subcarriers");
  for (std::size_t n = 0; n < cfg.comm_channel.size(); ++n) {
    const cdouble h = cfg.comm_channel[n];
    if (!std::isfinite(h.real()) || !std::isfinite(h.imag()))
      throw ScenarioError("comm_channel[" + std::to_string(n) + "]", "must be finite");
  }
  for (std::size_t k = 0; k < cfg.priors.size(); ++k) {
    const auto& prior = cfg.priors[k];
    const std::string where = "targets[" + std::to_string(k) + "]";
    if (!prior.mean.allFinite()) throw ScenarioError(where + ".mean", "must be finite");
    const Eigen::Matrix3d& c = prior.covariance;
    if (!c.allFinite()) throw ScenarioError(where + ".cov", "must be finite");
    const double asym = (c - c.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * c.cwiseAbs().maxCoeff())
      throw ScenarioError(where + ".cov", "prior covariance not symmetric");
    Eigen::LLT<Eigen::Matrix3d> llt(c);
    if (llt.info() != Eigen::Success || (llt.matrixL().toDenseMatrix().diagonal().array() <= 0).any())
      throw ScenarioError(where + ".cov", "prior covariance not positive definite");
  }
}

/// Realized parameters of one target.
struct TargetParams {
  cdouble rcs;
  double delay = 0.0;  // seconds
};

/// One realization theta^r of all K targets.
struct TargetDraw {
  std::vector<TargetParams> targets;

  std::size_t size() const { return targets.size(); }

  /// [Re a_1, Im a_1, tau_1, Re a_2, ...].
  Eigen::VectorXd theta() const {
    Eigen::VectorXd v(3 * static_cast<Eigen::Index>(targets.size()));
    for (std::size_t k = 0; k < targets.size(); ++k) {
      v(3 * k) = targets[k].rcs.real();
      v(3 * k + 1) = targets[k].rcs.imag();
      v(3 * k + 2) = targets[k].delay;
    }
    return v;
  }

  static TargetDraw from_theta(const Eigen::VectorXd& theta) {
    TargetDraw d;
    for (Eigen::Index k = 0; k < theta.size() / 3; ++k)
      d.targets.push_back({cdouble(theta(3 * k), theta(3 * k + 1)), theta(3 * k + 2)});
    return d;
  }
};

/// Per-entry transmit powers P_nm stored N x M (column m is symbol m).
/// The flat vector p stacks the columns: p = [p_1; ...; p_M].
class PowerAllocation {
 public:
  PowerAllocation() = default;
  explicit PowerAllocation(Eigen::MatrixXd powers) : powers_(std::move(powers)) {}
  PowerAllocation(int n_subcarriers, int n_symbols, double fill = 0.0)
      : powers_(Eigen::MatrixXd::Constant(n_subcarriers, n_symbols, fill)) {}

  static PowerAllocation from_flat(const Eigen::VectorXd& p, int n_subcarriers, int n_symbols) {
    return PowerAllocation(p.reshaped(n_subcarriers, n_symbols));
  }

  /// Every entry at total_power / (N M).
  static PowerAllocation uniform(const ScenarioConfig& cfg) {
    return PowerAllocation(cfg.n_subcarriers, cfg.n_symbols, cfg.total_power / cfg.n_entries());
  }

  int n_subcarriers() const { return static_cast<int>(powers_.rows()); }
  int n_symbols() const { return static_cast<int>(powers_.cols()); }
  const Eigen::MatrixXd& matrix() const { return powers_; }
  double operator()(int n, int m) const { return powers_(n, m); }
  double& operator()(int n, int m) { return powers_(n, m); }
  double total() const { return powers_.sum(); }

  Eigen::VectorXd flat() const { return powers_.reshaped(); }

  /// 0 <= P_nm <= cap and sum <= budget, each to `tol` absolute.
  bool feasible(double cap, double budget, double tol = 1e-12) const {
    return powers_.size() > 0 && powers_.minCoeff() >= -tol && powers_.maxCoeff() <= cap + tol &&
           powers_.sum() <= budget + tol;
  }

 private:
  Eigen::MatrixXd powers_;
};

/// Frequency-domain symbols x_nm, N x M.
using SymbolMatrix = Eigen::MatrixXcd;

namespace detail {

inline std::vector<Eigen::Matrix3d> prior_factors(const std::vector<TargetPrior>& priors) {
  std::vector<Eigen::Matrix3d> factors;
  factors.reserve(priors.size());
  for (const auto& prior : priors) {
    Eigen::LLT<Eigen::Matrix3d> llt(prior.covariance);
    if (llt.info() != Eigen::Success)
      throw NotPositiveDefinite("sample_targets: prior covariance not positive definite");
    factors.push_back(llt.matrixL());
  }
  return factors;
}

inline TargetDraw draw_target(const std::vector<TargetPrior>& priors,
                              const std::vector<Eigen::Matrix3d>& factors, RandomStream& s) {
  TargetDraw draw;
  draw.targets.reserve(priors.size());
  for (std::size_t k = 0; k < priors.size(); ++k) {
    const Eigen::Vector3d z(s.normal(), s.normal(), s.normal());
    const Eigen::Vector3d theta = priors[k].mean + factors[k] * z;
    draw.targets.push_back({cdouble(theta(0), theta(1)), theta(2)});
  }
  return draw;
}

}  // namespace detail

/// `count` i.i.d. draws of theta^r; draw i uses substream ("theta", first_index + i).
inline std::vector<TargetDraw> sample_targets(const std::vector<TargetPrior>& priors, int count,
                                              const Rng& rng, std::uint64_t first_index = 0) {
  if (count < 1) throw PreconditionError("sample_targets: count must be >= 1");
  const auto factors = detail::prior_factors(priors);
  std::vector<TargetDraw> draws;
  draws.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    RandomStream s = rng.stream("theta", first_index + static_cast<std::uint64_t>(i));
    draws.push_back(detail::draw_target(priors, factors, s));
  }
  return draws;
}

/// Circularly-symmetric Gaussian symbols with E|x_nm|^2 = P_nm (Re and Im
/// each with variance P_nm / 2).
inline SymbolMatrix draw_symbols(const PowerAllocation& p, RandomStream& s) {
  SymbolMatrix x(p.n_subcarriers(), p.n_symbols());
  for (int m = 0; m < p.n_symbols(); ++m) {
    for (int n = 0; n < p.n_subcarriers(); ++n) {
      const double sd = std::sqrt(p(n, m) / 2.0);
      const double re = s.normal();
      const double im = s.normal();
      x(n, m) = cdouble(sd * re, sd * im);
    }
  }
  return x;
}

/// One symbol matrix from substream ("symbols", index).
inline SymbolMatrix sample_symbol_matrix(const PowerAllocation& p, const Rng& rng,
                                         std::uint64_t index) {
  RandomStream s = rng.stream("symbols", index);
  return draw_symbols(p, s);
}

inline std::vector<SymbolMatrix> sample_symbols(const PowerAllocation& p, int count, const Rng& rng,
                                                std::uint64_t first_index = 0) {
  std::vector<SymbolMatrix> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i)
    out.push_back(sample_symbol_matrix(p, rng, first_index + static_cast<std::uint64_t>(i)));
  return out;
}

}  // namespace isac
