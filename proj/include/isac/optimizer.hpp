#pragma once

// Power allocation on the capacity/ACRB Pareto boundary.
//
// Both objectives are functions of the per-entry powers only: capacity is
// concave and ACRB is convex, so the boundary is traced by maximizing
// C(p) - lambda * D(p) over {0 <= P_nm <= P_max, sum P_nm <= P}.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "isac/acrb.hpp"
#include "isac/errors.hpp"
#include "isac/fim.hpp"
#include "isac/numerics.hpp"
#include "isac/parallel.hpp"
#include "isac/scenario.hpp"

namespace isac {

// ---------------------------------------------------------------------------
// Communication side

/// sigma_c^2 / |h_n|^2 per subcarrier (infinite for a dead subcarrier).
inline Eigen::VectorXd inverse_channel_snr(const ScenarioConfig& cfg) {
  Eigen::VectorXd a(cfg.n_subcarriers);
  for (int n = 0; n < cfg.n_subcarriers; ++n) {
    const double g = std::norm(cfg.comm_channel[static_cast<std::size_t>(n)]);
    a(n) = g > 0.0 ? cfg.comm_noise_var / g : std::numeric_limits<double>::infinity();
  }
  return a;
}

/// sum_m sum_n log2(1 + P_nm |h_n|^2 / sigma_c^2), bits per block.
inline double capacity(const PowerAllocation& p, const ScenarioConfig& cfg) {
  double bits = 0.0;
  for (int m = 0; m < p.n_symbols(); ++m) {
    for (int n = 0; n < p.n_subcarriers(); ++n) {
      const double g = std::norm(cfg.comm_channel[static_cast<std::size_t>(n)]);
      bits += std::log1p(p(n, m) * g / cfg.comm_noise_var);
    }
  }
  return bits / std::numbers::ln2;
}

/// d capacity / d P_nm, flattened column-major.
inline Eigen::VectorXd capacity_gradient(const PowerAllocation& p, const ScenarioConfig& cfg) {
  Eigen::VectorXd g(p.n_subcarriers() * p.n_symbols());
  for (int m = 0; m < p.n_symbols(); ++m) {
    for (int n = 0; n < p.n_subcarriers(); ++n) {
      const double gain = std::norm(cfg.comm_channel[static_cast<std::size_t>(n)]) / cfg.comm_noise_var;
      g(m * p.n_subcarriers() + n) = gain / (std::numbers::ln2 * (1.0 + p(n, m) * gain));
    }
  }
  return g;
}

/// Capacity-optimal allocation: P_nm = clamp(mu - sigma^2/|h_n|^2, 0, P_max)
/// with the water level mu set so that the budget is spent (or every cap binds).
inline PowerAllocation waterfill_c_optimal(const ScenarioConfig& cfg) {
  const int N = cfg.n_subcarriers, M = cfg.n_symbols;
  const double cap = cfg.per_entry_power_cap, budget = cfg.total_power;
  if (cap * N * M <= budget) return PowerAllocation(N, M, cap);

  const Eigen::VectorXd a = inverse_channel_snr(cfg);
  auto fill = [&](double mu) {
    double s = 0.0;
    for (int n = 0; n < N; ++n) s += std::clamp(mu - a(n), 0.0, cap);
    return s * M;
  };
  double lo = 0.0;
  double hi = cap;
  for (int n = 0; n < N; ++n)
    if (std::isfinite(a(n))) hi = std::max(hi, a(n) + cap);
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (fill(mid) > budget ? hi : lo) = mid;
  }
  // Exact level on the bracket's active set.
  double mu = 0.5 * (lo + hi);
  double free_sum = 0.0, capped = 0.0;
  int n_free = 0;
  for (int n = 0; n < N; ++n) {
    const double r = mu - a(n);
    if (r >= cap) {
      capped += cap;
    } else if (r > 0.0) {
      free_sum += a(n);
      ++n_free;
    }
  }
  if (n_free > 0) {
    const double exact = (budget / M - capped + free_sum) / n_free;
    if (std::abs(fill(exact) - budget) <= std::abs(fill(mu) - budget)) mu = exact;
  }
  PowerAllocation p(N, M);
  for (int m = 0; m < M; ++m)
    for (int n = 0; n < N; ++n) p(n, m) = std::clamp(mu - a(n), 0.0, cap);
  const double excess = p.total() - budget;
  if (excess > 0.0) p = PowerAllocation(p.matrix() * (budget / p.total()));
  return p;
}

/// Largest relative violation of the water-filling KKT conditions: with
/// g_nm = d C / d P_nm and multiplier nu >= 0, free entries need g = nu,
/// zero entries g <= nu, capped entries g >= nu, and nu (sum - P) = 0.
inline double waterfill_kkt_residual(const PowerAllocation& p, const ScenarioConfig& cfg) {
  const Eigen::VectorXd g = capacity_gradient(p, cfg);
  const Eigen::VectorXd x = p.flat();
  const double cap = cfg.per_entry_power_cap;
  const double tol = 1e-12 * std::max(cap, 1.0);
  std::vector<double> free_g;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x(i) > tol && x(i) < cap - tol) free_g.push_back(g(i));
  const bool budget_active = p.total() >= cfg.total_power * (1.0 - 1e-12);
  double nu = 0.0;
  if (!free_g.empty()) {
    nu = 0.0;
    for (double v : free_g) nu += v;
    nu /= static_cast<double>(free_g.size());
  } else if (budget_active) {
    // Only bound entries: any nu between max over zeros and min over caps works.
    double lo = 0.0, hi = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (x(i) <= tol) lo = std::max(lo, g(i));
      else hi = std::min(hi, g(i));
    }
    nu = std::isfinite(hi) ? std::max(lo, std::min(hi, lo)) : lo;
  }
  const double scale = std::max({nu, g.cwiseAbs().maxCoeff(), 1e-300});
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double v = 0.0;
    if (x(i) <= tol) v = std::max(0.0, g(i) - nu);
    else if (x(i) >= cap - tol) v = std::max(0.0, nu - g(i));
    else v = std::abs(g(i) - nu);
    worst = std::max(worst, v / scale);
  }
  if (!budget_active) worst = std::max(worst, nu / scale);
  return worst;
}

// ---------------------------------------------------------------------------
// Sensing side

/// Sensing-optimal allocation for zero-mean RCS priors: per symbol, the
/// floor(P / (M P_max)) highest subcarriers at P_max and the remainder
/// (P - P_max M N_full) / M on the next one down.
inline PowerAllocation sensing_optimal_closed_form(const ScenarioConfig& cfg) {
  for (const auto& prior : cfg.priors)
    if (!prior.zero_mean_rcs())
      throw PreconditionError("sensing_optimal_closed_form: requires zero-mean RCS priors");
  const int N = cfg.n_subcarriers, M = cfg.n_symbols;
  const double cap = cfg.per_entry_power_cap;
  const double per_symbol = cfg.total_power / M;
  if (cap * N <= per_symbol) return PowerAllocation(N, M, cap);

  const int n_full = std::min(N, static_cast<int>(std::floor(per_symbol / cap)));
  const double remainder = std::max(0.0, (cfg.total_power - cap * M * n_full) / M);
  PowerAllocation p(N, M);
  for (int m = 0; m < M; ++m) {
    for (int n = N - n_full; n < N; ++n) p(n, m) = cap;
    if (n_full < N) p(N - n_full - 1, m) = std::min(remainder, cap);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Projected gradient

struct SolverOptions {
  int max_iterations = 10000;
  double tolerance = 1e-8;    ///< on ||P(y - grad) - y|| relative to its initial value
  double initial_step = 1.0;
  double shrink = 0.5;
  double armijo = 1e-4;
  bool spectral_step = true;  ///< Barzilai-Borwein trial step after the first iteration
};

struct SolverResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  double pg_norm = 0.0;
  double pg_norm_initial = 0.0;
};

/// Minimizes f over a convex set given by `project` using projected gradient
/// steps with Armijo backtracking along the projection arc. Convergence is
/// declared when the projected-gradient norm drops below
/// tolerance * max(initial norm, 1).
template <class Objective, class Gradient, class Projection>
SolverResult projected_gradient(Objective&& f, Gradient&& grad, Projection&& project,
                                Eigen::VectorXd x0, const SolverOptions& opts = {}) {
  SolverResult r;
  r.x = project(x0);
  r.value = f(r.x);
  Eigen::VectorXd g = grad(r.x);
  auto pg_norm = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& gx) {
    return (project(Eigen::VectorXd(x - gx)) - x).norm();
  };
  r.pg_norm = r.pg_norm_initial = pg_norm(r.x, g);
  const double target = opts.tolerance * std::max(r.pg_norm_initial, 1.0);
  double step = opts.initial_step;

  for (r.iterations = 0; r.iterations < opts.max_iterations; ++r.iterations) {
    if (r.pg_norm <= target) {
      r.converged = true;
      return r;
    }
    double t = step;
    Eigen::VectorXd trial;
    double f_trial = 0.0;
    bool accepted = false;
    for (int back = 0; back < 80; ++back) {
      trial = project(Eigen::VectorXd(r.x - t * g));
      f_trial = f(trial);
      const double decrease = g.dot(trial - r.x);
      const double slack = 4.0 * std::numeric_limits<double>::epsilon() * std::abs(r.value);
      if (f_trial <= r.value + opts.armijo * decrease + slack) {
        accepted = true;
        break;
      }
      t *= opts.shrink;
    }
    if (!accepted) break;  // stalled at roundoff level

    const Eigen::VectorXd g_new = grad(trial);
    const Eigen::VectorXd s = trial - r.x;
    const Eigen::VectorXd y = g_new - g;
    if (opts.spectral_step) {
      const double sy = s.dot(y);
      step = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, 1e-12, 1e12) : opts.initial_step;
    }
    if (s.squaredNorm() == 0.0 && r.pg_norm > target) {
      r.x = trial;
      break;
    }
    r.x = std::move(trial);
    r.value = f_trial;
    g = g_new;
    r.pg_norm = pg_norm(r.x, g);
  }
  r.converged = r.pg_norm <= target;
  return r;
}

// ---------------------------------------------------------------------------
// Pareto points

struct ParetoPoint {
  double distortion = 0.0;  ///< ACRB in the chosen scope
  double capacity = 0.0;    ///< bits per block
  PowerAllocation allocation;
  double weight = 0.0;      ///< lambda; +inf marks the sensing-optimal endpoint
  bool converged = true;
  int iterations = 0;
};

/// Shared state for repeated solves on one scenario and theta sample set.
class ParetoProblem {
 public:
  ParetoProblem(const ScenarioConfig& cfg, const std::vector<TargetDraw>& theta_samples,
                DistortionScope scope = DistortionScope::full, SolverOptions opts = {})
      : cfg_(cfg),
        acrb_(cfg, theta_samples, scope),
        opts_(opts),
        unit_(cfg.total_power / cfg.n_entries()),
        waterfill_(waterfill_c_optimal(cfg)) {
    const Eigen::VectorXd gc = capacity_gradient(waterfill_, cfg_);
    capacity_scale_ = unit_ * std::max(gc.cwiseAbs().maxCoeff(), 1e-300);
  }

  const ScenarioConfig& config() const { return cfg_; }
  const AcrbModel& model() const { return acrb_; }
  DistortionScope scope() const { return acrb_.scope(); }
  const PowerAllocation& waterfill() const { return waterfill_; }

  double distortion(const PowerAllocation& p) const { return acrb_.value(p); }

  ParetoPoint make_point(const PowerAllocation& p, double weight, bool converged = true,
                         int iterations = 0) const {
    return {distortion(p), capacity(p, cfg_), p, weight, converged, iterations};
  }

  /// lambda at which the capacity gradient is 1e-3 of lambda * ||ACRB gradient||
  /// at the water-filling point.
  double lambda_scale() const {
    const double gc = capacity_gradient(waterfill_, cfg_).norm();
    const double gd = acrb_.gradient(waterfill_).norm();
    return gd > 0.0 ? gc / gd : 1.0;
  }
  double lambda_max() const { return 1e3 * lambda_scale(); }

  /// max C(p) - lambda D(p) over the box-capped budget set.
  ParetoPoint scalarized(double lambda, const std::optional<PowerAllocation>& start = {}) const {
    if (!(lambda >= 0.0)) throw PreconditionError("scalarized_solve: lambda must be >= 0");
    const double scale = capacity_scale_;
    auto f = [&](const Eigen::VectorXd& y) {
      const PowerAllocation p = to_alloc(y);
      return (-capacity(p, cfg_) + (lambda > 0.0 ? lambda * acrb_.value(p) : 0.0)) / scale;
    };
    auto g = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd {
      const PowerAllocation p = to_alloc(y);
      Eigen::VectorXd grad = -capacity_gradient(p, cfg_);
      if (lambda > 0.0) grad += lambda * acrb_.gradient(p);
      return grad * (unit_ / scale);
    };
    auto proj = [&](const Eigen::VectorXd& y) {
      return project_box_capped_simplex(y, cfg_.per_entry_power_cap / unit_,
                                        cfg_.total_power / unit_, BudgetMode::at_most);
    };
    const SolverResult r =
        projected_gradient(f, g, proj, to_scaled(start ? *start : waterfill_), opts_);
    return make_point(to_alloc(r.x), lambda, r.converged, r.iterations);
  }

  /// min D(p) subject to sum p = P and the caps.
  ParetoPoint sensing_optimal() const {
    const PowerAllocation start = PowerAllocation::uniform(cfg_);
    const double scale =
        unit_ * std::max(acrb_.gradient(start).cwiseAbs().maxCoeff(), 1e-300);
    auto f = [&](const Eigen::VectorXd& y) { return acrb_.value(to_alloc(y)) / scale; };
    auto g = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd {
      return acrb_.gradient(to_alloc(y)) * (unit_ / scale);
    };
    auto proj = [&](const Eigen::VectorXd& y) {
      return project_box_capped_simplex(y, cfg_.per_entry_power_cap / unit_,
                                        cfg_.total_power / unit_, BudgetMode::exact);
    };
    const SolverResult r = projected_gradient(f, g, proj, to_scaled(start), opts_);
    return make_point(to_alloc(r.x), std::numeric_limits<double>::infinity(), r.converged,
                      r.iterations);
  }

 private:
  PowerAllocation to_alloc(const Eigen::VectorXd& y) const {
    return PowerAllocation::from_flat(y * unit_, cfg_.n_subcarriers, cfg_.n_symbols);
  }
  Eigen::VectorXd to_scaled(const PowerAllocation& p) const { return p.flat() / unit_; }

  ScenarioConfig cfg_;
  AcrbModel acrb_;
  SolverOptions opts_;
  double unit_;
  PowerAllocation waterfill_;
  double capacity_scale_ = 1.0;
};

/// Projected-gradient minimizer of ACRB with the budget spent exactly.
/// `converged` is false when the iteration limit was hit; the best iterate is kept.
inline ParetoPoint sensing_optimal_numeric(const ScenarioConfig& cfg,
                                           const std::vector<TargetDraw>& theta_samples,
                                           DistortionScope scope = DistortionScope::full,
                                           const SolverOptions& opts = {}) {
  return ParetoProblem(cfg, theta_samples, scope, opts).sensing_optimal();
}

inline ParetoPoint scalarized_solve(double lambda, const ScenarioConfig& cfg,
                                    const std::vector<TargetDraw>& theta_samples,
                                    DistortionScope scope = DistortionScope::full,
                                    const SolverOptions& opts = {}) {
  return ParetoProblem(cfg, theta_samples, scope, opts).scalarized(lambda);
}

/// Capacity-maximal point with ACRB <= d_target, found by bisection on lambda
/// until |ACRB - d_target| <= 1e-4 d_target.
inline ParetoPoint solve_for_distortion(const ParetoProblem& problem, double d_target,
                                        const std::optional<ParetoPoint>& sensing_point = {}) {
  const ParetoPoint c_point = problem.make_point(problem.waterfill(), 0.0);
  if (d_target >= c_point.distortion) return c_point;

  const ParetoPoint s_point = sensing_point ? *sensing_point : problem.sensing_optimal();
  if (d_target < s_point.distortion * (1.0 - 1e-9))
    throw InfeasibleError("solve_for_distortion: target distortion is below the sensing-optimal ACRB");
  const double rel_tol = 1e-4;
  if (d_target <= s_point.distortion * (1.0 + rel_tol)) return s_point;

  // Bracket: D(lo) > d_target >= D(hi).
  double lo = problem.lambda_scale() * 1e-3;
  ParetoPoint lo_point = problem.scalarized(lo);
  for (int i = 0; i < 40 && lo_point.distortion <= d_target; ++i) {
    lo *= 0.1;
    lo_point = problem.scalarized(lo);
  }
  double hi = problem.lambda_max();
  ParetoPoint hi_point = problem.scalarized(hi);
  for (int i = 0; i < 40 && hi_point.distortion > d_target; ++i) {
    hi *= 10.0;
    hi_point = problem.scalarized(hi, hi_point.allocation);
  }
  if (hi_point.distortion > d_target) return s_point;
  if (lo_point.distortion <= d_target) return lo_point;

  for (int it = 0; it < 200; ++it) {
    if (std::abs(hi_point.distortion - d_target) <= rel_tol * d_target) return hi_point;
    if (std::abs(lo_point.distortion - d_target) <= rel_tol * d_target) return lo_point;
    const double mid = std::sqrt(lo * hi);
    if (!(mid > lo && mid < hi)) break;
    const ParetoPoint p = problem.scalarized(mid, hi_point.allocation);
    if (p.distortion > d_target) {
      lo = mid;
      lo_point = p;
    } else {
      hi = mid;
      hi_point = p;
    }
  }
  return hi_point;
}

inline ParetoPoint solve_for_distortion(double d_target, const ScenarioConfig& cfg,
                                        const std::vector<TargetDraw>& theta_samples,
                                        DistortionScope scope = DistortionScope::full,
                                        const SolverOptions& opts = {}) {
  return solve_for_distortion(ParetoProblem(cfg, theta_samples, scope, opts), d_target);
}

namespace detail {

/// Sorts by distortion and drops points whose distortion repeats to 1e-9
/// relative, keeping the higher capacity.
inline std::vector<ParetoPoint> sort_and_dedup(std::vector<ParetoPoint> pts) {
  std::stable_sort(pts.begin(), pts.end(), [](const ParetoPoint& a, const ParetoPoint& b) {
    return a.distortion < b.distortion;
  });
  std::vector<ParetoPoint> out;
  for (auto& p : pts) {
    if (!out.empty() &&
        std::abs(p.distortion - out.back().distortion) <= 1e-9 * std::abs(out.back().distortion)) {
      if (p.capacity > out.back().capacity) out.back() = std::move(p);
      continue;
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace detail

/// Traces the boundary: the two endpoints, then n_points - 2 lambdas
/// log-spaced over [1e-3, 1e3] * lambda_scale. If deduplication leaves fewer
/// than n_points distinct points, the widest gaps (in range-normalized D, C)
/// are split by solving at the geometric-mean lambda. Output is sorted by D.
inline std::vector<ParetoPoint> pareto_sweep(const ParetoProblem& problem, int n_points,
                                             unsigned threads = 1) {
  if (n_points < 2) throw PreconditionError("pareto_sweep: n_points must be >= 2");
  const ParetoPoint c_point = problem.scalarized(0.0);
  const ParetoPoint s_point = problem.sensing_optimal();
  const double lam_lo = problem.lambda_scale() * 1e-3;
  const double lam_hi = problem.lambda_max();

  const int n_grid = n_points - 2;
  std::vector<ParetoPoint> grid(static_cast<std::size_t>(std::max(n_grid, 0)));
  parallel_for(grid.size(), threads, [&](std::size_t i) {
    const double frac = n_grid == 1 ? 0.5 : static_cast<double>(i) / (n_grid - 1);
    grid[i] = problem.scalarized(lam_lo * std::pow(lam_hi / lam_lo, frac));
  });

  std::vector<ParetoPoint> all;
  all.push_back(c_point);
  all.push_back(s_point);
  for (auto& p : grid) all.push_back(std::move(p));
  std::vector<ParetoPoint> pts = detail::sort_and_dedup(all);

  const double d_range = std::max(c_point.distortion - s_point.distortion, 1e-300);
  const double c_range = std::max(std::abs(c_point.capacity - s_point.capacity), 1e-300);
  for (int round = 0; round < 4 * n_points && static_cast<int>(pts.size()) < n_points; ++round) {
    // pts is sorted by D ascending, i.e. by lambda descending.
    std::size_t best = 0;
    double best_gap = -1.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      const double dd = (pts[i + 1].distortion - pts[i].distortion) / d_range;
      const double dc = (pts[i + 1].capacity - pts[i].capacity) / c_range;
      const double gap = std::hypot(dd, dc);
      if (gap > best_gap) {
        best_gap = gap;
        best = i;
      }
    }
    const double a = pts[best + 1].weight;  // smaller lambda
    const double b = pts[best].weight;      // larger lambda
    double lam;
    if (std::isinf(b)) lam = (a > 0.0 ? a : lam_hi) * 10.0;
    else if (a <= 0.0) lam = b * 0.1;
    else lam = std::sqrt(a * b);
    all.push_back(problem.scalarized(lam));
    const std::size_t before = pts.size();
    pts = detail::sort_and_dedup(all);
    if (pts.size() == before && best_gap < 1e-9) break;
  }
  return pts;
}

inline std::vector<ParetoPoint> pareto_sweep(const ScenarioConfig& cfg,
                                             const std::vector<TargetDraw>& theta_samples,
                                             int n_points,
                                             DistortionScope scope = DistortionScope::full,
                                             unsigned threads = 1) {
  return pareto_sweep(ParetoProblem(cfg, theta_samples, scope), n_points, threads);
}

struct FrontierSample {
  double distortion;
  double capacity;
};

/// (D, C) = t * s_point + (1 - t) * c_point on t = 0, 1/(n-1), ..., 1.
inline std::vector<FrontierSample> time_sharing_segment(const ParetoPoint& s_point,
                                                        const ParetoPoint& c_point,
                                                        int n_points) {
  if (n_points < 2) throw PreconditionError("time_sharing_segment: n_points must be >= 2");
  std::vector<FrontierSample> out;
  out.reserve(static_cast<std::size_t>(n_points));
  for (int i = 0; i < n_points; ++i) {
    const double t = static_cast<double>(i) / (n_points - 1);
    out.push_back({t * s_point.distortion + (1.0 - t) * c_point.distortion,
                   t * s_point.capacity + (1.0 - t) * c_point.capacity});
  }
  return out;
}

/// Time-sharing capacity at distortion d on the segment between the endpoints.
inline double time_sharing_capacity(const ParetoPoint& s_point, const ParetoPoint& c_point,
                                    double d) {
  const double span = c_point.distortion - s_point.distortion;
  if (span <= 0.0) return c_point.capacity;
  const double t = std::clamp((c_point.distortion - d) / span, 0.0, 1.0);
  return t * s_point.capacity + (1.0 - t) * c_point.capacity;
}

}  // namespace isac
