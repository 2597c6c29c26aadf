#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "isac/acrb.hpp"
#include "isac/errors.hpp"
#include "isac/optimizer.hpp"
#include "isac/rng.hpp"
#include "oracles.hpp"

using namespace isac;

namespace {

ScenarioConfig flat(int n, int m, double total, double cap, double noise = 1.0) {
  ScenarioConfig cfg = oracle::simple_scenario(n, m, 1);
  cfg.total_power = total;
  cfg.per_entry_power_cap = cap;
  cfg.comm_noise_var = noise;
  return cfg;
}

/// N=3, M=1 instance whose delay prior and observation information are comparable.
ScenarioConfig tiny(bool zero_mean) {
  ScenarioConfig cfg = flat(3, 1, 3.0, 1.5);
  cfg.comm_channel = {cdouble(1.0, 0.0), cdouble(0.5, 0.5), cdouble(0.3, 0.0)};
  cfg.priors[0].mean << (zero_mean ? 0.0 : 0.8), (zero_mean ? 0.0 : -0.4), 1e-6;
  cfg.priors[0].covariance = Eigen::Vector3d(0.5, 0.5, 2e-11).asDiagonal();
  return cfg;
}

PowerAllocation vec3(const Eigen::Vector3d& v) { return PowerAllocation::from_flat(v, 3, 1); }

}  // namespace

TEST(Capacity, WorkedExamples) {
  EXPECT_EQ(capacity(PowerAllocation(4, 2, 0.0), flat(4, 2, 8, 4)), 0.0);
  EXPECT_NEAR(capacity(PowerAllocation(2, 1, 1.0), flat(2, 1, 2, 1)), 2.0, 1e-15);
  EXPECT_NEAR(capacity(PowerAllocation(1, 1, 3.0), flat(1, 1, 3, 3)), 2.0, 1e-15);
}

TEST(Capacity, GradientMatchesCentralDifferences) {
  RandomStream s = Rng(1).stream("cap", 0);
  for (int trial = 0; trial < 20; ++trial) {
    const ScenarioConfig cfg = oracle::random_scenario(s, 32, 3, 1, false);
    const PowerAllocation p = oracle::random_allocation(cfg, s);
    const Eigen::VectorXd fd = oracle::central_difference(
        [&](const Eigen::VectorXd& x) {
          return capacity(PowerAllocation::from_flat(x, cfg.n_subcarriers, cfg.n_symbols), cfg);
        },
        p.flat(), 1e-6);
    EXPECT_LT((fd - capacity_gradient(p, cfg)).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Waterfill, EqualGainsGiveUniform) {
  const ScenarioConfig cfg = flat(8, 3, 12.0, 4.0);
  const PowerAllocation p = waterfill_c_optimal(cfg);
  EXPECT_LT((p.matrix().array() - 0.5).abs().maxCoeff(), 1e-14);
}

TEST(Waterfill, TwoChannelHandSolution) {
  ScenarioConfig cfg = flat(2, 1, 1.0, 10.0);
  cfg.comm_channel = {cdouble(1.0, 0.0), cdouble(2.0, 0.0)};  // |h|^2 = 1, 4
  const PowerAllocation p = waterfill_c_optimal(cfg);
  EXPECT_NEAR(p(0, 0), 0.125, 1e-14);
  EXPECT_NEAR(p(1, 0), 0.875, 1e-14);
  const auto grid = oracle::waterfill_grid({1.0, 0.25}, 10.0, 1.0);
  EXPECT_NEAR(p(0, 0), grid[0], 1e-5);
  EXPECT_NEAR(p(1, 0), grid[1], 1e-5);
}

TEST(Waterfill, FullBudgetForcesCaps) {
  ScenarioConfig cfg = flat(4, 2, 8.0, 1.0);
  cfg.comm_channel = {cdouble(0.1, 0), cdouble(1, 0), cdouble(3, 0), cdouble(0, 0)};
  EXPECT_EQ(waterfill_c_optimal(cfg).matrix(), Eigen::MatrixXd::Ones(4, 2));
}

TEST(Waterfill, DeadSubcarrierGetsNothing) {
  ScenarioConfig cfg = flat(3, 1, 2.0, 2.0);
  cfg.comm_channel = {cdouble(1, 0), cdouble(0, 0), cdouble(0.5, 0)};
  const PowerAllocation p = waterfill_c_optimal(cfg);
  EXPECT_EQ(p(1, 0), 0.0);
  EXPECT_NEAR(p.total(), 2.0, 1e-14);
}

TEST(Waterfill, MatchesGridOracleAndSatisfiesKkt) {
  RandomStream s = Rng(2).stream("wf", 0);
  for (int trial = 0; trial < 100; ++trial) {
    const ScenarioConfig cfg = oracle::random_scenario(s, 24, 3, 1, false);
    const PowerAllocation p = waterfill_c_optimal(cfg);
    ASSERT_TRUE(p.feasible(cfg.per_entry_power_cap, cfg.total_power, 1e-12 * cfg.total_power));
    EXPECT_NEAR(p.total(), cfg.total_power, 1e-12 * cfg.total_power);
    EXPECT_LT(waterfill_kkt_residual(p, cfg), 1e-8) << "trial " << trial;
    if (trial < 10) {
      std::vector<double> inv;
      for (const cdouble& h : cfg.comm_channel) inv.push_back(cfg.comm_noise_var / std::norm(h));
      const auto grid = oracle::waterfill_grid(inv, cfg.per_entry_power_cap,
                                               cfg.total_power / cfg.n_symbols, 200000);
      for (int n = 0; n < cfg.n_subcarriers; ++n)
        EXPECT_NEAR(p(n, 0), grid[static_cast<std::size_t>(n)], 1e-3 * cfg.per_entry_power_cap);
    }
  }
}

TEST(Waterfill, KktResidualDetectsSuboptimalPoint) {
  ScenarioConfig cfg = flat(2, 1, 1.0, 10.0);
  cfg.comm_channel = {cdouble(1.0, 0.0), cdouble(2.0, 0.0)};
  EXPECT_GT(waterfill_kkt_residual(PowerAllocation(2, 1, 0.5), cfg), 0.1);
  EXPECT_GT(waterfill_kkt_residual(PowerAllocation(2, 1, 0.1), cfg), 0.1);  // budget unspent
}

TEST(SensingClosedForm, WorkedExamples) {
  EXPECT_EQ(sensing_optimal_closed_form(flat(4, 1, 3.0, 1.0)).flat(), Eigen::Vector4d(0, 1, 1, 1));
  EXPECT_EQ(sensing_optimal_closed_form(flat(4, 1, 2.5, 1.0)).flat(), Eigen::Vector4d(0, 0.5, 1, 1));
  EXPECT_EQ(sensing_optimal_closed_form(flat(4, 2, 8.0, 1.0)).matrix(), Eigen::MatrixXd::Ones(4, 2));
  const PowerAllocation p = sensing_optimal_closed_form(flat(6, 3, 7.5, 1.0));
  EXPECT_NEAR(p.total(), 7.5, 1e-15);
  for (int m = 0; m < 3; ++m) {
    EXPECT_EQ(p(5, m), 1.0);
    EXPECT_EQ(p(4, m), 1.0);
    EXPECT_NEAR(p(3, m), 0.5, 1e-15);
    EXPECT_EQ(p(2, m), 0.0);
  }
}

TEST(SensingClosedForm, RequiresZeroMeanPriors) {
  EXPECT_THROW(sensing_optimal_closed_form(tiny(false)), PreconditionError);
}

TEST(SensingClosedForm, MaximizesSquaredIndexMomentAgainstOracles) {
  RandomStream s = Rng(3).stream("cf", 0);
  for (int trial = 0; trial < 200; ++trial) {
    const int N = 1 + static_cast<int>(s.uniform() * 6);
    const int M = 1 + static_cast<int>(s.uniform() * 2);  // keeps 3^(NM) vertex enumeration small
    const double cap = 0.2 + s.uniform();
    const double total = cap * N * M * (0.05 + 0.95 * s.uniform());
    const PowerAllocation p = sensing_optimal_closed_form(flat(N, M, total, cap));
    ASSERT_TRUE(p.feasible(cap, total, 1e-12 * total));
    EXPECT_NEAR(p.total(), total, 1e-12 * total);
    Eigen::VectorXd w(N * M);
    for (int m = 0; m < M; ++m)
      for (int n = 0; n < N; ++n) w(m * N + n) = static_cast<double>(n) * n;
    const double ours = w.dot(p.flat());
    EXPECT_NEAR(ours, oracle::brute_force_linear_max(w, cap, total), 1e-12 * std::max(ours, 1.0));
    EXPECT_NEAR(ours, w.dot(oracle::greedy_linear_max(w, cap, total)), 1e-12 * std::max(ours, 1.0));
  }
}

TEST(SensingNumeric, AgreesWithClosedFormOnZeroMeanScenarios) {
  RandomStream s = Rng(4).stream("sn", 0);
  for (int trial = 0; trial < 20; ++trial) {
    const ScenarioConfig cfg = oracle::random_scenario(s, 64, 3, 3, true);
    const auto thetas = with_negated_rcs(sample_targets(cfg.priors, 32, Rng(trial)));
    for (auto scope : {DistortionScope::full, DistortionScope::delay_only}) {
      const ParetoPoint num = sensing_optimal_numeric(cfg, thetas, scope);
      const double cf = acrb(sensing_optimal_closed_form(cfg), thetas, cfg, scope);
      EXPECT_TRUE(num.converged);
      EXPECT_LE(std::abs(num.distortion - cf), 1e-8 * cf) << "trial " << trial;
      EXPECT_NEAR(num.allocation.total(), cfg.total_power, 1e-11 * cfg.total_power);
    }
  }
}

TEST(SensingNumeric, IidSamplesOnlyImproveOnClosedForm) {
  // A nonzero sample RCS mean couples delay and RCS, so the sampled optimum
  // may move off the closed form but can never be worse than it.
  RandomStream s = Rng(19).stream("iid", 0);
  for (int trial = 0; trial < 10; ++trial) {
    const ScenarioConfig cfg = oracle::random_scenario(s, 64, 2, 2, true);
    const auto thetas = sample_targets(cfg.priors, 16, Rng(trial));
    const ParetoPoint num = sensing_optimal_numeric(cfg, thetas);
    EXPECT_LE(num.distortion, acrb(sensing_optimal_closed_form(cfg), thetas, cfg) * (1 + 1e-12));
  }
}

TEST(WithNegatedRcs, ZeroesTheSampleMean) {
  const ScenarioConfig cfg = oracle::simple_scenario(8, 1, 2);
  const auto thetas = with_negated_rcs(sample_targets(cfg.priors, 7, Rng(20)));
  ASSERT_EQ(thetas.size(), 14u);
  for (const auto& m : rcs_moments(thetas)) {
    EXPECT_NEAR(m.mean_re, 0.0, 1e-16);
    EXPECT_NEAR(m.mean_im, 0.0, 1e-16);
    EXPECT_GT(m.mean_abs2, 0.0);
  }
  EXPECT_EQ(thetas[1].targets[0].delay, thetas[0].targets[0].delay);
}

TEST(SensingNumeric, GeneralPriorBeatsClosedFormAllocation) {
  RandomStream s = Rng(5).stream("sg", 0);
  for (int trial = 0; trial < 10; ++trial) {
    ScenarioConfig cfg = oracle::random_scenario(s, 48, 2, 1, false);
    const auto thetas = sample_targets(cfg.priors, 32, Rng(trial));
    const ParetoPoint num = sensing_optimal_numeric(cfg, thetas);
    // Closed form of the zero-mean reading, evaluated under the true prior.
    ScenarioConfig zm = cfg;
    for (auto& pr : zm.priors) pr.mean(0) = pr.mean(1) = 0.0;
    EXPECT_LE(num.distortion, acrb(sensing_optimal_closed_form(zm), thetas, cfg) * (1 + 1e-12));
  }
}

TEST(SensingNumeric, TinyInstanceMatchesGridSearch) {
  for (bool zero_mean : {true, false}) {
    const ScenarioConfig cfg = tiny(zero_mean);
    const auto thetas = sample_targets(cfg.priors, 64, Rng(6));
    const AcrbModel model(cfg, thetas);
    const ParetoPoint num = sensing_optimal_numeric(cfg, thetas);
    const Eigen::Vector3d grid = oracle::grid_search_simplex3(
        [&](const Eigen::Vector3d& p) { return model.value(vec3(p)); }, cfg.per_entry_power_cap,
        cfg.total_power, 200);
    EXPECT_LE(num.distortion, model.value(vec3(grid)) * (1 + 1e-12));
    EXPECT_LT((num.allocation.flat() - grid).cwiseAbs().maxCoeff(), 2 * cfg.total_power / 200);
  }
}

TEST(Scalarized, LambdaZeroIsWaterfilling) {
  RandomStream s = Rng(7).stream("l0", 0);
  for (int trial = 0; trial < 10; ++trial) {
    const ScenarioConfig cfg = oracle::random_scenario(s, 64, 2, 2, trial % 2 == 0);
    const auto thetas = sample_targets(cfg.priors, 16, Rng(trial));
    const ParetoPoint pt = scalarized_solve(0.0, cfg, thetas);
    const double c_wf = capacity(waterfill_c_optimal(cfg), cfg);
    EXPECT_NEAR(pt.capacity, c_wf, 1e-9 * c_wf);
    EXPECT_EQ(pt.weight, 0.0);
    EXPECT_TRUE(pt.converged);
  }
}

TEST(Scalarized, LargeLambdaReachesSensingOptimum) {
  for (const char* which : {"single", "two"}) {
    const ScenarioConfig cfg = std::string(which) == "single" ? oracle::simple_scenario(128, 1, 1)
                                                              : oracle::simple_scenario(128, 2, 2);
    const auto thetas = sample_targets(cfg.priors, 32, Rng(8));
    const ParetoProblem problem(cfg, thetas, DistortionScope::delay_only);
    const ParetoPoint s_opt = problem.sensing_optimal();
    const ParetoPoint pt = problem.scalarized(1e6 * problem.lambda_scale());
    EXPECT_LE(std::abs(pt.distortion - s_opt.distortion), 1e-6 * s_opt.distortion) << which;
    EXPECT_TRUE(pt.converged);
  }
}

TEST(Scalarized, TinyInstanceMatchesGridSearch) {
  // Both objectives improve with power, so the optimum spends the budget and
  // a grid over the face {sum = P} suffices.
  for (bool zero_mean : {true, false}) {
    const ScenarioConfig cfg = tiny(zero_mean);
    const auto thetas = sample_targets(cfg.priors, 64, Rng(9));
    const ParetoProblem problem(cfg, thetas);
    const double lambda = problem.lambda_scale();
    const ParetoPoint pt = problem.scalarized(lambda);
    auto objective = [&](const Eigen::Vector3d& p) {
      return -(capacity(vec3(p), cfg) - lambda * problem.distortion(vec3(p)));
    };
    const Eigen::Vector3d grid =
        oracle::grid_search_simplex3(objective, cfg.per_entry_power_cap, cfg.total_power, 200);
    EXPECT_LE(objective(pt.allocation.flat()), objective(grid) + 1e-12);
    EXPECT_LT((pt.allocation.flat() - grid).cwiseAbs().maxCoeff(), 2 * cfg.total_power / 200);
    EXPECT_NEAR(pt.allocation.total(), cfg.total_power, 1e-9);
  }
}

TEST(Scalarized, MonotoneInLambdaAndSelfConsistent) {
  const ScenarioConfig cfg = oracle::simple_scenario(64, 2, 2);
  const auto thetas = sample_targets(cfg.priors, 32, Rng(10));
  const ParetoProblem problem(cfg, thetas, DistortionScope::full);
  const double base = problem.lambda_scale();
  ParetoPoint prev = problem.scalarized(0.0);
  for (double f = 1e-3; f <= 1e4; f *= 3.0) {
    const ParetoPoint pt = problem.scalarized(f * base);
    EXPECT_LE(pt.distortion, prev.distortion * (1 + 1e-9));
    EXPECT_LE(pt.capacity, prev.capacity * (1 + 1e-9));
    EXPECT_NEAR(pt.distortion, acrb(pt.allocation, thetas, cfg, DistortionScope::full), 1e-9 * pt.distortion);
    EXPECT_NEAR(pt.capacity, capacity(pt.allocation, cfg), 1e-9 * pt.capacity);
    EXPECT_TRUE(pt.allocation.feasible(cfg.per_entry_power_cap, cfg.total_power, 1e-12 * cfg.total_power));
    EXPECT_TRUE(pt.converged);
    prev = pt;
  }
  EXPECT_THROW(problem.scalarized(-1.0), PreconditionError);
}

TEST(SolveForDistortion, Endpoints) {
  const ScenarioConfig cfg = oracle::simple_scenario(64, 1, 2);
  const auto thetas = sample_targets(cfg.priors, 32, Rng(11));
  const ParetoProblem problem(cfg, thetas, DistortionScope::delay_only);
  const double d_wf = problem.distortion(problem.waterfill());
  const ParetoPoint at_wf = solve_for_distortion(problem, d_wf);
  EXPECT_EQ(at_wf.weight, 0.0);
  EXPECT_EQ(at_wf.allocation.matrix(), problem.waterfill().matrix());

  const ParetoPoint s_opt = problem.sensing_optimal();
  const ParetoPoint at_s = solve_for_distortion(problem, s_opt.distortion);
  EXPECT_NEAR(at_s.capacity, s_opt.capacity, 1e-9 * s_opt.capacity);
  EXPECT_THROW(solve_for_distortion(problem, 0.99 * s_opt.distortion), InfeasibleError);
}

TEST(SolveForDistortion, HitsTargetsAcrossTheRange) {
  const ScenarioConfig cfg = oracle::simple_scenario(128, 1, 2);
  const auto thetas = sample_targets(cfg.priors, 32, Rng(12));
  const ParetoProblem problem(cfg, thetas, DistortionScope::delay_only);
  const double lo = problem.sensing_optimal().distortion;
  const double hi = problem.distortion(problem.waterfill());
  double prev_c = 0.0;
  for (double f : {0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99}) {
    const double d = lo + f * (hi - lo);
    const ParetoPoint pt = solve_for_distortion(problem, d);
    EXPECT_LE(std::abs(pt.distortion - d), 1e-4 * d) << f;
    EXPECT_GE(pt.capacity, prev_c);
    prev_c = pt.capacity;
  }
}

TEST(SolveForDistortion, TinyInstanceMatchesConstrainedGrid) {
  const ScenarioConfig cfg = tiny(false);
  const auto thetas = sample_targets(cfg.priors, 64, Rng(13));
  const ParetoProblem problem(cfg, thetas);
  const double lo = problem.sensing_optimal().distortion;
  const double hi = problem.distortion(problem.waterfill());
  const double d = 0.5 * (lo + hi);
  const ParetoPoint pt = solve_for_distortion(problem, d);
  // Grid: best capacity among points with D <= d on the face sum = P.
  double best_c = -1.0;
  const int steps = 400;
  const double h = cfg.total_power / steps;
  for (int i = 0; i <= steps; ++i)
    for (int j = 0; i + j <= steps; ++j) {
      const Eigen::Vector3d p(i * h, j * h, cfg.total_power - (i + j) * h);
      if ((p.array() > cfg.per_entry_power_cap + 1e-12).any()) continue;
      if (problem.distortion(vec3(p)) <= d) best_c = std::max(best_c, capacity(vec3(p), cfg));
    }
  ASSERT_GT(best_c, 0.0);
  EXPECT_LE(std::abs(pt.distortion - d), 1e-4 * d);
  // Within grid resolution: capacity gradients are O(1) bit per unit power.
  EXPECT_NEAR(pt.capacity, best_c, 2.0 * h);
}

TEST(ParetoSweep, ShapeAndEndpoints) {
  for (int K : {1, 2}) {
    const ScenarioConfig cfg = oracle::simple_scenario(256, 1, K);
    const auto thetas = sample_targets(cfg.priors, 64, Rng(14));
    const ParetoProblem problem(cfg, thetas, DistortionScope::delay_only);
    const auto pts = pareto_sweep(problem, 25);
    ASSERT_GE(pts.size(), 25u);
    EXPECT_TRUE(std::isinf(pts.front().weight));
    EXPECT_EQ(pts.back().weight, 0.0);
    for (std::size_t i = 1; i < pts.size(); ++i) {
      EXPECT_GT(pts[i].distortion, pts[i - 1].distortion);
      EXPECT_GE(pts[i].capacity, pts[i - 1].capacity * (1 - 1e-12));
    }
    for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
      const auto& a = pts[i - 1];
      const auto& b = pts[i];
      const auto& c = pts[i + 1];
      const double t = (b.distortion - a.distortion) / (c.distortion - a.distortion);
      const double chord = a.capacity + t * (c.capacity - a.capacity);
      EXPECT_GE(b.capacity, chord - 1e-9 * std::abs(chord)) << "K=" << K << " i=" << i;
    }
    for (const auto& p : pts) {
      EXPECT_TRUE(p.allocation.feasible(cfg.per_entry_power_cap, cfg.total_power, 1e-12 * cfg.total_power));
      EXPECT_TRUE(p.converged);
    }
    EXPECT_LT(waterfill_kkt_residual(pts.back().allocation, cfg), 1e-8);
  }
}

TEST(ParetoSweep, ThreadCountDoesNotChangeOutput) {
  const ScenarioConfig cfg = oracle::simple_scenario(64, 2, 2);
  const auto thetas = sample_targets(cfg.priors, 16, Rng(15));
  const auto a = pareto_sweep(cfg, thetas, 12, DistortionScope::full, 1);
  const auto b = pareto_sweep(cfg, thetas, 12, DistortionScope::full, 3);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].distortion, b[i].distortion);
    EXPECT_EQ(a[i].capacity, b[i].capacity);
    EXPECT_EQ(a[i].weight, b[i].weight);
  }
  EXPECT_THROW(pareto_sweep(cfg, thetas, 1), PreconditionError);
}

TEST(ParetoSweep, RefinementFillsCollapsedGrids) {
  // Only two grid lambdas requested beyond the endpoints yet ten points asked:
  // when lambdas collapse the sweep must bisect to reach the count.
  const ScenarioConfig cfg = oracle::simple_scenario(32, 1, 1);
  const auto thetas = sample_targets(cfg.priors, 16, Rng(16));
  const auto pts = pareto_sweep(cfg, thetas, 10, DistortionScope::delay_only);
  EXPECT_GE(pts.size(), 10u);
}

TEST(TimeSharing, EndpointsMidpointAndDomination) {
  const ScenarioConfig cfg = oracle::simple_scenario(128, 1, 2);
  const auto thetas = sample_targets(cfg.priors, 32, Rng(17));
  const ParetoProblem problem(cfg, thetas, DistortionScope::delay_only);
  const ParetoPoint c = problem.make_point(problem.waterfill(), 0.0);
  const ParetoPoint s = problem.sensing_optimal();
  const auto seg = time_sharing_segment(s, c, 5);
  EXPECT_EQ(seg.front().distortion, c.distortion);
  EXPECT_EQ(seg.front().capacity, c.capacity);
  EXPECT_EQ(seg.back().distortion, s.distortion);
  EXPECT_EQ(seg.back().capacity, s.capacity);
  EXPECT_DOUBLE_EQ(seg[2].distortion, 0.5 * (s.distortion + c.distortion));
  EXPECT_DOUBLE_EQ(seg[2].capacity, 0.5 * (s.capacity + c.capacity));
  EXPECT_THROW(time_sharing_segment(s, c, 1), PreconditionError);

  for (const auto& p : pareto_sweep(problem, 15))
    EXPECT_GE(p.capacity, time_sharing_capacity(s, c, p.distortion) * (1 - 1e-12));
}

TEST(ProjectedGradient, SolvesProjectionAsOptimization) {
  RandomStream s = Rng(18).stream("pg", 0);
  for (bool spectral : {true, false}) {
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd v(10);
      for (int i = 0; i < 10; ++i) v(i) = 2.0 * s.normal();
      auto proj = [](const Eigen::VectorXd& x) { return project_box_capped_simplex(x, 1.0, 3.0); };
      SolverOptions opts;
      opts.spectral_step = spectral;
      opts.initial_step = 0.3;
      const SolverResult r = projected_gradient(
          [&](const Eigen::VectorXd& x) { return 0.5 * (x - v).squaredNorm(); },
          [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return x - v; }, proj,
          Eigen::VectorXd::Zero(10), opts);
      EXPECT_TRUE(r.converged);
      EXPECT_LT((r.x - proj(v)).cwiseAbs().maxCoeff(), 1e-7);
    }
  }
}

TEST(ProjectedGradient, IterationLimitIsFlagged) {
  SolverOptions opts;
  opts.max_iterations = 2;
  opts.spectral_step = false;
  opts.initial_step = 1e-3;
  const Eigen::VectorXd v = Eigen::VectorXd::Constant(4, 5.0);
  const SolverResult r = projected_gradient(
      [&](const Eigen::VectorXd& x) { return 0.5 * (x - v).squaredNorm(); },
      [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return x - v; },
      [](const Eigen::VectorXd& x) { return project_box_capped_simplex(x, 10.0, 100.0); },
      Eigen::VectorXd::Zero(4), opts);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 2);
  EXPECT_GT(r.x.sum(), 0.0);  // best iterate is kept
}
