#pragma once

// Command-line front end. run() is the whole program; main() only forwards.
//
// Exit codes: 0 ok, 1 usage, 2 invalid scenario / infeasible request,
// 3 numerical failure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <iostream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "isac/acrb.hpp"
#include "isac/csv.hpp"
#include "isac/errors.hpp"
#include "isac/fim.hpp"
#include "isac/optimizer.hpp"
#include "isac/rng.hpp"
#include "isac/scenario.hpp"
#include "isac/scenario_json.hpp"

namespace isac::cli {

enum ExitCode : int { ok = 0, usage = 1, invalid = 2, numerical = 3 };

struct Options {
  std::string scenario;
  std::uint64_t seed = 0;
  std::string scope = "delay";
  int points = 25;
  int n_theta = 64;
  int n_x = 128;
  std::string out;
  std::vector<int> n_grid{64, 256, 1024};
  unsigned threads = 1;
  std::string allocation = "waterfill";
};

namespace detail {

inline DistortionScope parse_scope(const std::string& s) {
  return s == "full" ? DistortionScope::full : DistortionScope::delay_only;
}

inline PowerAllocation choose_allocation(const Options& o, const ScenarioConfig& cfg,
                                         const std::vector<TargetDraw>& thetas) {
  if (o.allocation == "uniform") return PowerAllocation::uniform(cfg);
  if (o.allocation == "sensing")
    return sensing_optimal_numeric(cfg, thetas, parse_scope(o.scope)).allocation;
  return waterfill_c_optimal(cfg);
}

/// Summary goes next to the CSV without mixing into it.
inline std::ostream& summary_stream(const Options& o, std::ostream& out, std::ostream& err) {
  return o.out.empty() || o.out == "-" ? err : out;
}

inline std::string pct(double fraction) {
  std::ostringstream s;
  s.precision(4);
  s << 100.0 * fraction << "%";
  return s.str();
}

inline int cmd_validate(const Options& o, std::ostream& out) {
  const ScenarioConfig cfg = load_scenario_file(o.scenario);
  out << "ok: " << o.scenario << "\n"
      << "  N=" << cfg.n_subcarriers << " M=" << cfg.n_symbols << " K=" << cfg.n_targets()
      << " f0=" << cfg.subcarrier_spacing_hz << " Hz\n"
      << "  total_power=" << cfg.total_power << " per_entry_power_cap=" << cfg.per_entry_power_cap
      << "\n";
  return ok;
}

/// bcrb and acrb share one computation so that the reported gap is exactly
/// |bcrb - acrb| / acrb of the two printed values.
inline int cmd_bound(const Options& o, bool headline_bcrb, std::ostream& out, std::ostream& err) {
  const ScenarioConfig cfg = load_scenario_file(o.scenario);
  const Rng rng(o.seed);
  const DistortionScope scope = parse_scope(o.scope);
  const auto thetas = sample_targets(cfg.priors, o.n_theta, rng);
  const PowerAllocation p = choose_allocation(o, cfg, thetas);
  const MonteCarloEstimate b = expected_bcrb(p, cfg, o.n_x, thetas, rng, scope, o.threads);
  const double a = acrb(p, thetas, cfg, scope);
  const double gap = std::abs(b.mean - a) / a;

  CsvTable t{{"quantity", "value"}, {}};
  if (headline_bcrb) {
    t.rows.push_back({std::string("bcrb"), b.mean});
    t.rows.push_back({std::string("bcrb_std_error"), b.std_error});
    t.rows.push_back({std::string("acrb"), a});
  } else {
    t.rows.push_back({std::string("acrb"), a});
    t.rows.push_back({std::string("bcrb"), b.mean});
    t.rows.push_back({std::string("bcrb_std_error"), b.std_error});
  }
  t.rows.push_back({std::string("relative_gap"), gap});
  emit_csv(t, o.out, out);

  std::ostream& s = summary_stream(o, out, err);
  s << (headline_bcrb ? "bcrb" : "acrb") << " (" << to_string(scope) << ", " << o.allocation
    << " allocation, n_x=" << o.n_x << ", n_theta=" << o.n_theta << ")\n"
    << "  bcrb = " << format_double(b.mean) << " +/- " << format_double(b.std_error) << "\n"
    << "  acrb = " << format_double(a) << "\n"
    << "  relative gap |bcrb-acrb|/acrb = " << format_double(gap) << "\n";
  return ok;
}

inline int cmd_converge(const Options& o, std::ostream& out, std::ostream& err) {
  const ScenarioConfig cfg = load_scenario_file(o.scenario);
  const Rng rng(o.seed);
  const auto thetas = sample_targets(cfg.priors, o.n_theta, rng);
  const PowerAllocation p = choose_allocation(o, cfg, thetas);
  ConvergenceOptions opts;
  opts.threads = o.threads;
  const ConvergenceReport report = convergence_report(cfg, p, o.n_grid, rng, opts);

  CsvTable t{{"N", "quantity", "param", "value"}, {}};
  for (const auto& r : report.rows)
    t.rows.push_back({static_cast<long long>(r.n_subcarriers), r.quantity, r.param, r.value});
  emit_csv(t, o.out, out);

  std::ostream& s = summary_stream(o, out, err);
  s << "converge: " << report.rows.size() << " rows over N in {";
  for (std::size_t i = 0; i < o.n_grid.size(); ++i) s << (i ? "," : "") << o.n_grid[i];
  s << "}\n";
  for (int n : o.n_grid)
    if (auto e = report.value(n, "blockdiag_error"))
      s << "  N=" << n << " median block-diagonal error " << format_double(*e) << "\n";
  return ok;
}

inline int cmd_pareto(const Options& o, std::ostream& out, std::ostream& err) {
  const ScenarioConfig cfg = load_scenario_file(o.scenario);
  const Rng rng(o.seed);
  const DistortionScope scope = parse_scope(o.scope);
  const auto thetas = sample_targets(cfg.priors, o.n_theta, rng);
  const ParetoProblem problem(cfg, thetas, scope);
  const auto pts = pareto_sweep(problem, o.points, o.threads);

  CsvTable t{{"lambda", "distortion", "capacity_bits", "scope"}, {}};
  for (const auto& p : pts)
    t.rows.push_back({p.weight, p.distortion, p.capacity, std::string(to_string(scope))});
  emit_csv(t, o.out, out);

  std::ostream& s = summary_stream(o, out, err);
  const auto& lo = pts.front();
  const auto& hi = pts.back();
  s << "pareto: " << pts.size() << " points (" << to_string(scope) << ")\n"
    << "  sensing-optimal D=" << format_double(lo.distortion)
    << " C=" << format_double(lo.capacity) << " bits\n"
    << "  comm-optimal    D=" << format_double(hi.distortion)
    << " C=" << format_double(hi.capacity) << " bits\n"
    << "  capacity loss at the sensing-optimal end: " << pct(1.0 - lo.capacity / hi.capacity)
    << "\n";
  const auto unconverged =
      std::count_if(pts.begin(), pts.end(), [](const ParetoPoint& p) { return !p.converged; });
  if (unconverged) s << "  warning: " << unconverged << " points hit the iteration limit\n";
  return ok;
}

inline int cmd_sensing_opt(const Options& o, std::ostream& out, std::ostream& err) {
  const ScenarioConfig cfg = load_scenario_file(o.scenario);
  const Rng rng(o.seed);
  const DistortionScope scope = parse_scope(o.scope);
  const auto thetas = sample_targets(cfg.priors, o.n_theta, rng);
  const ParetoProblem problem(cfg, thetas, scope);
  const ParetoPoint sp = problem.sensing_optimal();

  CsvTable t{{"subcarrier", "symbol", "power"}, {}};
  for (int m = 0; m < cfg.n_symbols; ++m)
    for (int n = 0; n < cfg.n_subcarriers; ++n)
      t.rows.push_back({static_cast<long long>(n), static_cast<long long>(m), sp.allocation(n, m)});
  emit_csv(t, o.out, out);

  std::ostream& s = summary_stream(o, out, err);
  s << "sensing-opt (" << to_string(scope) << "): D=" << format_double(sp.distortion)
    << " C=" << format_double(sp.capacity) << " bits, " << sp.iterations << " iterations"
    << (sp.converged ? "" : " (iteration limit reached)") << "\n";
  bool zero_mean = true;
  for (const auto& prior : cfg.priors) zero_mean = zero_mean && prior.zero_mean_rcs();
  if (zero_mean) {
    const double d_cf = problem.distortion(sensing_optimal_closed_form(cfg));
    s << "  closed-form allocation D=" << format_double(d_cf)
      << " (relative difference " << format_double(std::abs(sp.distortion - d_cf) / d_cf) << ")\n";
  }
  return ok;
}

inline int cmd_compare(const Options& o, std::ostream& out, std::ostream& err) {
  const ScenarioConfig cfg = load_scenario_file(o.scenario);
  const Rng rng(o.seed);
  const DistortionScope scope = parse_scope(o.scope);
  const auto thetas = sample_targets(cfg.priors, o.n_theta, rng);
  const ParetoProblem problem(cfg, thetas, scope);
  const ParetoPoint c_point = problem.make_point(problem.waterfill(), 0.0);
  const ParetoPoint s_point = problem.sensing_optimal();

  const int n = std::max(o.points, 1);
  std::vector<ParetoPoint> joint(static_cast<std::size_t>(n));
  parallel_for(joint.size(), o.threads, [&](std::size_t i) {
    const double frac = static_cast<double>(i + 1) / (n + 1);
    const double d = s_point.distortion + frac * (c_point.distortion - s_point.distortion);
    joint[i] = solve_for_distortion(problem, d, s_point);
  });

  CsvTable t{{"distortion", "capacity_joint", "capacity_timeshare"}, {}};
  double max_gain = 0.0, mean_gain = 0.0;
  for (const auto& p : joint) {
    const double ts = time_sharing_capacity(s_point, c_point, p.distortion);
    t.rows.push_back({p.distortion, p.capacity, ts});
    const double gain = p.capacity / ts - 1.0;
    max_gain = std::max(max_gain, gain);
    mean_gain += gain / n;
  }
  emit_csv(t, o.out, out);

  std::ostream& s = summary_stream(o, out, err);
  s << "compare (" << to_string(scope) << "): joint design vs time sharing at " << n
    << " interior distortion levels\n"
    << "  D range [" << format_double(s_point.distortion) << ", "
    << format_double(c_point.distortion) << "]\n"
    << "  capacity gain over time sharing: max " << pct(max_gain) << ", mean " << pct(mean_gain)
    << "\n"
    << "  sensing-optimal capacity loss: " << pct(1.0 - s_point.capacity / c_point.capacity)
    << "\n";
  return ok;
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Bayesian CRB bounds and capacity/sensing power allocation for OFDM ISAC"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--scenario", o.scenario, "Scenario JSON file")->required();
    sub->add_option("--seed", o.seed, "Master RNG seed");
    sub->add_option("--scope", o.scope, "Distortion scope")
        ->check(CLI::IsMember({"full", "delay"}));
    sub->add_option("--points", o.points, "Pareto points / compare grid size")
        ->check(CLI::Range(2, 100000));
    sub->add_option("--n-theta", o.n_theta, "Prior samples")->check(CLI::Range(2, 10000000));
    sub->add_option("--n-x", o.n_x, "Symbol draws for the BCRB")->check(CLI::Range(2, 10000000));
    sub->add_option("--out", o.out, "CSV output path (default stdout)");
    sub->add_option("--n-grid", o.n_grid, "Subcarrier counts for converge")
        ->delimiter(',')
        ->check(CLI::Range(2, 1 << 20));
    sub->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
    sub->add_option("--allocation", o.allocation, "Power allocation for bcrb/acrb/converge")
        ->check(CLI::IsMember({"waterfill", "sensing", "uniform"}));
  };
  struct Sub {
    const char* name;
    const char* help;
  };
  const Sub subs[] = {
      {"validate", "Load and validate a scenario"},
      {"bcrb", "Monte Carlo expected BCRB with the ACRB gap"},
      {"acrb", "Asymptotic CRB with the BCRB gap"},
      {"converge", "Convergence diagnostics over N"},
      {"pareto", "Trace the capacity/ACRB boundary"},
      {"sensing-opt", "Sensing-optimal allocation"},
      {"compare", "Joint design against time sharing"},
  };
  for (const Sub& s : subs) add_common(app.add_subcommand(s.name, s.help));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return usage;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    if (cmd == "validate") return detail::cmd_validate(o, out);
    if (cmd == "bcrb") return detail::cmd_bound(o, true, out, err);
    if (cmd == "acrb") return detail::cmd_bound(o, false, out, err);
    if (cmd == "converge") return detail::cmd_converge(o, out, err);
    if (cmd == "pareto") return detail::cmd_pareto(o, out, err);
    if (cmd == "sensing-opt") return detail::cmd_sensing_opt(o, out, err);
    if (cmd == "compare") return detail::cmd_compare(o, out, err);
  } catch (const ScenarioError& e) {
    err << "error: " << e.what() << "\n";
    return invalid;
  } catch (const InfeasibleError& e) {
    err << "error: " << cmd << ": " << e.what() << "\n";
    return invalid;
  } catch (const PreconditionError& e) {
    err << "error: " << cmd << ": " << e.what() << "\n";
    return invalid;
  } catch (const NotPositiveDefinite& e) {
    err << "error: " << cmd << ": " << e.what() << "\n";
    return numerical;
  } catch (const std::exception& e) {
    err << "error: " << cmd << ": " << e.what() << "\n";
    return numerical;
  }
  return usage;
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  std::vector<const char*> argv{"isac"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace isac::cli
