#pragma once

// Scenario orchestration behind the command-line tool. Each command writes
// its CSV products into an output directory and returns an exit code plus a
// one-line summary.
//
// Exit codes: 0 success or reached_t_end, 2 blowup_detected, 3 step
// underflow / Picard non-convergence / horizon stall, 4 validation error.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cnkin/correlation.hpp"
#include "cnkin/csv.hpp"
#include "cnkin/existence.hpp"
#include "cnkin/moment_oracle.hpp"
#include "cnkin/picard.hpp"
#include "cnkin/scenario.hpp"
#include "cnkin/time_integration.hpp"

namespace cnkin {

enum ExitCode : int { kExitOk = 0, kExitBlowup = 2, kExitFailure = 3, kExitValidation = 4 };

struct CommandResult {
  int exit_code = kExitOk;
  std::string summary;
};

namespace detail {

inline std::vector<std::string> file_header(const ScenarioConfig& cfg, const std::string& command) {
  return {std::string("cnkin ") + kVersion + " config_hash=" + config_hash(cfg),
          "command=" + command};
}

inline int exit_code_for(Termination t) {
  switch (t) {
    case Termination::reached_t_end: return kExitOk;
    case Termination::blowup_detected: return kExitBlowup;
    case Termination::step_underflow: return kExitFailure;
  }
  return kExitOk;
}

inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

}  // namespace detail

/// Everything a command needs, built once from a validated config.
struct Scenario {
  ScenarioConfig config;
  GridPtr grid;
  Spectrum initial;
  RhsModel model;
  SourceMass source_total;

  explicit Scenario(ScenarioConfig cfg)
      : config(std::move(cfg)),
        grid(make_grid(config)),
        initial(make_initial(config, grid)),
        model(make_model(config, *grid)),
        source_total(source_mass(model.source, *grid)) {}

  Trajectory simulate() const { return integrate_mol(initial, model, make_step_controls(config)); }
};

struct KappaChoice {
  double value = kNominalKappa;
  std::string mode;
  std::optional<KappaFit> fit;
  std::string note;
};

/// Resolve the moment-equation coefficient. "fit" measures it on `traj`;
/// a run whose mass stays identically zero carries no information, and the
/// nominal coefficient is used (all oracles are then zero anyway).
inline KappaChoice resolve_kappa(const ScenarioConfig& cfg, const Trajectory& traj,
                                 const SourceTerm& src, const SourceMass& g) {
  KappaChoice k;
  k.mode = cfg.kappa.mode;
  if (cfg.kappa.mode == "nominal") return k;
  if (cfg.kappa.mode == "explicit") {
    k.value = cfg.kappa.value;
    return k;
  }
  const bool all_zero = std::all_of(traj.mass.begin(), traj.mass.end(), [](double m) { return m == 0.0; });
  if (all_zero) {
    k.note = "zero mass, fit skipped";
    return k;
  }
  if (src.is_zero()) {
    k.fit = fit_quadratic_coefficient(traj);
  } else {
    // Keep away from the singularity: use samples before 90% of the blow-up estimate.
    std::size_t end = traj.size();
    if (traj.termination == Termination::blowup_detected) {
      if (auto tb = estimate_blowup_time(traj)) {
        const double cut = traj.times.front() + 0.9 * (*tb - traj.times.front());
        end = static_cast<std::size_t>(
            std::upper_bound(traj.times.begin(), traj.times.end(), cut) - traj.times.begin());
      }
    }
    k.fit = fit_quadratic_coefficient_with_source(
        std::span(traj.times).first(end), std::span(traj.mass).first(end), g, 0.0);
  }
  k.value = k.fit->kappa;
  return k;
}

inline CommandResult cmd_simulate(const ScenarioConfig& cfg, const std::filesystem::path& out_dir,
                                  bool write_spectra = true) {
  std::filesystem::create_directories(out_dir);
  const Scenario sc(cfg);
  const Trajectory traj = sc.simulate();
  const auto header = detail::file_header(cfg, "simulate");

  {
    auto comments = header;
    comments.push_back("termination=" + std::string(to_string(traj.termination)));
    CsvWriter csv(out_dir / "moments.csv", comments, {"t", "M", "N_oracle", "abs_err", "rel_err"});
    for (std::size_t i = 0; i < traj.size(); ++i)
      csv.row({format_real(traj.times[i]), format_real(traj.mass[i]), "", "", ""});
  }
  if (write_spectra) {
    for (std::size_t k = 0; k < traj.size(); ++k) {
      char name[32];
      std::snprintf(name, sizeof name, "spectrum_%06zu.csv", k);
      auto comments = header;
      comments.push_back("t=" + format_real(traj.times[k]));
      CsvWriter csv(out_dir / name, comments, {"omega", "N"});
      for (std::size_t i = 0; i < sc.grid->n; ++i)
        csv.row({format_real(sc.grid->nodes[i]), format_real(traj.spectra[k][i])});
    }
  }

  std::ostringstream s;
  s << "termination=" << to_string(traj.termination) << " t_final=" << detail::fmt(traj.times.back())
    << " M_final=" << detail::fmt(traj.mass.back()) << " snapshots=" << traj.size()
    << " clamp_events=" << traj.clamp_events;
  if (traj.termination == Termination::blowup_detected && traj.size() >= 3)
    if (auto tb = estimate_blowup_time(traj)) s << " blowup_time_estimate=" << detail::fmt(*tb);
  if (sc.model.form == GoverningForm::eq1 || sc.model.form == GoverningForm::eq2) {
    const auto gap = rhs_form_gap(sc.initial);
    double worst = 0.0;
    for (double v : gap) worst = std::max(worst, std::abs(v));
    s << " max_eq1_eq2_gap_t0=" << detail::fmt(worst);
  }
  return {detail::exit_code_for(traj.termination), s.str()};
}

/// Riccati oracle for a trajectory's mass and the time of its blow-up.
struct OracleSeries {
  std::vector<std::optional<double>> values;
  double blowup_time = std::numeric_limits<double>::infinity();
};

inline OracleSeries riccati_oracle(double kappa, const Trajectory& traj, const SourceMass& g) {
  RiccatiParams p{kappa, traj.mass.front(), traj.times.front(), g};
  OracleSeries o;
  o.values = riccati_at_times(p, traj.times);
  if (g.constant) {
    o.blowup_time = riccati_blowup_time(p);
  } else {
    const double horizon = std::max(traj.times.back(), p.t0 + 1.0) * 10.0;
    const auto ms = riccati_numeric(p, horizon, (horizon - p.t0) / 1e5, 1e12);
    if (ms.blowup_time) o.blowup_time = *ms.blowup_time;
  }
  return o;
}

inline CommandResult cmd_oracle_check(const ScenarioConfig& cfg, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const Scenario sc(cfg);
  const Trajectory traj = sc.simulate();
  const KappaChoice kappa = resolve_kappa(cfg, traj, sc.model.source, sc.source_total);

  const OracleSeries oracle = riccati_oracle(kappa.value, traj, sc.source_total);
  const ConsistencyReport rep = consistency_report(traj.times, traj.mass, traj.times, oracle.values);
  const OracleSeries nominal = riccati_oracle(kNominalKappa, traj, sc.source_total);
  const ConsistencyReport rep_nominal = consistency_report(traj.times, traj.mass, traj.times, nominal.values);

  const double t0 = traj.times.front();
  const double cut = std::isfinite(oracle.blowup_time) ? t0 + 0.9 * (oracle.blowup_time - t0)
                                                       : std::numeric_limits<double>::infinity();
  {
    auto comments = detail::file_header(cfg, "oracle-check");
    comments.push_back("kappa=" + format_real(kappa.value) + " kappa_mode=" + kappa.mode);
    CsvWriter csv(out_dir / "oracle_report.csv", comments, {"t", "M", "N_oracle", "abs_err", "rel_err"});
    for (const auto& r : rep.rows)
      csv.row({format_real(r.t), format_real(r.mass), format_real(r.oracle),
               r.oracle ? format_real(r.abs_err) : "", r.oracle ? format_real(r.rel_err) : ""});
  }

  std::ostringstream s;
  s << "kappa_mode=" << kappa.mode << " kappa=" << detail::fmt(kappa.value);
  if (kappa.fit) s << " kappa_fit=" << detail::fmt(kappa.fit->kappa) << " dispersion=" << detail::fmt(kappa.fit->dispersion);
  if (!kappa.note.empty()) s << " note=\"" << kappa.note << "\"";
  s << " kappa_nominal=" << detail::fmt(kNominalKappa) << " t_star=" << detail::fmt(oracle.blowup_time)
    << " max_rel_err_0.9t*=" << detail::fmt(rep.max_rel_err_until(cut))
    << " max_rel_err_nominal_kappa_0.9t*=" << detail::fmt(rep_nominal.max_rel_err_until(cut));
  return {kExitOk, s.str()};
}

/// Coefficient for commands that need one before they run: a pilot
/// simulation is fitted when kappa is "fit".
inline KappaChoice pilot_kappa(const Scenario& sc) {
  if (sc.config.kappa.mode != "fit") return resolve_kappa(sc.config, Trajectory{}, sc.model.source, sc.source_total);
  return resolve_kappa(sc.config, sc.simulate(), sc.model.source, sc.source_total);
}

inline HorizonOptions horizon_options(const ScenarioConfig& cfg, double kappa) {
  HorizonOptions opt;
  opt.kappa = kappa;
  opt.dt = cfg.time.dt;
  opt.blowup_threshold = cfg.time.blowup_threshold;
  opt.clamp_negative = cfg.time.clamp_negative;
  opt.advance = cfg.horizon_advance == "picard" ? HorizonAdvance::picard : HorizonAdvance::mol;
  return opt;
}

inline CommandResult cmd_horizon(const ScenarioConfig& cfg, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const Scenario sc(cfg);
  const KappaChoice kappa = pilot_kappa(sc);
  const HorizonResult res =
      global_horizon(cfg.time.t_end, sc.initial, sc.model.source, horizon_options(cfg, kappa.value));

  bool dominated = true, disc_ok = true;
  std::size_t band_violations = 0, literal_violations = 0;
  {
    auto comments = detail::file_header(cfg, "horizon");
    comments.push_back("kappa=" + format_real(kappa.value) + " outcome=" + std::string(to_string(res.outcome)) +
                       " covered=" + format_real(res.covered));
    CsvWriter csv(out_dir / "certificate.csv", comments,
                  {"segment", "t", "psi", "m", "P_total", "discriminant", "E_bound", "M"});
    for (std::size_t k = 0; k < res.certificates.size(); ++k) {
      const auto& cert = res.certificates[k];
      dominated = dominated && cert.mass_dominated();
      disc_ok = disc_ok && cert.discriminant_nonnegative();
      for (const auto& smp : cert.samples) {
        band_violations += smp.bands.bound_violations;
        literal_violations += smp.bands.literal_violations;
        csv.row({std::to_string(k), format_real(smp.t), format_real(smp.psi), format_real(smp.m),
                 format_real(smp.p_total), format_real(smp.discriminant), format_real(smp.mass_bound),
                 format_real(smp.mass)});
      }
    }
  }

  std::ostringstream s;
  s << "outcome=" << to_string(res.outcome) << " segments=" << res.certificates.size()
    << " covered=" << detail::fmt(res.covered) << " kappa=" << detail::fmt(kappa.value)
    << " discriminant_nonnegative=" << (disc_ok ? "yes" : "no")
    << " mass_dominated=" << (dominated ? "yes" : "no") << " band_violations=" << band_violations
    << " literal_band_violations=" << literal_violations;
  if (!res.certificates.empty()) s << " first_b=" << detail::fmt(res.certificates.front().b);
  const int code = res.outcome == HorizonOutcome::reached_T       ? kExitOk
                   : res.outcome == HorizonOutcome::blowup_detected ? kExitBlowup
                                                                    : kExitFailure;
  return {code, s.str()};
}

struct PicardComparison {
  PicardResult picard;
  Trajectory mol;
  double a = 0.0;
  double b = 0.0;
  double kappa = 0.0;
  std::vector<double> sup_gap;  // per time sample
  double max_gap = 0.0;
};

/// Run Picard and MOL on [a, b] from the same spectrum and compare them
/// sample by sample. MOL takes one step per Picard time node.
inline PicardComparison compare_picard_mol(const Scenario& sc, double kappa) {
  const auto& cfg = sc.config;
  PicardComparison cmp;
  cmp.kappa = kappa;

  Spectrum start = sc.initial;
  if (cfg.picard.a > 0.0) {
    StepControls pre = make_step_controls(cfg);
    pre.t_end = cfg.picard.a;
    const auto traj = integrate_mol(sc.initial, sc.model, pre);
    detail::require(traj.termination == Termination::reached_t_end, "picard: run blew up before a");
    start = traj.back();
  }
  cmp.a = start.time;
  const double X = start.mass();
  const RiccatiParams rp{kappa, X, cmp.a, sc.source_total};

  double t_top = cfg.picard.b ? *cfg.picard.b : cfg.time.t_end;
  if (!cfg.picard.b && X > 0.0) t_top = std::min(t_top, cmp.a + 1.0001 / (4.0 * X));
  detail::require(t_top > cmp.a, "picard: empty interval");
  const auto series = riccati_numeric(rp, t_top, (t_top - cmp.a) / 4000.0, std::numeric_limits<double>::max());
  detail::require(series.times.back() >= t_top - 1e-12 * std::max(1.0, t_top),
                  "picard: moment equation blows up before b");
  cmp.b = cfg.picard.b ? *cfg.picard.b : local_horizon(cmp.a, start, sc.model.source, series, t_top);

  const PicardControls pc{cmp.a, cmp.b, cfg.picard.tol, cfg.picard.max_iter, cfg.picard.time_nodes};
  cmp.picard = picard_solve(start, sc.model.source, series, pc);

  StepControls sc_mol = make_step_controls(cfg);
  sc_mol.dt = pc.step();
  sc_mol.dt_min = std::min(sc_mol.dt_min, sc_mol.dt);
  sc_mol.t_end = cmp.b;
  sc_mol.store_every = 1;
  const RhsModel eq2{GoverningForm::eq2, Kernel::constant(), sc.model.source};
  cmp.mol = integrate_mol(start, eq2, sc_mol);
  detail::require(cmp.mol.size() == cmp.picard.trajectory.size(),
                  "picard: MOL and Picard time samples do not line up");

  for (std::size_t j = 0; j < cmp.mol.size(); ++j) {
    double gap = 0.0;
    const auto& p = cmp.picard.trajectory.spectra[j];
    const auto& m = cmp.mol.spectra[j];
    for (std::size_t i = 0; i < p.size(); ++i) gap = std::max(gap, std::abs(p[i] - m[i]));
    cmp.sup_gap.push_back(gap);
    cmp.max_gap = std::max(cmp.max_gap, gap);
  }
  return cmp;
}

inline CommandResult cmd_picard(const ScenarioConfig& cfg, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const Scenario sc(cfg);
  const KappaChoice kappa = pilot_kappa(sc);
  const PicardComparison cmp = compare_picard_mol(sc, kappa.value);
  {
    auto comments = detail::file_header(cfg, "picard");
    comments.push_back("a=" + format_real(cmp.a) + " b=" + format_real(cmp.b) +
                       " kappa=" + format_real(cmp.kappa) +
                       " iterations=" + std::to_string(cmp.picard.iterations));
    CsvWriter csv(out_dir / "picard_vs_mol.csv", comments, {"t", "sup_abs_gap", "picard_mass", "mol_mass"});
    for (std::size_t j = 0; j < cmp.sup_gap.size(); ++j)
      csv.row({format_real(cmp.mol.times[j]), format_real(cmp.sup_gap[j]),
               format_real(cmp.picard.trajectory.mass[j]), format_real(cmp.mol.mass[j])});
  }
  std::ostringstream s;
  s << "a=" << detail::fmt(cmp.a) << " b=" << detail::fmt(cmp.b) << " kappa=" << detail::fmt(cmp.kappa)
    << " iterations=" << cmp.picard.iterations << " converged=" << (cmp.picard.converged ? "yes" : "no")
    << " final_residual=" << detail::fmt(cmp.picard.residuals.empty() ? 0.0 : cmp.picard.residuals.back())
    << " sup_gap=" << detail::fmt(cmp.max_gap);
  return {cmp.picard.converged ? kExitOk : kExitFailure, s.str()};
}

struct BenchResult {
  std::size_t n = 0;
  std::size_t repeats = 0;
  std::uint64_t seed = 0;
  double naive_median = 0.0;  // seconds
  double fast_median = 0.0;
  double max_discrepancy = 0.0;  // max |fast - naive| / (1 + max |C|)
  bool fast_fell_back = false;
};

/// Seeded random spectra with values uniform in [0, 1).
inline std::vector<std::vector<double>> random_spectra(std::size_t n, std::size_t count,
                                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> out(count, std::vector<double>(n));
  for (auto& v : out)
    for (double& x : v) x = u(rng);
  return out;
}

inline BenchResult run_bench(std::size_t n, std::size_t repeats, std::uint64_t seed,
                             std::size_t crossover = kDefaultCorrelationCrossover) {
  detail::require(n >= 2, "bench: n must be >= 2");
  detail::require(repeats >= 1, "bench: repeats must be >= 1");
  const auto grid = build_uniform_grid(static_cast<double>(n - 1) * 0.02, n);
  const auto spectra = random_spectra(n, repeats, seed);

  using clock = std::chrono::steady_clock;
  BenchResult r{n, repeats, seed};
  r.fast_fell_back = n < crossover;
  std::vector<double> naive_t, fast_t;
  volatile double sink = 0.0;
  for (const auto& v : spectra) {
    auto t0 = clock::now();
    const auto c_naive = shift_correlation_naive(v, grid);
    auto t1 = clock::now();
    const auto c_fast = shift_correlation_fast(v, grid, crossover);
    auto t2 = clock::now();
    naive_t.push_back(std::chrono::duration<double>(t1 - t0).count());
    fast_t.push_back(std::chrono::duration<double>(t2 - t1).count());
    double peak = 0.0, diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      peak = std::max(peak, std::abs(c_naive[i]));
      diff = std::max(diff, std::abs(c_fast[i] - c_naive[i]));
    }
    r.max_discrepancy = std::max(r.max_discrepancy, diff / (1.0 + peak));
    sink = sink + c_fast[0];
  }
  auto median = [](std::vector<double> x) {
    std::sort(x.begin(), x.end());
    const std::size_t m = x.size() / 2;
    return x.size() % 2 ? x[m] : 0.5 * (x[m - 1] + x[m]);
  };
  r.naive_median = median(naive_t);
  r.fast_median = median(fast_t);
  return r;
}

inline CommandResult cmd_bench(std::size_t n, std::size_t repeats, std::uint64_t seed) {
  const BenchResult r = run_bench(n, repeats, seed);
  std::ostringstream s;
  s << "# cnkin " << kVersion << " bench seed=" << seed << "\n"
    << "n,repeats,naive_median_s,fast_median_s,speedup,max_discrepancy,fast_fallback\n"
    << r.n << ',' << r.repeats << ',' << format_real(r.naive_median) << ','
    << format_real(r.fast_median) << ',' << format_real(r.naive_median / r.fast_median) << ','
    << format_real(r.max_discrepancy) << ',' << (r.fast_fell_back ? "yes" : "no");
  return {kExitOk, s.str()};
}

}  // namespace cnkin
