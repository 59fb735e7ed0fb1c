// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "cnkin/commands.hpp"

namespace fs = std::filesystem;
using namespace cnkin;

namespace {

const fs::path kScenarios = CNKIN_SCENARIO_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::vector<fs::path> shipped_scenarios() {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(kScenarios))
    if (e.path().extension() == ".json") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// The exp-initial, zero-source run shared by criteria 4, 5, 6 and 9.
struct ExpRun {
  Scenario scenario{load_config(kScenarios / "exp_blowup.json")};
  Trajectory traj = scenario.simulate();
  KappaFit fit = fit_quadratic_coefficient(traj);
  double t_star() const { return traj.times.front() + 1.0 / (fit.kappa * traj.mass.front()); }
};

const ExpRun& exp_run() {
  static const ExpRun run;
  return run;
}

Outcome correlation() {
  const auto r = run_bench(4096, 100, 20240601);
  const double speedup = r.naive_median / r.fast_median;
  return {r.max_discrepancy <= 1e-10 && speedup >= 5.0 && !r.fast_fell_back,
          "max|fast-naive|/(1+max|C|)=" + num(r.max_discrepancy) + " speedup=" + num(speedup)};
}

Outcome quadrature_order() {
  const double exact = 1.0 - std::exp(-40.0);
  std::vector<double> errs;
  for (std::size_t n : {251u, 501u, 1001u, 2001u}) {
    const auto g = build_uniform_grid(40.0, n);
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = std::exp(-g.nodes[i]);
    errs.push_back(std::abs(integrate_full(v, g) - exact));
  }
  bool ok = true;
  std::string d = "ratios=";
  for (std::size_t i = 1; i < errs.size(); ++i) {
    const double ratio = errs[i - 1] / errs[i];
    ok = ok && ratio >= 3.5 && ratio <= 4.5;
    d += num(ratio) + (i + 1 < errs.size() ? "," : "");
  }
  return {ok, d};
}

Outcome riccati_oracle_check() {
  double worst = 0.0;
  for (auto [kappa, n0, c] : {std::tuple{2.0, 1.0, 0.0}, {1.0, 0.0, 1.0}, {1.5, 0.5, 0.3}}) {
    const RiccatiParams p{kappa, n0, 0.0, SourceMass::constant_value(c)};
    const double t_star = riccati_blowup_time(p);
    const auto s = riccati_numeric(p, 0.9 * t_star, 1e-4);
    if (s.times.back() < 0.9 * t_star) return {false, "numeric run stopped early"};
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double exact = riccati_closed_form(p, s.times[i]);
      const double err = exact != 0.0 ? std::abs(s.values[i] - exact) / exact : std::abs(s.values[i]);
      worst = std::max(worst, err);
    }
  }
  return {worst <= 1e-8, "max_rel_err=" + num(worst)};
}

Outcome moment_closure() {
  const auto& run = exp_run();
  return {run.fit.dispersion <= 1e-3,
          "kappa_fit=" + num(run.fit.kappa) + " dispersion=" + num(run.fit.dispersion) +
              " kappa_nominal=" + num(kNominalKappa) + " samples=" + std::to_string(run.fit.samples)};
}

Outcome mass_consistency() {
  const auto& run = exp_run();
  const RiccatiParams p{run.fit.kappa, run.traj.mass.front(), run.traj.times.front(), {}};
  const auto oracle = riccati_at_times(p, run.traj.times);
  const auto rep = consistency_report(run.traj.times, run.traj.mass, run.traj.times, oracle);
  const double cut = run.traj.times.front() + 0.9 * (run.t_star() - run.traj.times.front());
  const double err = rep.max_rel_err_until(cut);
  return {err <= 1e-3, "max_rel_err=" + num(err) + " on [0," + num(cut) + "] t*=" + num(run.t_star())};
}

Outcome blowup_time() {
  const auto& run = exp_run();
  if (run.traj.termination != Termination::blowup_detected) return {false, "run did not blow up"};
  const auto tb = estimate_blowup_time(run.traj);
  if (!tb) return {false, "no blow-up estimate"};
  const double predicted = 1.0 / (run.fit.kappa * run.traj.mass.front());
  const double rel = std::abs(*tb - predicted) / predicted;
  return {rel <= 0.05, "estimate=" + num(*tb) + " predicted=" + num(predicted) + " rel=" + num(rel)};
}

Outcome picard_cross_validation() {
  bool ok = true;
  std::string d;
  for (const char* name : {"exp_blowup.json", "separable_source.json"}) {
    const Scenario sc(load_config(kScenarios / name));
    if (sc.config.picard.tol != 1e-8) return {false, std::string(name) + ": picard tol is not 1e-8"};
    const auto kappa = pilot_kappa(sc);
    const auto cmp = compare_picard_mol(sc, kappa.value);
    ok = ok && cmp.picard.converged && cmp.picard.iterations <= 25 && cmp.max_gap <= 1e-4 && cmp.b > cmp.a;
    d += std::string(d.empty() ? "" : " ") + name + ": b=" + num(cmp.b) +
         " iterations=" + std::to_string(cmp.picard.iterations) + " gap=" + num(cmp.max_gap);
  }
  return {ok, d};
}

Outcome existence_certificate() {
  bool ok = true;
  std::string d;
  for (const auto& path : shipped_scenarios()) {
    const Scenario sc(load_config(path));
    const auto kappa = pilot_kappa(sc);
    const auto res = global_horizon(sc.config.time.t_end, sc.initial, sc.model.source,
                                    horizon_options(sc.config, kappa.value));
    bool here = !res.certificates.empty();
    for (const auto& c : res.certificates) {
      here = here && c.b > c.a && c.discriminant_nonnegative();
      for (const auto& s : c.samples) here = here && s.mass <= s.mass_bound * (1.0 + 1e-6);
    }
    ok = ok && here;
    d += std::string(d.empty() ? "" : " ") + path.stem().string() + "(" +
         std::to_string(res.certificates.size()) + " seg, " + std::string(to_string(res.outcome)) +
         ", covered " + num(res.covered) + (here ? ")" : ", VIOLATED)");
  }
  return {ok, d};
}

Outcome nonnegativity() {
  bool ok = true;
  std::string d;
  auto check = [&](const std::string& name, const Trajectory& traj, double t_cut, bool clamp) {
    double lowest = 0.0, peak = 0.0;
    for (std::size_t i = 0; i < traj.size() && traj.times[i] <= t_cut; ++i)
      for (double v : traj.spectra[i]) {
        lowest = std::min(lowest, v);
        peak = std::max(peak, v);
      }
    const bool here = !clamp && traj.clamp_events == 0 && lowest >= -1e-9 * peak;
    ok = ok && here;
    d += (d.empty() ? "" : " ") + name + ": min=" + num(lowest) + " clamp_events=" +
         std::to_string(traj.clamp_events);
  };
  const auto& run = exp_run();
  check("exp_blowup", run.traj, run.traj.times.front() + 0.9 * (run.t_star() - run.traj.times.front()),
        run.scenario.config.time.clamp_negative);

  const Scenario sc(load_config(kScenarios / "separable_source.json"));
  const auto traj = sc.simulate();
  const auto kappa = resolve_kappa(sc.config, traj, sc.model.source, sc.source_total);
  const auto oracle = riccati_oracle(kappa.value, traj, sc.source_total);
  const double t0 = traj.times.front();
  check("separable_source", traj, t0 + 0.9 * (oracle.blowup_time - t0), sc.config.time.clamp_negative);
  return {ok, d};
}

Outcome determinism() {
  const auto root = fs::temp_directory_path() / "cnkin_acceptance_determinism";
  bool ok = true;
  std::size_t files = 0;
  for (const auto& path : shipped_scenarios()) {
    const auto cfg = load_config(path);
    const auto a = root / path.stem() / "a", b = root / path.stem() / "b";
    fs::remove_all(a);
    fs::remove_all(b);
    cmd_simulate(cfg, a);
    cmd_simulate(cfg, b);
    for (const auto& e : fs::directory_iterator(a)) {
      ++files;
      const auto other = b / e.path().filename();
      ok = ok && fs::exists(other) && slurp(e.path()) == slurp(other);
    }
    ok = ok && std::distance(fs::directory_iterator(a), fs::directory_iterator{}) ==
                   std::distance(fs::directory_iterator(b), fs::directory_iterator{});
  }
  fs::remove_all(root);
  return {ok, std::to_string(files) + " files compared across " + std::to_string(shipped_scenarios().size()) +
                  " scenarios"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"correlation equivalence and speed", correlation},
      {"quadrature order", quadrature_order},
      {"riccati oracle", riccati_oracle_check},
      {"moment closure is quadratic", moment_closure},
      {"mass matches fitted riccati oracle", mass_consistency},
      {"blow-up time", blowup_time},
      {"picard vs method of lines", picard_cross_validation},
      {"existence certificate", existence_certificate},
      {"nonnegativity without clamping", nonnegativity},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::printf("%s [%zu] %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
