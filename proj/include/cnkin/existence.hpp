#pragma once

// Local existence certificate for the eq2 equation on [a, b].
//
// With psi(t) = int_a^t N, the quantities
//   m(t)   = e^{psi(t)} int_a^t e^{-psi(s)} ds
//   p_w(t) = e^{psi(t)} (N_w(a) + int_a^t e^{-psi(s)} g_w(s) ds)
//   P(t)   = int p_w(t) dw
// bound the mass by the smaller root E of E = P + m E^2, which is real while
// 4 m P <= 1. The horizon b is the last time that condition holds; chaining
// horizons and restarting from the advanced spectrum covers [0, T].
//
// Both suprema in the definitions of m and p_w are attained at the right end
// because the expressions are nondecreasing in time; the *_sup_scan helpers
// evaluate the suprema literally for cross-checking.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "cnkin/errors.hpp"
#include "cnkin/moment_oracle.hpp"
#include "cnkin/picard.hpp"
#include "cnkin/source.hpp"
#include "cnkin/spectrum.hpp"
#include "cnkin/time_integration.hpp"

namespace cnkin {

/// Cumulative trapezoid integrals of psi, e^{-psi} and e^{-psi} g on the
/// nodes of a moment series restricted to [a, end]. Evaluation between nodes
/// adds one partial trapezoid from the preceding node.
class DuhamelSweep {
 public:
  DuhamelSweep(const MomentSeries& series, double a, SourceMass g = {})
      : series_(series), g_(std::move(g)), a_(a) {
    detail::require(series.size() >= 2, "existence: degenerate moment series");
    detail::require(series.times.front() <= a + tol(a) && a < series.times.back(),
                    "existence: start time outside the moment series");
    times_.push_back(a);
    for (double t : series.times)
      if (t > a) times_.push_back(t);
    const std::size_t k = times_.size();
    n_.resize(k);
    psi_.assign(k, 0.0);
    decay_int_.assign(k, 0.0);
    source_int_.assign(k, 0.0);
    plain_source_int_.assign(k, 0.0);
    gval_.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
      n_[i] = series.at(times_[i]);
      gval_[i] = g_(times_[i]);
    }
    for (std::size_t i = 1; i < k; ++i) {
      const double h = times_[i] - times_[i - 1];
      psi_[i] = psi_[i - 1] + 0.5 * h * (n_[i - 1] + n_[i]);
      const double d0 = std::exp(-psi_[i - 1]), d1 = std::exp(-psi_[i]);
      decay_int_[i] = decay_int_[i - 1] + 0.5 * h * (d0 + d1);
      source_int_[i] = source_int_[i - 1] + 0.5 * h * (d0 * gval_[i - 1] + d1 * gval_[i]);
      plain_source_int_[i] = plain_source_int_[i - 1] + 0.5 * h * (gval_[i - 1] + gval_[i]);
    }
  }

  double start() const noexcept { return a_; }
  double end() const noexcept { return times_.back(); }
  const std::vector<double>& nodes() const noexcept { return times_; }

  struct Point {
    double psi = 0.0;
    double decay_integral = 0.0;         // int_a^t e^{-psi}
    double source_integral = 0.0;        // int_a^t e^{-psi} g
    double plain_source_integral = 0.0;  // int_a^t g
    double m() const { return std::exp(psi) * decay_integral; }
  };

  Point at(double t) const {
    detail::require(t >= a_ - tol(a_) && t <= end() + tol(end()),
                    "existence: time outside the moment series domain");
    const std::size_t i = segment(t);
    Point p{psi_[i], decay_int_[i], source_int_[i], plain_source_int_[i]};
    const double h = t - times_[i];
    if (h > 0.0) {
      const double nt = series_.at(t);
      const double gt = g_(t);
      p.psi += 0.5 * h * (n_[i] + nt);
      const double d0 = std::exp(-psi_[i]), d1 = std::exp(-p.psi);
      p.decay_integral += 0.5 * h * (d0 + d1);
      p.source_integral += 0.5 * h * (d0 * gval_[i] + d1 * gt);
      p.plain_source_integral += 0.5 * h * (gval_[i] + gt);
    }
    return p;
  }

  /// 4 m(t) P(t) with P from the integrated source and initial mass X(a).
  double product(double t, double initial_mass) const {
    const Point p = at(t);
    const double total = std::exp(p.psi) * (initial_mass + p.source_integral);
    return 4.0 * p.m() * total;
  }

  /// p_w at each of the increasing `targets`, sweeping the nodes once.
  std::vector<std::vector<double>> p_omega(std::span<const double> initial,
                                           const SourceTerm& src, const FrequencyGrid& grid,
                                           std::span<const double> targets) const {
    const std::size_t n = grid.n;
    std::vector<std::vector<double>> out;
    out.reserve(targets.size());
    std::vector<double> acc(n, 0.0);
    std::vector<double> g_prev, g_cur;
    const bool with_source = !src.is_zero();
    if (with_source) g_prev = src.values(grid, times_[0]);
    std::size_t node = 0;
    for (double t : targets) {
      detail::require(t >= a_ - tol(a_) && t <= end() + tol(end()),
                      "existence: time outside the moment series domain");
      const std::size_t i = segment(t);
      detail::require(i >= node, "existence: targets must be increasing");
      while (node < i) {
        if (with_source) {
          g_cur = src.values(grid, times_[node + 1]);
          const double h = times_[node + 1] - times_[node];
          const double d0 = std::exp(-psi_[node]), d1 = std::exp(-psi_[node + 1]);
          for (std::size_t w = 0; w < n; ++w) acc[w] += 0.5 * h * (d0 * g_prev[w] + d1 * g_cur[w]);
          std::swap(g_prev, g_cur);
        }
        ++node;
      }
      const Point p = at(t);
      std::vector<double> row(n);
      const double grow = std::exp(p.psi);
      const double h = t - times_[node];
      if (with_source && h > 0.0) {
        const auto gt = src.values(grid, t);
        const double d0 = std::exp(-psi_[node]), d1 = std::exp(-p.psi);
        for (std::size_t w = 0; w < n; ++w)
          row[w] = grow * (initial[w] + acc[w] + 0.5 * h * (d0 * g_prev[w] + d1 * gt[w]));
      } else {
        for (std::size_t w = 0; w < n; ++w) row[w] = grow * (initial[w] + acc[w]);
      }
      out.push_back(std::move(row));
    }
    return out;
  }

 private:
  static double tol(double t) { return 1e-12 * std::max(1.0, std::abs(t)); }

  std::size_t segment(double t) const {
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    if (it == times_.begin()) return 0;
    const std::size_t i = static_cast<std::size_t>(it - times_.begin()) - 1;
    return std::min(i, times_.size() - 1);
  }

  MomentSeries series_;
  SourceMass g_;
  double a_;
  std::vector<double> times_, n_, gval_, psi_, decay_int_, source_int_, plain_source_int_;
};

inline double compute_psi(const MomentSeries& n_series, double a, double t) {
  return DuhamelSweep(n_series, a).at(t).psi;
}

inline double compute_m(const MomentSeries& n_series, double a, double t) {
  return DuhamelSweep(n_series, a).at(t).m();
}

/// The supremum of m(s) over every series node s in [a, t] and t itself.
inline double compute_m_sup_scan(const MomentSeries& n_series, double a, double t) {
  DuhamelSweep sweep(n_series, a);
  double best = sweep.at(t).m();
  for (double s : sweep.nodes())
    if (s <= t) best = std::max(best, sweep.at(s).m());
  return best;
}

inline std::vector<double> compute_p_omega(const Spectrum& initial, const SourceTerm& src,
                                           const MomentSeries& n_series, double t) {
  DuhamelSweep sweep(n_series, initial.time, source_mass(src, *initial.grid));
  const double target[] = {t};
  return sweep.p_omega(initial.values, src, *initial.grid, target).front();
}

inline std::vector<double> compute_p_omega_sup_scan(const Spectrum& initial,
                                                    const SourceTerm& src,
                                                    const MomentSeries& n_series, double t) {
  DuhamelSweep sweep(n_series, initial.time, source_mass(src, *initial.grid));
  std::vector<double> targets;
  for (double s : sweep.nodes())
    if (s < t) targets.push_back(s);
  targets.push_back(t);
  const auto rows = sweep.p_omega(initial.values, src, *initial.grid, targets);
  std::vector<double> best = rows.front();
  for (const auto& r : rows)
    for (std::size_t i = 0; i < best.size(); ++i) best[i] = std::max(best[i], r[i]);
  return best;
}

struct PTotal {
  double value = 0.0;  // int p_w dw
  double bound = 0.0;  // X(a) e^psi + e^psi int_a^t g
};

inline PTotal compute_P_total(std::span<const double> p_omega_values, const FrequencyGrid& grid,
                              double initial_mass, double psi, double source_mass_integral) {
  return {integrate_full(p_omega_values, grid),
          std::exp(psi) * (initial_mass + source_mass_integral)};
}

/// Smaller root of E = P + m E^2, written in a form that is stable as m -> 0.
inline double mass_bound(double P, double m) {
  detail::require(m >= 0.0 && P >= 0.0, "mass bound: need m >= 0 and P >= 0");
  const double disc = 1.0 - 4.0 * P * m;
  if (disc < 0.0) throw CertificateExpired("mass bound: negative discriminant, past the horizon");
  if (m == 0.0) return P;
  return 2.0 * P / (1.0 + std::sqrt(disc));
}

/// Largest b <= t_max with 4 m(t) P(t) <= 1 on (a, b].
inline double local_horizon(double a, const Spectrum& initial, const SourceTerm& src,
                            const MomentSeries& n_series, double t_max) {
  detail::require(a < t_max, "horizon: need a < t_max");
  detail::require(std::abs(initial.time - a) <= 1e-12 * std::max(1.0, std::abs(a)),
                  "horizon: initial spectrum must be given at time a");
  detail::require(n_series.size() >= 2 && n_series.times.back() >= t_max - 1e-12 * std::max(1.0, t_max),
                  "horizon: moment series does not reach t_max");
  const double X = initial.mass();
  DuhamelSweep sweep(n_series, a, source_mass(src, *initial.grid));

  double lo = a;
  double hi = t_max;
  bool crossed = false;
  for (double t : sweep.nodes()) {
    if (t <= a) continue;
    if (t >= t_max) break;
    if (sweep.product(t, X) > 1.0) {
      hi = t;
      crossed = true;
      break;
    }
    lo = t;
  }
  if (!crossed) {
    if (sweep.product(t_max, X) <= 1.0) return t_max;
  }
  const double resolution = 1e-6 * (t_max - a);
  while (hi - lo > resolution) {
    const double mid = 0.5 * (lo + hi);
    if (sweep.product(mid, X) <= 1.0)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

struct BandCheck {
  std::size_t bands = 0;
  std::size_t bound_violations = 0;    // band mass above its share of E
  std::size_t literal_violations = 0;  // band mass above the band integral of p_w alone
};

/// Unit-band comparison of the spectrum against the majorant: each band's
/// mass must not exceed its p_w share of E, i.e. the band integral of p_w
/// scaled by E / P.
inline BandCheck band_summability(const FrequencyGrid& grid, std::span<const double> N,
                                  std::span<const double> p, double E, double rel_tol = 1e-6) {
  detail::check_length(N, grid);
  detail::check_length(p, grid);
  const auto bands = static_cast<std::size_t>(std::ceil(grid.omega_max)) + 1;
  std::vector<double> band_n(bands, 0.0), band_p(bands, 0.0);
  double P = 0.0;
  for (std::size_t i = 0; i < grid.n; ++i) {
    const auto b = static_cast<std::size_t>(std::floor(grid.nodes[i]));
    band_n[b] += grid.weights[i] * N[i];
    band_p[b] += grid.weights[i] * p[i];
    P += grid.weights[i] * p[i];
  }
  double total_n = 0.0;
  for (double v : band_n) total_n += v;
  const double floor_abs = 1e-14 * std::max(total_n, P);

  BandCheck out;
  for (std::size_t b = 0; b < bands; ++b) {
    if (band_n[b] == 0.0 && band_p[b] == 0.0) continue;
    ++out.bands;
    const double budget = P > 0.0 ? band_p[b] * (E / P) : 0.0;
    if (band_n[b] > budget * (1.0 + rel_tol) + floor_abs) ++out.bound_violations;
    if (band_n[b] > band_p[b] * (1.0 + rel_tol) + floor_abs) ++out.literal_violations;
  }
  return out;
}

struct CertificateSample {
  double t = 0.0;
  double psi = 0.0;
  double m = 0.0;
  double p_total = 0.0;
  double p_bound = 0.0;
  double discriminant = 1.0;
  double mass_bound = 0.0;
  double source_mass_integral = 0.0;
  double mass = 0.0;  // simulated M(t)
  BandCheck bands{};
};

struct ExistenceCertificate {
  double a = 0.0;
  double b = 0.0;
  std::vector<CertificateSample> samples;

  bool mass_dominated(double rel_tol = 1e-6) const {
    for (const auto& s : samples)
      if (s.mass > s.mass_bound * (1.0 + rel_tol)) return false;
    return true;
  }
  bool discriminant_nonnegative() const {
    for (const auto& s : samples)
      if (s.discriminant < 0.0) return false;
    return true;
  }
};

/// Certificate quantities at increasing sample times in [a, b]; `mass`
/// columns are filled from `simulated` when given (one spectrum per time).
inline ExistenceCertificate build_certificate(double a, double b, const Spectrum& initial,
                                              const SourceTerm& src, const MomentSeries& n_series,
                                              std::span<const double> sample_times,
                                              std::span<const std::vector<double>> simulated = {}) {
  detail::require(simulated.empty() || simulated.size() == sample_times.size(),
                  "certificate: one simulated spectrum per sample time");
  const auto& grid = *initial.grid;
  const double X = initial.mass();
  DuhamelSweep sweep(n_series, a, source_mass(src, grid));
  const auto p_rows = sweep.p_omega(initial.values, src, grid, sample_times);

  ExistenceCertificate cert{a, b, {}};
  for (std::size_t i = 0; i < sample_times.size(); ++i) {
    const auto point = sweep.at(sample_times[i]);
    CertificateSample s;
    s.t = sample_times[i];
    s.psi = point.psi;
    s.m = point.m();
    const PTotal P = compute_P_total(p_rows[i], grid, X, point.psi, point.plain_source_integral);
    s.p_total = P.value;
    s.p_bound = P.bound;
    s.source_mass_integral = point.plain_source_integral;
    s.discriminant = 1.0 - 4.0 * s.p_total * s.m;
    s.mass_bound = s.discriminant >= 0.0 ? mass_bound(s.p_total, s.m)
                                         : std::numeric_limits<double>::quiet_NaN();
    if (!simulated.empty()) {
      s.mass = integrate_full(simulated[i], grid);
      if (s.discriminant >= 0.0) s.bands = band_summability(grid, simulated[i], p_rows[i], s.mass_bound);
    }
    cert.samples.push_back(s);
  }
  return cert;
}

enum class HorizonOutcome { reached_T, blowup_detected, stall };

inline std::string_view to_string(HorizonOutcome o) {
  switch (o) {
    case HorizonOutcome::reached_T: return "reached_T";
    case HorizonOutcome::blowup_detected: return "blowup_detected";
    case HorizonOutcome::stall: return "stall";
  }
  return "reached_T";
}

enum class HorizonAdvance { mol, picard };

struct HorizonOptions {
  double kappa = kContinuumKappa;  // coefficient of the moment equation driving psi
  std::size_t samples = 101;       // certificate samples per segment
  std::size_t series_steps = 4000;
  double dt = 1e-3;                // upper bound on the advancing step
  double blowup_threshold = 1e6;
  bool clamp_negative = true;
  HorizonAdvance advance = HorizonAdvance::mol;
  double picard_tol = 1e-10;
  std::size_t picard_max_iter = 50;
  std::size_t max_segments = 10000;
};

struct HorizonResult {
  std::vector<ExistenceCertificate> certificates;
  double covered = 0.0;
  HorizonOutcome outcome = HorizonOutcome::reached_T;
};

inline HorizonResult global_horizon(double T, const Spectrum& initial, const SourceTerm& src,
                                    const HorizonOptions& opt = {}) {
  detail::require(T > initial.time, "horizon: T must exceed the start time");
  detail::require(opt.samples >= 2, "horizon: need at least 2 samples per segment");
  validate_spectrum(initial);
  const auto& grid = *initial.grid;
  const SourceMass g = source_mass(src, grid);
  const RhsModel model{GoverningForm::eq2, Kernel::constant(), src};

  HorizonResult result;
  result.covered = initial.time;
  Spectrum current = initial;

  for (std::size_t seg = 0; seg < opt.max_segments; ++seg) {
    const double a = current.time;
    const double X = current.mass();
    if (X >= opt.blowup_threshold) {
      result.outcome = HorizonOutcome::blowup_detected;
      return result;
    }
    // 4 m P >= 4 (t - a) X, so the horizon cannot lie beyond a + 1/(4X).
    double t_cap = T;
    if (X > 0.0) t_cap = std::min(T, a + 1.0001 / (4.0 * X));
    const RiccatiParams rp{opt.kappa, X, a, g};
    const auto series = riccati_numeric(rp, t_cap, (t_cap - a) / static_cast<double>(opt.series_steps),
                                        std::numeric_limits<double>::max());
    const double t_max = std::min(t_cap, series.times.back());
    if (!(t_max > a)) {
      result.outcome = HorizonOutcome::stall;
      return result;
    }
    const double b = local_horizon(a, current, src, series, t_max);
    if (b - a < 1e-8 * T) {
      result.outcome = HorizonOutcome::stall;
      return result;
    }

    const double sample_step = (b - a) / static_cast<double>(opt.samples - 1);
    const auto substeps = static_cast<std::size_t>(std::max(1.0, std::ceil(sample_step / opt.dt - 1e-9)));
    Trajectory traj;
    if (opt.advance == HorizonAdvance::mol) {
      StepControls sc;
      sc.dt = sample_step / static_cast<double>(substeps);
      sc.dt_min = sc.dt * 1e-6;
      sc.t_end = b;
      sc.blowup_threshold = opt.blowup_threshold;
      sc.clamp_negative = opt.clamp_negative;
      sc.store_every = substeps;
      traj = integrate_mol(current, model, sc);
    } else {
      PicardControls pc{a, b, opt.picard_tol, opt.picard_max_iter, (opt.samples - 1) * substeps + 1};
      auto pr = picard_solve(current, src, series, pc);
      traj.grid = pr.trajectory.grid;
      for (std::size_t j = 0; j < pr.trajectory.size(); j += substeps)
        traj.push(pr.trajectory.times[j], pr.trajectory.spectra[j]);
    }

    auto cert = build_certificate(a, b, current, src, series, traj.times, traj.spectra);
    result.certificates.push_back(std::move(cert));
    if (traj.termination != Termination::reached_t_end) {
      result.covered = traj.times.back();
      result.outcome = traj.termination == Termination::blowup_detected
                           ? HorizonOutcome::blowup_detected
                           : HorizonOutcome::stall;
      return result;
    }
    result.covered = b;
    current = traj.back();
    if (b >= T) {
      result.outcome = HorizonOutcome::reached_T;
      return result;
    }
  }
  result.outcome = HorizonOutcome::stall;
  return result;
}

}  // namespace cnkin
