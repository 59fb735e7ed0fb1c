#pragma once

// Scalar moment equation N' = kappa N^2 + g(t) for the total mass, solved in
// closed form (constant g) and by RK4, plus the tools that compare it with
// the mass series of a simulated trajectory.
//
// Integrating the eq2 right-hand side over omega gives
//   M' = M^2 + int int N_{w+u} N_u du dw + g = M^2 + M^2 / 2 + g,
// so the continuous closure coefficient is 3/2. The coefficient is kept as
// a parameter and the discrete value is measured from trajectories.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "cnkin/errors.hpp"
#include "cnkin/source.hpp"
#include "cnkin/time_integration.hpp"

namespace cnkin {

inline constexpr double kNominalKappa = 2.0;
inline constexpr double kContinuumKappa = 1.5;

struct RiccatiParams {
  double kappa = kNominalKappa;
  double n0 = 0.0;
  double t0 = 0.0;
  SourceMass g{};

  void validate() const {
    detail::require(std::isfinite(kappa) && kappa > 0.0, "riccati: kappa must be positive");
    detail::require(std::isfinite(n0) && n0 >= 0.0, "riccati: n0 must be nonnegative");
  }
};

struct MomentSeries {
  std::vector<double> times;
  std::vector<double> values;
  std::optional<double> blowup_time;

  std::size_t size() const noexcept { return times.size(); }

  /// Linear interpolation; clamps to the end values outside the sampled range.
  double at(double t) const {
    detail::require(!times.empty(), "moment series is empty");
    if (t <= times.front()) return values.front();
    if (t >= times.back()) return values.back();
    auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - times.begin());
    const double s = (t - times[i - 1]) / (times[i] - times[i - 1]);
    return values[i - 1] + s * (values[i] - values[i - 1]);
  }
};

/// Blow-up time of the constant-source solution; +infinity when it never blows up.
inline double riccati_blowup_time(const RiccatiParams& p) {
  p.validate();
  detail::require(p.g.constant.has_value(), "riccati: closed form needs a constant source");
  const double c = *p.g.constant;
  if (c == 0.0) {
    if (p.n0 == 0.0) return std::numeric_limits<double>::infinity();
    return p.t0 + 1.0 / (p.kappa * p.n0);
  }
  const double root = std::sqrt(p.kappa * c);
  return p.t0 + (0.5 * std::numbers::pi - std::atan(p.n0 * std::sqrt(p.kappa / c))) / root;
}

inline double riccati_closed_form(const RiccatiParams& p, double t) {
  const double t_star = riccati_blowup_time(p);
  if (t >= t_star) throw DomainError("riccati: evaluation at or after blow-up", t_star);
  const double c = *p.g.constant;
  const double s = t - p.t0;
  if (c == 0.0) return p.n0 / (1.0 - p.kappa * p.n0 * s);
  const double scale = std::sqrt(c / p.kappa);
  return scale * std::tan(std::sqrt(p.kappa * c) * s + std::atan(p.n0 * std::sqrt(p.kappa / c)));
}

namespace detail {

inline double riccati_rk4_step(const RiccatiParams& p, double t, double y, double dt) {
  auto f = [&](double tt, double yy) { return p.kappa * yy * yy + p.g(tt); };
  const double k1 = f(t, y);
  const double k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1);
  const double k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2);
  const double k4 = f(t + dt, y + dt * k3);
  return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace detail

/// RK4 from p.t0 to t_end with step dt, stopping once N reaches
/// blowup_threshold. On blow-up, blowup_time holds the 1/N extrapolation.
inline MomentSeries riccati_numeric(const RiccatiParams& p, double t_end, double dt,
                                    double blowup_threshold = 1e6) {
  p.validate();
  detail::require(dt > 0.0, "riccati: dt must be positive");
  detail::require(t_end > p.t0, "riccati: t_end must exceed t0");

  MomentSeries out;
  out.times.push_back(p.t0);
  out.values.push_back(p.n0);
  double y = p.n0;
  const double snap_tol = 1e-12 * std::max(1.0, std::abs(t_end));
  for (std::size_t i = 1;; ++i) {
    const double t = out.times.back();
    if (t >= t_end) break;
    double target = p.t0 + static_cast<double>(i) * dt;
    if (target > t_end - snap_tol) target = t_end;
    y = detail::riccati_rk4_step(p, t, y, target - t);
    if (!std::isfinite(y)) break;
    out.times.push_back(target);
    out.values.push_back(y);
    if (y >= blowup_threshold) {
      if (out.size() >= 3) out.blowup_time = estimate_blowup_time(out.times, out.values, 3);
      break;
    }
  }
  return out;
}

/// Oracle values at the given increasing times: closed form for a constant
/// source, otherwise RK4 with `substeps` steps per sample interval. Entries
/// at or past the blow-up come back empty.
inline std::vector<std::optional<double>> riccati_at_times(const RiccatiParams& p,
                                                           std::span<const double> times,
                                                           std::size_t substeps = 64) {
  p.validate();
  std::vector<std::optional<double>> out(times.size());
  if (p.g.constant.has_value()) {
    const double t_star = riccati_blowup_time(p);
    for (std::size_t i = 0; i < times.size(); ++i)
      if (times[i] < t_star) out[i] = riccati_closed_form(p, times[i]);
    return out;
  }
  double t = p.t0;
  double y = p.n0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    detail::require(times[i] >= t, "riccati: times must be increasing from t0");
    const double span = times[i] - t;
    if (span > 0.0) {
      const double h = span / static_cast<double>(substeps);
      for (std::size_t s = 0; s < substeps; ++s) {
        const double ts = t + static_cast<double>(s) * h;
        y = detail::riccati_rk4_step(p, ts, y, s + 1 == substeps ? times[i] - ts : h);
      }
      t = times[i];
    }
    if (!std::isfinite(y) || y > 1e300) break;
    out[i] = y;
  }
  return out;
}

inline MomentSeries mass_series(const Trajectory& traj) {
  detail::require(traj.size() > 0, "mass series: empty trajectory");
  MomentSeries out;
  out.times = traj.times;
  out.values.reserve(traj.size());
  for (const auto& s : traj.spectra) out.values.push_back(integrate_full(s, *traj.grid));
  return out;
}

struct KappaFit {
  double kappa = 0.0;
  double dispersion = 0.0;  // relative standard deviation of the samples
  std::size_t samples = 0;
};

namespace detail {

// Three-point derivative on a possibly nonuniform mesh.
inline double centered_derivative(std::span<const double> t, std::span<const double> y,
                                  std::size_t i) {
  const double h0 = t[i] - t[i - 1];
  const double h1 = t[i + 1] - t[i];
  return (y[i + 1] * h0 * h0 - y[i - 1] * h1 * h1 + y[i] * (h1 * h1 - h0 * h0)) /
         (h0 * h1 * (h0 + h1));
}

// Samples usable for fitting: mass positive and at most max_ratio * M(0).
inline std::size_t fit_window_end(std::span<const double> mass, double max_ratio) {
  std::size_t end = mass.size();
  if (max_ratio > 0.0 && mass.front() > 0.0) {
    end = 0;
    while (end < mass.size() && mass[end] <= max_ratio * mass.front()) ++end;
  }
  return end;
}

}  // namespace detail

/// Mean and relative spread of M'/M^2 over interior samples (source-free runs).
/// Only samples with M <= max_mass_ratio * M(0) enter the fit, which keeps the
/// centered differences away from the blow-up singularity; pass 0 to use all.
inline KappaFit fit_quadratic_coefficient(std::span<const double> times,
                                          std::span<const double> mass,
                                          double max_mass_ratio = 10.0) {
  detail::require(times.size() == mass.size(), "kappa fit: length mismatch");
  detail::require(!mass.empty() && mass.front() > 0.0, "kappa fit: mass is zero");
  const std::size_t end = detail::fit_window_end(mass, max_mass_ratio);
  detail::require(end >= 5, "kappa fit: need at least 5 snapshots before blow-up");

  std::vector<double> ratios;
  for (std::size_t i = 1; i + 1 < end; ++i) {
    detail::require(mass[i] > 1e-300, "kappa fit: mass near zero");
    ratios.push_back(detail::centered_derivative(times, mass, i) / (mass[i] * mass[i]));
  }
  double mean = 0.0;
  for (double r : ratios) mean += r;
  mean /= static_cast<double>(ratios.size());
  double var = 0.0;
  for (double r : ratios) var += (r - mean) * (r - mean);
  var /= static_cast<double>(ratios.size());
  return {mean, std::sqrt(var) / std::abs(mean), ratios.size()};
}

inline KappaFit fit_quadratic_coefficient(const Trajectory& traj, double max_mass_ratio = 10.0) {
  return fit_quadratic_coefficient(traj.times, traj.mass, max_mass_ratio);
}

/// Least-squares kappa for runs with a source: regress M' - g(t) on M^2.
/// Dispersion is the relative RMS residual.
inline KappaFit fit_quadratic_coefficient_with_source(std::span<const double> times,
                                                      std::span<const double> mass,
                                                      const SourceMass& g,
                                                      double max_mass_ratio = 10.0) {
  detail::require(times.size() == mass.size(), "kappa fit: length mismatch");
  const std::size_t end = detail::fit_window_end(mass, max_mass_ratio);
  detail::require(end >= 5, "kappa fit: need at least 5 snapshots before blow-up");
  double sxy = 0.0, sxx = 0.0;
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 1; i + 1 < end; ++i) {
    const double x = mass[i] * mass[i];
    const double y = detail::centered_derivative(times, mass, i) - g(times[i]);
    pts.emplace_back(x, y);
    sxy += x * y;
    sxx += x * x;
  }
  detail::require(sxx > 1e-300, "kappa fit: mass near zero");
  const double kappa = sxy / sxx;
  double res = 0.0, norm = 0.0;
  for (auto [x, y] : pts) {
    res += (y - kappa * x) * (y - kappa * x);
    norm += y * y;
  }
  return {kappa, norm > 0.0 ? std::sqrt(res / norm) : 0.0, pts.size()};
}

struct ConsistencyRow {
  double t = 0.0;
  double mass = 0.0;
  std::optional<double> oracle;
  double abs_err = 0.0;
  double rel_err = 0.0;
};

struct ConsistencyReport {
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
  std::vector<ConsistencyRow> rows;

  /// Maximum relative error over rows with t <= t_cut.
  double max_rel_err_until(double t_cut) const {
    double m = 0.0;
    for (const auto& r : rows)
      if (r.t <= t_cut && r.oracle) m = std::max(m, r.rel_err);
    return m;
  }
};

/// Compare the trajectory mass with oracle samples at identical times.
/// Rows where the oracle is undefined (past blow-up) carry no error.
inline ConsistencyReport consistency_report(std::span<const double> times,
                                            std::span<const double> mass,
                                            std::span<const double> oracle_times,
                                            std::span<const std::optional<double>> oracle) {
  detail::require(times.size() == oracle_times.size() && oracle.size() == times.size(),
                  "consistency: oracle sampled on a different time grid");
  ConsistencyReport rep;
  for (std::size_t i = 0; i < times.size(); ++i) {
    detail::require(std::abs(times[i] - oracle_times[i]) <=
                        1e-12 * std::max(1.0, std::abs(times[i])),
                    "consistency: oracle sampled on a different time grid");
    ConsistencyRow row{times[i], mass[i], oracle[i]};
    if (oracle[i]) {
      row.abs_err = std::abs(mass[i] - *oracle[i]);
      row.rel_err = *oracle[i] != 0.0 ? row.abs_err / std::abs(*oracle[i]) : row.abs_err;
      rep.max_abs_err = std::max(rep.max_abs_err, row.abs_err);
      rep.max_rel_err = std::max(rep.max_rel_err, row.rel_err);
    }
    rep.rows.push_back(row);
  }
  return rep;
}

inline ConsistencyReport consistency_report(const Trajectory& traj, const MomentSeries& oracle) {
  std::vector<std::optional<double>> values(oracle.values.begin(), oracle.values.end());
  return consistency_report(traj.times, traj.mass, oracle.times, values);
}

}  // namespace cnkin
