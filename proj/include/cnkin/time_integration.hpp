#pragma once

// Method-of-lines time stepping: classical RK4 on the chosen right-hand side,
// fixed step with halving on NaN or negative-mass events, and a mass
// threshold that ends the run when the solution blows up.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cnkin/errors.hpp"
#include "cnkin/operators.hpp"
#include "cnkin/spectrum.hpp"

namespace cnkin {

struct StepControls {
  double dt = 1e-3;
  double dt_min = 1e-9;
  double t_end = 1.0;  // absolute end time
  double blowup_threshold = 1e6;
  bool clamp_negative = true;
  std::size_t store_every = 1;

  void validate() const {
    detail::require(dt_min > 0.0 && dt_min <= dt, "time: need 0 < dt_min <= dt");
    detail::require(t_end > 0.0, "time: t_end must be positive");
    detail::require(blowup_threshold > 0.0, "time: blowup_threshold must be positive");
    detail::require(store_every >= 1, "time: store_every must be >= 1");
  }
};

enum class Termination { reached_t_end, blowup_detected, step_underflow };

inline std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::reached_t_end: return "reached_t_end";
    case Termination::blowup_detected: return "blowup_detected";
    case Termination::step_underflow: return "step_underflow";
  }
  return "reached_t_end";
}

struct Trajectory {
  GridPtr grid;
  std::vector<double> times;
  std::vector<std::vector<double>> spectra;
  std::vector<double> mass;
  Termination termination = Termination::reached_t_end;
  std::size_t clamp_events = 0;
  std::size_t dt_halvings = 0;

  std::size_t size() const noexcept { return times.size(); }

  Spectrum snapshot(std::size_t i) const { return Spectrum{grid, spectra.at(i), times.at(i)}; }
  Spectrum back() const { return snapshot(size() - 1); }

  void push(double t, std::vector<double> values) {
    mass.push_back(integrate_full(values, *grid));
    times.push_back(t);
    spectra.push_back(std::move(values));
  }
};

struct StepResult {
  Spectrum spectrum;
  std::size_t clamped = 0;
  bool finite = true;
};

/// One classical four-stage step of the model from state.time to state.time + dt.
inline StepResult step_rk4(const Spectrum& state, const RhsModel& model, double dt,
                           bool clamp_negative = true) {
  detail::require(dt > 0.0, "step_rk4: dt must be positive");
  const auto& grid = *state.grid;
  const std::size_t n = grid.n;
  const double t = state.time;
  const auto& y = state.values;

  std::vector<double> stage(n);
  auto shifted = [&](const std::vector<double>& k, double c) {
    for (std::size_t i = 0; i < n; ++i) stage[i] = y[i] + c * k[i];
    return std::span<const double>(stage);
  };

  StepResult r{Spectrum{state.grid, std::vector<double>(n), t + dt}};
  try {
    const auto k1 = model(y, grid, t);
    const auto k2 = model(shifted(k1, 0.5 * dt), grid, t + 0.5 * dt);
    const auto k3 = model(shifted(k2, 0.5 * dt), grid, t + 0.5 * dt);
    const auto k4 = model(shifted(k3, dt), grid, t + dt);
    for (std::size_t i = 0; i < n; ++i)
      r.spectrum.values[i] = y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  } catch (const ValidationError&) {
    // NaN inside a stage.
    r.finite = false;
    return r;
  }

  for (double& v : r.spectrum.values) {
    if (!std::isfinite(v)) {
      r.finite = false;
      return r;
    }
    if (clamp_negative && v < 0.0) {
      v = 0.0;
      ++r.clamped;
    }
  }
  return r;
}

/// Advance `initial` to controls.t_end. Step times are initial.time + i * dt
/// so that runs with commensurate steps land on identical instants.
inline Trajectory integrate_mol(const Spectrum& initial, const RhsModel& model,
                                const StepControls& controls) {
  controls.validate();
  validate_spectrum(initial);
  detail::require(controls.t_end > initial.time, "time: t_end must exceed the start time");

  Trajectory traj;
  traj.grid = initial.grid;
  traj.push(initial.time, initial.values);
  if (traj.mass.back() >= controls.blowup_threshold) {
    traj.termination = Termination::blowup_detected;
    return traj;
  }

  Spectrum current = initial;
  double dt = controls.dt;
  double base_time = initial.time;
  std::size_t steps_since_base = 0;
  std::size_t step_count = 0;
  const double snap_tol = 1e-12 * std::max(1.0, std::abs(controls.t_end));

  while (current.time < controls.t_end) {
    double target = base_time + static_cast<double>(steps_since_base + 1) * dt;
    if (target > controls.t_end - snap_tol) target = controls.t_end;
    const double h = target - current.time;

    StepResult r = step_rk4(current, model, h, controls.clamp_negative);
    const double new_mass = r.finite ? r.spectrum.mass() : 0.0;
    if (!r.finite || !std::isfinite(new_mass) || new_mass < 0.0) {
      dt *= 0.5;
      ++traj.dt_halvings;
      if (dt < controls.dt_min) {
        traj.termination = Termination::step_underflow;
        if (traj.times.back() != current.time) traj.push(current.time, current.values);
        return traj;
      }
      base_time = current.time;
      steps_since_base = 0;
      continue;
    }

    r.spectrum.time = target;
    current = std::move(r.spectrum);
    traj.clamp_events += r.clamped;
    ++steps_since_base;
    ++step_count;

    const bool blew_up = new_mass >= controls.blowup_threshold;
    const bool at_end = current.time >= controls.t_end;
    if (blew_up || at_end || step_count % controls.store_every == 0)
      traj.push(current.time, current.values);
    if (blew_up) {
      traj.termination = Termination::blowup_detected;
      return traj;
    }
  }
  traj.termination = Termination::reached_t_end;
  return traj;
}

/// Root of a least-squares line through 1/M over the last `tail` samples;
/// empty when the fitted slope is not negative.
inline std::optional<double> estimate_blowup_time(std::span<const double> times,
                                                  std::span<const double> mass,
                                                  std::size_t tail = 5) {
  detail::require(times.size() == mass.size(), "blow-up fit: length mismatch");
  detail::require(times.size() >= 3 && tail >= 3, "blow-up fit: need at least 3 mass samples");
  const std::size_t k = std::min(tail, times.size());
  const std::size_t first = times.size() - k;

  double st = 0.0, sy = 0.0;
  for (std::size_t i = first; i < times.size(); ++i) {
    detail::require(mass[i] > 0.0, "blow-up fit: mass samples must be positive");
    st += times[i];
    sy += 1.0 / mass[i];
  }
  const double tbar = st / static_cast<double>(k);
  const double ybar = sy / static_cast<double>(k);
  double stt = 0.0, sty = 0.0;
  for (std::size_t i = first; i < times.size(); ++i) {
    const double dtv = times[i] - tbar;
    stt += dtv * dtv;
    sty += dtv * (1.0 / mass[i] - ybar);
  }
  const double slope = sty / stt;
  if (!(slope < 0.0)) return std::nullopt;
  return tbar - ybar / slope;
}

inline std::optional<double> estimate_blowup_time(const Trajectory& traj, std::size_t tail = 5) {
  detail::require(traj.termination == Termination::blowup_detected,
                  "blow-up fit: trajectory did not terminate by blow-up");
  return estimate_blowup_time(traj.times, traj.mass, tail);
}

}  // namespace cnkin
