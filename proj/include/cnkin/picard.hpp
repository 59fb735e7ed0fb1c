#pragma once

// Picard iteration on the Duhamel form of the eq2 equation,
//
//   N_w(t) = e^{psi(t)} N_w(a) + e^{psi(t)} int_a^t e^{-psi(s)} (C[N](w, s) + g_w(s)) ds,
//
// with psi(t) = int_a^t N(s) ds taken from a supplied moment series. Time
// integrals use the trapezoid rule on a uniform mesh of time_nodes points.

#include <algorithm>
#include <cmath>
#include <vector>

#include "cnkin/correlation.hpp"
#include "cnkin/moment_oracle.hpp"
#include "cnkin/source.hpp"
#include "cnkin/spectrum.hpp"
#include "cnkin/time_integration.hpp"

namespace cnkin {

struct PicardControls {
  double a = 0.0;
  double b = 0.1;
  double tol = 1e-8;
  std::size_t max_iter = 25;
  std::size_t time_nodes = 401;

  void validate() const {
    detail::require(a < b, "picard: need a < b");
    detail::require(tol > 0.0, "picard: tol must be positive");
    detail::require(max_iter >= 1, "picard: max_iter must be >= 1");
    detail::require(time_nodes >= 2, "picard: time_nodes must be >= 2");
  }

  double step() const { return (b - a) / static_cast<double>(time_nodes - 1); }
  double time(std::size_t j) const {
    return j + 1 == time_nodes ? b : a + static_cast<double>(j) * step();
  }
};

struct PicardResult {
  Trajectory trajectory;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> residuals;  // sup-norm change per iteration
};

inline PicardResult picard_solve(const Spectrum& initial, const SourceTerm& src,
                                 const MomentSeries& riccati_mass, const PicardControls& controls,
                                 std::size_t crossover = kDefaultCorrelationCrossover) {
  controls.validate();
  validate_spectrum(initial);
  detail::require(std::abs(initial.time - controls.a) <= 1e-12 * std::max(1.0, std::abs(controls.a)),
                  "picard: initial spectrum must be given at time a");
  detail::require(!riccati_mass.times.empty() && riccati_mass.times.front() <= controls.a + 1e-12 &&
                      riccati_mass.times.back() >= controls.b - 1e-12,
                  "picard: moment series does not cover [a, b]");

  const auto& grid = *initial.grid;
  const std::size_t n = grid.n;
  const std::size_t nt = controls.time_nodes;

  std::vector<double> times(nt), psi(nt, 0.0);
  for (std::size_t j = 0; j < nt; ++j) times[j] = controls.time(j);
  for (std::size_t j = 1; j < nt; ++j)
    psi[j] = psi[j - 1] + 0.5 * (times[j] - times[j - 1]) *
                              (riccati_mass.at(times[j - 1]) + riccati_mass.at(times[j]));

  // Source samples g_w(t_j), reused by every iteration.
  std::vector<std::vector<double>> source(nt);
  if (!src.is_zero())
    for (std::size_t j = 0; j < nt; ++j) source[j] = src.values(grid, times[j]);

  // Apply the Duhamel map to forcing F_j = C_j + g_j (C omitted when `iterate` is null).
  auto duhamel = [&](const std::vector<std::vector<double>>* iterate) {
    std::vector<std::vector<double>> next(nt, std::vector<double>(n));
    std::vector<double> acc(n, 0.0), prev_f(n, 0.0), f(n, 0.0);
    for (std::size_t j = 0; j < nt; ++j) {
      std::fill(f.begin(), f.end(), 0.0);
      if (iterate) f = shift_correlation_fast((*iterate)[j], grid, crossover);
      if (!source[j].empty())
        for (std::size_t i = 0; i < n; ++i) f[i] += source[j][i];
      const double decay = std::exp(-psi[j]);
      if (j > 0) {
        const double hstep = times[j] - times[j - 1];
        const double prev_decay = std::exp(-psi[j - 1]);
        for (std::size_t i = 0; i < n; ++i)
          acc[i] += 0.5 * hstep * (prev_decay * prev_f[i] + decay * f[i]);
      }
      const double grow = std::exp(psi[j]);
      for (std::size_t i = 0; i < n; ++i) next[j][i] = grow * (initial.values[i] + acc[i]);
      prev_f = f;
    }
    return next;
  };

  PicardResult result;
  auto current = duhamel(nullptr);
  for (std::size_t it = 1; it <= controls.max_iter; ++it) {
    auto next = duhamel(&current);
    double residual = 0.0;
    for (std::size_t j = 0; j < nt; ++j)
      for (std::size_t i = 0; i < n; ++i)
        residual = std::max(residual, std::abs(next[j][i] - current[j][i]));
    result.residuals.push_back(residual);
    result.iterations = it;
    current = std::move(next);
    if (!std::isfinite(residual)) break;
    if (residual <= controls.tol) {
      result.converged = true;
      break;
    }
  }

  result.trajectory.grid = initial.grid;
  for (std::size_t j = 0; j < nt; ++j) result.trajectory.push(times[j], std::move(current[j]));
  return result;
}

}  // namespace cnkin
