#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <vector>

#include "cnkin/errors.hpp"
#include "cnkin/grid.hpp"

namespace cnkin {

using GridPtr = std::shared_ptr<const FrequencyGrid>;

inline GridPtr make_grid(double omega_max, std::size_t n) {
  return std::make_shared<const FrequencyGrid>(build_uniform_grid(omega_max, n));
}

/// Wave-action density N_omega sampled on a grid at one instant.
struct Spectrum {
  GridPtr grid;
  std::vector<double> values;
  double time = 0.0;

  std::span<const double> view() const noexcept { return values; }
  double mass() const { return integrate_full(values, *grid); }
  double max_value() const {
    return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
  }
};

inline Spectrum zero_spectrum(GridPtr grid, double time = 0.0) {
  const std::size_t n = grid->n;
  return Spectrum{std::move(grid), std::vector<double>(n, 0.0), time};
}

/// amplitude * exp(-rate * omega) on every node.
inline Spectrum exponential_spectrum(GridPtr grid, double amplitude, double rate,
                                     double time = 0.0) {
  std::vector<double> v(grid->n);
  for (std::size_t i = 0; i < grid->n; ++i) v[i] = amplitude * std::exp(-rate * grid->nodes[i]);
  return Spectrum{std::move(grid), std::move(v), time};
}

/// Throws unless the spectrum has the right length, no NaN, and no value
/// below -tolerance * max.
inline void validate_spectrum(const Spectrum& s, double negativity_tolerance = 1e-12) {
  detail::require(s.grid != nullptr, "spectrum has no grid");
  detail::check_length(s.values, *s.grid);
  double peak = 0.0;
  for (double v : s.values) {
    detail::require(std::isfinite(v), "spectrum contains a non-finite value");
    peak = std::max(peak, std::abs(v));
  }
  for (double v : s.values)
    detail::require(v >= -negativity_tolerance * peak, "A2: spectrum has negative values");
}

}  // namespace cnkin
