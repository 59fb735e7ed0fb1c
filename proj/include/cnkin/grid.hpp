#pragma once

// Uniform frequency grid on [0, omega_max] with composite-trapezoid weights.
// Every semi-infinite integral is truncated at omega_max; the spectrum is
// taken to vanish beyond the last node.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cnkin/errors.hpp"

namespace cnkin {

struct FrequencyGrid {
  std::size_t n = 0;
  double omega_max = 0.0;
  double h = 0.0;
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const noexcept { return n; }
};

inline FrequencyGrid build_uniform_grid(double omega_max, std::size_t n) {
  detail::require(n >= 2, "grid: n must be >= 2 (got " + std::to_string(n) + ")");
  detail::require(std::isfinite(omega_max) && omega_max > 0.0,
                  "grid: omega_max must be positive and finite");

  FrequencyGrid g;
  g.n = n;
  g.omega_max = omega_max;
  g.h = omega_max / static_cast<double>(n - 1);
  g.nodes.resize(n);
  g.weights.assign(n, g.h);
  for (std::size_t i = 0; i < n; ++i) g.nodes[i] = static_cast<double>(i) * g.h;
  g.nodes[n - 1] = omega_max;
  g.weights[0] = 0.5 * g.h;
  g.weights[n - 1] = 0.5 * g.h;
  return g;
}

namespace detail {

inline void check_length(std::span<const double> values, const FrequencyGrid& grid) {
  require(values.size() == grid.n, "length mismatch: expected " + std::to_string(grid.n) +
                                       " values, got " + std::to_string(values.size()));
}

inline void check_index(std::size_t k, const FrequencyGrid& grid) {
  require(k < grid.n, "node index " + std::to_string(k) + " out of range");
}

}  // namespace detail

inline double integrate_full(std::span<const double> values, const FrequencyGrid& grid) {
  detail::check_length(values, grid);
  double sum = 0.0;
  for (std::size_t i = 0; i < grid.n; ++i) sum += grid.weights[i] * values[i];
  return sum;
}

/// Trapezoid value of the integral over [0, nodes[k]].
inline double integrate_prefix(std::span<const double> values, const FrequencyGrid& grid,
                               std::size_t k) {
  detail::check_length(values, grid);
  detail::check_index(k, grid);
  if (k == 0) return 0.0;
  double sum = 0.5 * (values[0] + values[k]);
  for (std::size_t i = 1; i < k; ++i) sum += values[i];
  return grid.h * sum;
}

/// Trapezoid value of the integral over [nodes[k], omega_max].
inline double integrate_suffix(std::span<const double> values, const FrequencyGrid& grid,
                               std::size_t k) {
  detail::check_length(values, grid);
  detail::check_index(k, grid);
  const std::size_t last = grid.n - 1;
  if (k == last) return 0.0;
  double sum = 0.5 * (values[k] + values[last]);
  for (std::size_t i = k + 1; i < last; ++i) sum += values[i];
  return grid.h * sum;
}

/// All prefix integrals at once, O(n).
inline std::vector<double> prefix_integrals(std::span<const double> values,
                                            const FrequencyGrid& grid) {
  detail::check_length(values, grid);
  std::vector<double> out(grid.n, 0.0);
  for (std::size_t k = 1; k < grid.n; ++k)
    out[k] = out[k - 1] + 0.5 * grid.h * (values[k - 1] + values[k]);
  return out;
}

/// All suffix integrals at once, O(n).
inline std::vector<double> suffix_integrals(std::span<const double> values,
                                            const FrequencyGrid& grid) {
  detail::check_length(values, grid);
  std::vector<double> out(grid.n, 0.0);
  for (std::size_t k = grid.n - 1; k-- > 0;)
    out[k] = out[k + 1] + 0.5 * grid.h * (values[k] + values[k + 1]);
  return out;
}

/// output[i] = values[i + k], zero once i + k runs past the last node.
inline std::vector<double> shifted_values(std::span<const double> values, std::size_t k) {
  detail::require(k < values.size(), "shift " + std::to_string(k) + " out of range");
  std::vector<double> out(values.size(), 0.0);
  for (std::size_t i = 0; i + k < values.size(); ++i) out[i] = values[i + k];
  return out;
}

}  // namespace cnkin
