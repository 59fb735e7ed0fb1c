#pragma once

// Interaction operators S1, S2, S3 of the coagulation-fragmentation model for
// general kernels, and the two right-hand sides of the constant-kernel S3
// equation with source:
//
//   eq1:  -N_w int_0^w N_{w-u} du + N_w int_w^inf N_u du + C(w) + g_w(t)
//   eq2:   N_w int_0^inf N_u du                         + C(w) + g_w(t)
//
// where C is the shift correlation. The two coincide only where the prefix
// integral vanishes, so both are kept.

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cnkin/correlation.hpp"
#include "cnkin/grid.hpp"
#include "cnkin/kernel.hpp"
#include "cnkin/source.hpp"
#include "cnkin/spectrum.hpp"

namespace cnkin {

namespace detail {

inline void check_finite(std::span<const double> values) {
  for (double v : values) require(!std::isnan(v), "NaN in spectrum values");
}

// Trapezoid sum over j = 0..k on the sub-interval [0, omega_k].
template <class F>
double prefix_sum(const FrequencyGrid& grid, std::size_t k, F&& f) {
  if (k == 0) return 0.0;
  double sum = 0.5 * (f(0) + f(k));
  for (std::size_t j = 1; j < k; ++j) sum += f(j);
  return grid.h * sum;
}

// Trapezoid sum over j = k..n-1 on the sub-interval [omega_k, omega_max].
template <class F>
double suffix_sum(const FrequencyGrid& grid, std::size_t k, F&& f) {
  const std::size_t last = grid.n - 1;
  if (k == last) return 0.0;
  double sum = 0.5 * (f(k) + f(last));
  for (std::size_t j = k + 1; j < last; ++j) sum += f(j);
  return grid.h * sum;
}

// Full-grid weighted sum over every j with a surviving shifted index j + k.
template <class F>
double shifted_sum(const FrequencyGrid& grid, std::size_t k, F&& f) {
  double sum = 0.0;
  for (std::size_t j = 0; j + k < grid.n; ++j) sum += grid.weights[j] * f(j);
  return sum;
}

template <class F>
double full_sum(const FrequencyGrid& grid, F&& f) {
  double sum = 0.0;
  for (std::size_t j = 0; j < grid.n; ++j) sum += grid.weights[j] * f(j);
  return sum;
}

}  // namespace detail

inline std::vector<double> eval_S1(std::span<const double> N, const FrequencyGrid& grid,
                                   const Kernel& K) {
  detail::check_length(N, grid);
  detail::check_finite(N);
  const auto& w = grid.nodes;
  std::vector<double> out(grid.n);
  for (std::size_t k = 0; k < grid.n; ++k) {
    const double gain =
        detail::prefix_sum(grid, k, [&](std::size_t j) { return K(w[k - j], w[j]) * N[j] * N[k - j]; });
    const double loss_up =
        detail::suffix_sum(grid, k, [&](std::size_t j) { return K(w[j - k], w[k]) * N[k] * N[j - k]; });
    const double loss_all =
        detail::full_sum(grid, [&](std::size_t j) { return K(w[k], w[j]) * N[k] * N[j]; });
    out[k] = gain - loss_up - loss_all;
  }
  return out;
}

inline std::vector<double> eval_S2(std::span<const double> N, const FrequencyGrid& grid,
                                   const Kernel& K) {
  detail::check_length(N, grid);
  detail::check_finite(N);
  const auto& w = grid.nodes;
  std::vector<double> out(grid.n);
  for (std::size_t k = 0; k < grid.n; ++k) {
    const double loss =
        detail::prefix_sum(grid, k, [&](std::size_t j) { return K(w[j], w[k - j]) * N[k] * N[j]; });
    const double gain_up =
        detail::suffix_sum(grid, k, [&](std::size_t j) { return K(w[k], w[j - k]) * N[j] * N[j - k]; });
    const double gain_shift =
        detail::shifted_sum(grid, k, [&](std::size_t j) { return K(w[k], w[j]) * N[k + j] * N[j]; });
    out[k] = -loss + gain_up + gain_shift;
  }
  return out;
}

inline std::vector<double> eval_S3(std::span<const double> N, const FrequencyGrid& grid,
                                   const Kernel& K) {
  detail::check_length(N, grid);
  detail::check_finite(N);
  const auto& w = grid.nodes;
  std::vector<double> out(grid.n);
  for (std::size_t k = 0; k < grid.n; ++k) {
    const double loss =
        detail::prefix_sum(grid, k, [&](std::size_t j) { return K(w[j], w[k - j]) * N[k] * N[k - j]; });
    const double gain_up =
        detail::suffix_sum(grid, k, [&](std::size_t j) { return K(w[j], w[j - k]) * N[k] * N[j]; });
    const double gain_shift =
        detail::shifted_sum(grid, k, [&](std::size_t j) { return K(w[j], w[k]) * N[k + j] * N[j]; });
    out[k] = -loss + gain_up + gain_shift;
  }
  return out;
}

inline std::vector<double> eval_Q(std::span<const double> N, const FrequencyGrid& grid,
                                  const Kernel& K1, const Kernel& K2, const Kernel& K3) {
  auto out = eval_S1(N, grid, K1);
  const auto s2 = eval_S2(N, grid, K2);
  const auto s3 = eval_S3(N, grid, K3);
  for (std::size_t k = 0; k < grid.n; ++k) out[k] += s2[k] + s3[k];
  return out;
}

inline std::vector<double> eval_S1(const Spectrum& s, const Kernel& K) { return eval_S1(s.values, *s.grid, K); }
inline std::vector<double> eval_S2(const Spectrum& s, const Kernel& K) { return eval_S2(s.values, *s.grid, K); }
inline std::vector<double> eval_S3(const Spectrum& s, const Kernel& K) { return eval_S3(s.values, *s.grid, K); }
inline std::vector<double> eval_Q(const Spectrum& s, const Kernel& K1, const Kernel& K2,
                                  const Kernel& K3) {
  return eval_Q(s.values, *s.grid, K1, K2, K3);
}

inline std::vector<double> eval_rhs_eq1(std::span<const double> N, const FrequencyGrid& grid,
                                        const SourceTerm& src, double t,
                                        std::size_t crossover = kDefaultCorrelationCrossover) {
  detail::check_length(N, grid);
  detail::check_finite(N);
  const auto prefix = prefix_integrals(N, grid);
  const auto suffix = suffix_integrals(N, grid);
  auto out = shift_correlation_fast(N, grid, crossover);
  for (std::size_t k = 0; k < grid.n; ++k) out[k] += N[k] * (suffix[k] - prefix[k]);
  src.add_to(grid, t, out);
  return out;
}

inline std::vector<double> eval_rhs_eq2(std::span<const double> N, const FrequencyGrid& grid,
                                        const SourceTerm& src, double t,
                                        std::size_t crossover = kDefaultCorrelationCrossover) {
  detail::check_length(N, grid);
  detail::check_finite(N);
  const double mass = integrate_full(N, grid);
  auto out = shift_correlation_fast(N, grid, crossover);
  for (std::size_t k = 0; k < grid.n; ++k) out[k] += N[k] * mass;
  src.add_to(grid, t, out);
  return out;
}

inline std::vector<double> eval_rhs_eq1(const Spectrum& s, const SourceTerm& src, double t) {
  return eval_rhs_eq1(s.values, *s.grid, src, t);
}
inline std::vector<double> eval_rhs_eq2(const Spectrum& s, const SourceTerm& src, double t) {
  return eval_rhs_eq2(s.values, *s.grid, src, t);
}

/// Pointwise eq1 - eq2; identically zero only for spectra with no mass below omega.
inline std::vector<double> rhs_form_gap(const Spectrum& s) {
  auto a = eval_rhs_eq1(s, SourceTerm::zero(), s.time);
  const auto b = eval_rhs_eq2(s, SourceTerm::zero(), s.time);
  for (std::size_t k = 0; k < a.size(); ++k) a[k] -= b[k];
  return a;
}

enum class GoverningForm { eq1, eq2, s1, s2, s3, full };

inline std::string_view to_string(GoverningForm f) {
  switch (f) {
    case GoverningForm::eq1: return "eq1";
    case GoverningForm::eq2: return "eq2";
    case GoverningForm::s1: return "s1";
    case GoverningForm::s2: return "s2";
    case GoverningForm::s3: return "s3";
    case GoverningForm::full: return "full";
  }
  return "eq2";
}

inline GoverningForm parse_governing_form(std::string_view name) {
  for (auto f : {GoverningForm::eq1, GoverningForm::eq2, GoverningForm::s1, GoverningForm::s2,
                 GoverningForm::s3, GoverningForm::full})
    if (to_string(f) == name) return f;
  throw ValidationError("rhs: unknown governing form '" + std::string(name) + "'");
}

/// A right-hand side dN/dt = F(N, t): governing form, kernel for the
/// operator forms, and source.
struct RhsModel {
  GoverningForm form = GoverningForm::eq2;
  Kernel kernel{};
  SourceTerm source{};
  std::size_t crossover = kDefaultCorrelationCrossover;

  std::vector<double> operator()(std::span<const double> N, const FrequencyGrid& grid,
                                 double t) const {
    switch (form) {
      case GoverningForm::eq1: return eval_rhs_eq1(N, grid, source, t, crossover);
      case GoverningForm::eq2: return eval_rhs_eq2(N, grid, source, t, crossover);
      default: break;
    }
    std::vector<double> out;
    switch (form) {
      case GoverningForm::s1: out = eval_S1(N, grid, kernel); break;
      case GoverningForm::s2: out = eval_S2(N, grid, kernel); break;
      case GoverningForm::s3: out = eval_S3(N, grid, kernel); break;
      default: out = eval_Q(N, grid, kernel, kernel, kernel); break;
    }
    source.add_to(grid, t, out);
    return out;
  }
};

}  // namespace cnkin
