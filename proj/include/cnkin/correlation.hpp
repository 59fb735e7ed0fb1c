#pragma once

// Shift correlation C(omega_k) = sum_j w_j N_{k+j} N_j, the trapezoid
// realization of the integral of N_{omega+mu} N_mu over mu with the spectrum
// taken as zero past omega_max.

#include <algorithm>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "cnkin/grid.hpp"

namespace cnkin {

inline constexpr std::size_t kDefaultCorrelationCrossover = 256;

inline std::vector<double> shift_correlation_naive(std::span<const double> values,
                                                   const FrequencyGrid& grid) {
  detail::check_length(values, grid);
  const std::size_t n = grid.n;
  std::vector<double> out(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double sum = 0.0;
    for (std::size_t j = 0; j + k < n; ++j) sum += grid.weights[j] * values[k + j] * values[j];
    out[k] = sum;
  }
  return out;
}

/// Same contract as the naive sum, evaluated as a zero-padded FFT
/// cross-correlation of (w * N) against N. Grids smaller than `crossover`
/// use the naive sum.
inline std::vector<double> shift_correlation_fast(
    std::span<const double> values, const FrequencyGrid& grid,
    std::size_t crossover = kDefaultCorrelationCrossover) {
  detail::check_length(values, grid);
  const std::size_t n = grid.n;
  if (n < crossover) return shift_correlation_naive(values, grid);

  std::size_t len = 1;
  while (len < 2 * n) len <<= 1;

  // Plans are cached per size inside the FFT object.
  thread_local Eigen::FFT<double> fft;

  std::vector<double> weighted(len, 0.0);
  std::vector<double> plain(len, 0.0);
  bool nonnegative = true;
  for (std::size_t j = 0; j < n; ++j) {
    weighted[j] = grid.weights[j] * values[j];
    plain[j] = values[j];
    nonnegative = nonnegative && values[j] >= 0.0;
  }

  std::vector<std::complex<double>> wf;
  std::vector<std::complex<double>> pf;
  fft.fwd(wf, weighted);
  fft.fwd(pf, plain);
  for (std::size_t i = 0; i < wf.size(); ++i) pf[i] *= std::conj(wf[i]);

  std::vector<double> corr;
  fft.inv(corr, pf);

  std::vector<double> out(corr.begin(), corr.begin() + static_cast<std::ptrdiff_t>(n));
  // A correlation of nonnegative sequences is nonnegative; drop round-off below zero.
  if (nonnegative)
    for (double& v : out) v = std::max(v, 0.0);
  return out;
}

}  // namespace cnkin
