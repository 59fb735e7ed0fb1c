#pragma once

#include <cmath>

#include "cnkin/errors.hpp"

namespace cnkin {

/// Interaction kernel K(omega, mu): either identically one or omega^a * mu^b.
struct Kernel {
  enum class Mode { constant_one, power_law };

  Mode mode = Mode::constant_one;
  double a = 0.0;
  double b = 0.0;

  static Kernel constant() { return {}; }

  static Kernel power_law(double a, double b) {
    // Negative exponents are singular at the origin.
    detail::require(std::isfinite(a) && std::isfinite(b) && a >= 0.0 && b >= 0.0,
                    "kernel: power-law exponents must be finite and nonnegative");
    return {Mode::power_law, a, b};
  }

  double operator()(double omega, double mu) const {
    if (mode == Mode::constant_one) return 1.0;
    return pow0(omega, a) * pow0(mu, b);
  }

  bool operator==(const Kernel&) const = default;

 private:
  static double pow0(double x, double e) { return e == 0.0 ? 1.0 : std::pow(x, e); }
};

}  // namespace cnkin
