#pragma once

// Source term g_omega(t). Three families: identically zero, separable
// A * exp(-lambda * omega) * h(t), and tabulated per-node time samples held
// piecewise constant between sample times.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cnkin/errors.hpp"
#include "cnkin/grid.hpp"

namespace cnkin {

struct TimeProfile {
  enum class Kind { constant, exp_decay };

  Kind kind = Kind::constant;
  double c = 1.0;      // constant level
  double sigma = 0.0;  // decay rate

  double operator()(double t) const {
    return kind == Kind::constant ? c : std::exp(-sigma * t);
  }
  bool operator==(const TimeProfile&) const = default;
};

class SourceTerm {
 public:
  enum class Family { zero, separable, tabulated };

  static SourceTerm zero() { return SourceTerm{}; }

  static SourceTerm separable(double amplitude, double rate, TimeProfile profile) {
    detail::require(std::isfinite(amplitude) && amplitude >= 0.0,
                    "A2: negative source amplitude");
    detail::require(std::isfinite(rate) && rate > 0.0,
                    "A4: source rate must be positive for a finite total source");
    if (profile.kind == TimeProfile::Kind::constant)
      detail::require(std::isfinite(profile.c) && profile.c >= 0.0,
                      "A2: negative source time-profile constant");
    else
      detail::require(std::isfinite(profile.sigma) && profile.sigma >= 0.0,
                      "A1: source decay rate must be finite and nonnegative");
    SourceTerm s;
    s.family_ = Family::separable;
    s.amplitude_ = amplitude;
    s.rate_ = rate;
    s.profile_ = profile;
    return s;
  }

  /// rows[i] holds the node values for times[i]; times strictly increasing.
  static SourceTerm tabulated(std::vector<double> times, std::vector<std::vector<double>> rows) {
    detail::require(!times.empty() && times.size() == rows.size(),
                    "tabulated source: need one row per time sample");
    for (std::size_t i = 1; i < times.size(); ++i)
      detail::require(times[i] > times[i - 1], "tabulated source: times must increase");
    for (const auto& row : rows) {
      detail::require(row.size() == rows.front().size(),
                      "tabulated source: rows must have equal length");
      for (double v : row) {
        detail::require(std::isfinite(v), "A1: tabulated source has a non-finite sample");
        detail::require(v >= 0.0, "A2: tabulated source has a negative sample");
      }
    }
    SourceTerm s;
    s.family_ = Family::tabulated;
    s.times_ = std::move(times);
    s.rows_ = std::move(rows);
    return s;
  }

  Family family() const noexcept { return family_; }
  bool is_zero() const noexcept {
    return family_ == Family::zero || (family_ == Family::separable && amplitude_ == 0.0);
  }
  double amplitude() const noexcept { return amplitude_; }
  double rate() const noexcept { return rate_; }
  const TimeProfile& profile() const noexcept { return profile_; }
  const std::vector<double>& times() const noexcept { return times_; }
  const std::vector<std::vector<double>>& rows() const noexcept { return rows_; }

  /// Whether g_omega(t) does not depend on t.
  bool is_time_independent() const noexcept {
    if (family_ == Family::zero) return true;
    if (family_ == Family::separable)
      return profile_.kind == TimeProfile::Kind::constant || profile_.sigma == 0.0;
    return times_.size() == 1;
  }

  void check_grid(const FrequencyGrid& grid) const {
    if (family_ == Family::tabulated)
      detail::require(rows_.front().size() == grid.n,
                      "tabulated source: row length does not match the grid");
  }

  /// out[i] += g_{omega_i}(t).
  void add_to(const FrequencyGrid& grid, double t, std::span<double> out) const {
    detail::check_length(out, grid);
    switch (family_) {
      case Family::zero:
        return;
      case Family::separable: {
        const double scale = amplitude_ * profile_(t);
        if (scale == 0.0) return;
        for (std::size_t i = 0; i < grid.n; ++i)
          out[i] += scale * std::exp(-rate_ * grid.nodes[i]);
        return;
      }
      case Family::tabulated: {
        check_grid(grid);
        const auto& row = rows_[row_index(t)];
        for (std::size_t i = 0; i < grid.n; ++i) out[i] += row[i];
        return;
      }
    }
  }

  std::vector<double> values(const FrequencyGrid& grid, double t) const {
    std::vector<double> out(grid.n, 0.0);
    add_to(grid, t, out);
    return out;
  }

  /// g(t) = integral of g_omega(t) over the grid.
  double total(const FrequencyGrid& grid, double t) const {
    if (family_ == Family::zero) return 0.0;
    return integrate_full(values(grid, t), grid);
  }

  bool operator==(const SourceTerm&) const = default;

 private:
  std::size_t row_index(double t) const {
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    if (it == times_.begin()) return 0;
    return static_cast<std::size_t>(it - times_.begin()) - 1;
  }

  Family family_ = Family::zero;
  double amplitude_ = 0.0;
  double rate_ = 1.0;
  TimeProfile profile_{};
  std::vector<double> times_;
  std::vector<std::vector<double>> rows_;
};

/// Scalar source g(t) driving the moment equation. `constant` is set when
/// g does not vary in time, which enables closed-form Riccati solutions.
struct SourceMass {
  std::function<double(double)> eval = [](double) { return 0.0; };
  std::optional<double> constant = 0.0;

  static SourceMass constant_value(double c) {
    return SourceMass{[c](double) { return c; }, c};
  }
  double operator()(double t) const { return eval(t); }
};

/// Integrated source g(t) on a grid, with the spatial integral precomputed.
inline SourceMass source_mass(const SourceTerm& src, const FrequencyGrid& grid) {
  switch (src.family()) {
    case SourceTerm::Family::zero:
      return SourceMass::constant_value(0.0);
    case SourceTerm::Family::separable: {
      std::vector<double> shape(grid.n);
      for (std::size_t i = 0; i < grid.n; ++i) shape[i] = std::exp(-src.rate() * grid.nodes[i]);
      const double spatial = src.amplitude() * integrate_full(shape, grid);
      const TimeProfile profile = src.profile();
      if (src.is_time_independent()) return SourceMass::constant_value(spatial * profile(0.0));
      return SourceMass{[spatial, profile](double t) { return spatial * profile(t); },
                        std::nullopt};
    }
    case SourceTerm::Family::tabulated: {
      src.check_grid(grid);
      std::vector<double> totals;
      for (const auto& row : src.rows()) totals.push_back(integrate_full(row, grid));
      if (totals.size() == 1) return SourceMass::constant_value(totals.front());
      auto times = src.times();
      return SourceMass{[times, totals](double t) {
                          auto it = std::upper_bound(times.begin(), times.end(), t);
                          std::size_t i = it == times.begin()
                                              ? 0
                                              : static_cast<std::size_t>(it - times.begin()) - 1;
                          return totals[i];
                        },
                        std::nullopt};
    }
  }
  return SourceMass::constant_value(0.0);
}

}  // namespace cnkin
