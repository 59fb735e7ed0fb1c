#pragma once

#include <stdexcept>
#include <string>

namespace cnkin {

/// Raised when an input violates a documented precondition.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a closed-form solution is evaluated at or beyond its blow-up time.
class DomainError : public std::domain_error {
 public:
  DomainError(const std::string& what, double blowup_time)
      : std::domain_error(what), blowup_time_(blowup_time) {}

  double blowup_time() const noexcept { return blowup_time_; }

 private:
  double blowup_time_;
};

/// Raised when the generating-function bound is requested past the point
/// where its discriminant turns negative.
class CertificateExpired : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

}  // namespace detail
}  // namespace cnkin
