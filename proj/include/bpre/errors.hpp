#pragma once

#include <stdexcept>
#include <string>

namespace bpre {

// Bad input: carries the path of the offending field ("seed", "model.components[1].weight").
class ValidationError : public std::invalid_argument {
 public:
  ValidationError(std::string field, const std::string& what)
      : std::invalid_argument(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Model is not subcritical (E log m >= 0).
class NotSubcriticalError : public ValidationError {
 public:
  NotSubcriticalError(double e_log_m)
      : ValidationError("model", "not subcritical: E(log m) = " + std::to_string(e_log_m) + " >= 0"),
        e_log_m_(e_log_m) {}
  double e_log_m() const noexcept { return e_log_m_; }

 private:
  double e_log_m_;
};

// Too few conditioning events survived even after escalating the replicate count.
class ConditioningStarvation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A simulated population exceeded the configured cap.
class PopulationCapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bpre
