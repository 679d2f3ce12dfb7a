#pragma once

#include <stdexcept>
#include <string>

namespace hierduals {

/// Input that violates a documented precondition (sizes, ranges, schemas).
class RejectedInput : public std::invalid_argument {
 public:
  explicit RejectedInput(const std::string& what) : std::invalid_argument(what) {}
};

/// Argument outside the mathematical domain of a function (e.g. λ < 0 for a concave dual).
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// The requested operation is not defined for this penalty/loss kind.
class CapabilityError : public std::logic_error {
 public:
  explicit CapabilityError(const std::string& what) : std::logic_error(what) {}
};

/// File could not be read, parsed or written.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// An MM step increased the objective beyond the allowed slack.
class MonotonicityViolation : public std::runtime_error {
 public:
  MonotonicityViolation(const std::string& step, double before, double after)
      : std::runtime_error("objective increased in step '" + step + "': " + std::to_string(before) +
                           " -> " + std::to_string(after)),
        step_(step),
        before_(before),
        after_(after) {}

  const std::string& step() const noexcept { return step_; }
  double before() const noexcept { return before_; }
  double after() const noexcept { return after_; }

 private:
  std::string step_;
  double before_;
  double after_;
};

namespace detail {

inline void require(bool ok, const char* msg) {
  if (!ok) throw RejectedInput(msg);
}

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw RejectedInput(msg);
}

}  // namespace detail
}  // namespace hierduals
