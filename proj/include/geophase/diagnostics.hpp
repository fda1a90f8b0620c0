#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace geophase {

/// Thrown when an argument lies outside an operation's domain
/// (wrong mode kind, dimension mismatch, invalid label, ...).
class DomainError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a numerical procedure cannot deliver its contract
/// (integrator step-size collapse, singular matrix, failed solve).
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

using WarningHandler = std::function<void(std::string_view)>;

// Non-fatal precondition warnings (truncation, selectivity, renormalization).
// Default handler writes to stderr.
void warn(std::string_view message);
WarningHandler set_warning_handler(WarningHandler handler);

} // namespace geophase
