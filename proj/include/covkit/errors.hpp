#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace covkit {

/// Input failed a structural check (polygon shape, scenario field, tiling).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what, long index = -1)
        : std::runtime_error(what), index_(index) {}

    /// Offending element (vertex, agent, line) or -1 when not applicable.
    long index() const { return index_; }

private:
    long index_;
};

/// Two agents closer than the minimum separation.
class CoincidentAgents : public ValidationError {
public:
    CoincidentAgents(std::size_t i, std::size_t j, double separation)
        : ValidationError("coincident agents " + std::to_string(i) + " and " + std::to_string(j) +
                              " (separation " + std::to_string(separation) + ")",
                          static_cast<long>(i)),
          first_(i),
          second_(j) {}

    std::size_t first() const { return first_; }
    std::size_t second() const { return second_; }

private:
    std::size_t first_;
    std::size_t second_;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Adaptive quadrature hit its subdivision limit before meeting tolerance.
class QuadratureAccuracyError : public std::runtime_error {
public:
    QuadratureAccuracyError(const std::string& what, double best_estimate, double error_estimate)
        : std::runtime_error(what), best_estimate_(best_estimate), error_estimate_(error_estimate) {}

    double best_estimate() const { return best_estimate_; }
    double error_estimate() const { return error_estimate_; }

private:
    double best_estimate_;
    double error_estimate_;
};

}  // namespace covkit
