#pragma once

#include <stdexcept>
#include <string>

namespace pdcbell {

/// Thrown when a Bell score is requested for a configuration whose
/// normalizing event class is empty or degenerate (e.g. rule target 0,
/// or a denominator that vanishes identically).
class UndefinedScoreError : public std::runtime_error {
public:
    explicit UndefinedScoreError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Thrown when an operation needs photon-number support beyond the
/// truncated weight distribution while truncated mass remains.
class TruncationError : public std::runtime_error {
public:
    explicit TruncationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Thrown by source constructors whose weight formula degenerates
/// (injected amplifier at zero gain).
class DegenerateSourceError : public std::domain_error {
public:
    explicit DegenerateSourceError(const std::string& msg) : std::domain_error(msg) {}
};

/// Thrown by the critical-transmission solver when even lossless
/// detection never violates the inequality (no root of S(T) = 1).
class NoViolationError : public std::runtime_error {
public:
    explicit NoViolationError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace pdcbell
