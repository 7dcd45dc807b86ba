#pragma once

#include <stdexcept>
#include <string>

namespace rboltz {

/// Raised when a computed quantity violates its accuracy or consistency
/// budget (quadrature drift, expansion mismatch, infeasible constant search).
/// Callers that cannot recover should exit with status 3.
class numerics_error : public std::runtime_error {
public:
    explicit numerics_error(const std::string& what) : std::runtime_error(what) {}
};

/// Raised on malformed configuration input.  Carries a line number when the
/// problem can be pinned to one.  Callers should exit with status 2.
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& what, int line = -1)
        : std::runtime_error(line >= 0 ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

} // namespace rboltz
