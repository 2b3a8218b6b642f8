// ---------------------------------------------------------------------------
// errors.hpp
//
// Failure taxonomy shared by every module. Three classes map onto the three
// nonzero process exit codes of the command-line tool:
//
//   config_error    -> exit 1 : malformed/invalid user input (JSON, shapes,
//                               parameter domains checkable before any math)
//   model_error     -> exit 2 : the model itself is ill-posed (degenerate
//                               control cost, Riccati blow-up found by the
//                               well-posedness check)
//   numerical_error -> exit 3 : a solver failed at run time (mode root on the
//                               horizon, eigen-solver non-convergence, ...)
//
// Precondition violations in library code throw std::invalid_argument /
// std::domain_error directly, matching the surrounding codebase style; the
// classes below are for failures that carry run-level meaning.
// ---------------------------------------------------------------------------
#pragma once

#include <stdexcept>
#include <string>

namespace glq {

class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

class model_error : public std::runtime_error {
public:
    explicit model_error(const std::string& what) : std::runtime_error(what) {}
};

class numerical_error : public std::runtime_error {
public:
    explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
    numerical_error(const std::string& what, double when)
        : std::runtime_error(what), time_(when), has_time_(true) {}

    // Time at which the failure was detected (e.g. Riccati escape time),
    // when meaningful.
    [[nodiscard]] bool has_time() const noexcept { return has_time_; }
    [[nodiscard]] double time() const noexcept { return time_; }

private:
    double time_ = 0.0;
    bool has_time_ = false;
};

}  // namespace glq
