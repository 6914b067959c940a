#pragma once

#include "spectex/errors.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace spectex {

/// Loss at `x`; the gradient is written into `grad` (same length as `x`).
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct IterationInfo {
    std::size_t iteration = 0; // 0 is the starting point
    std::span<const double> x;
    double loss = 0.0;
    double gradient_norm = 0.0;
    std::size_t evaluations = 0;
};

struct OptimizerOptions {
    std::size_t memory = 10;
    std::size_t max_iterations = 1000;
    /// Stop once |grad|_2 falls below this. 0 disables the test.
    double gradient_tolerance = 1e-5;
    double c1 = 1e-4; // sufficient decrease
    double c2 = 0.9;  // curvature
    /// Objective evaluations allowed within one line search.
    std::size_t max_line_search_steps = 20;
    /// Called at the start point and after every accepted step. The last
    /// objective evaluation before the call is always the accepted point.
    std::function<void(const IterationInfo&)> on_iteration;

    /// Throws ConfigError unless 0 < c1 < c2 < 1 and memory >= 1.
    void validate() const;
};

enum class Termination { converged, budget, line_search_failure };

std::string to_string(Termination reason);

/// One accepted line-search step along direction d: phi(a) = f(x + a d).
struct StepRecord {
    double alpha = 0.0;
    double phi0 = 0.0;   // phi(0)
    double slope0 = 0.0; // phi'(0)
    double phi = 0.0;    // phi(alpha)
    double slope = 0.0;  // phi'(alpha)
    std::size_t evaluations = 0;
};

struct OptimizerReport {
    std::size_t iterations = 0;
    std::size_t evaluations = 0;
    std::vector<double> losses; // start point, then one per accepted step
    std::vector<StepRecord> steps;
    double final_gradient_norm = 0.0;
    Termination reason = Termination::budget;
};

/// Raised when the objective returns a non-finite loss or gradient.
class OptimizerAbort : public Error {
public:
    OptimizerAbort(const std::string& what, OptimizerReport report)
        : Error(what), report_(std::move(report)) {}
    const OptimizerReport& report() const noexcept { return report_; }

private:
    OptimizerReport report_;
};

struct MinimizeResult {
    std::vector<double> x;
    OptimizerReport report;
};

/// Limited-memory BFGS with a strong Wolfe line search.
///
/// The first step (and any step after the curvature memory is emptied) is
/// steepest descent scaled to unit length. Later steps use the two-loop
/// recursion with H0 = (s'y / y'y) I from the newest pair. Pairs with
/// s'y <= 1e-10 |s||y| are not stored.
MinimizeResult minimize(const Objective& objective, std::vector<double> x0,
                        const OptimizerOptions& options = {});

} // namespace spectex
