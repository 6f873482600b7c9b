#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vsal/tape.hpp"
#include "vsal/tensor.hpp"

namespace vsal {

// Finite-difference verification runs at 64-bit; 32-bit rounding drowns the
// central-difference signal at usable step sizes.

struct GradCheckCase {
    std::string name;
    // Leaves perturbed by the checker. All must have requires_grad set.
    std::vector<TensorPtr<double>> leaves;
    // Builds the scalar loss. Called once with a tape for the analytic pass
    // and repeatedly with nullptr for finite-difference evaluations; must be
    // deterministic in the leaf values.
    std::function<TensorPtr<double>(Tape<double>*)> forward;
    double step = 1e-3;  // central-difference half-step
    // When nonzero, only the first N elements of each leaf are finite-diffed
    // (the analytic pass still covers every parameter).
    std::size_t max_fd_params = 0;
};

struct GradCheckResult {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t params_checked = 0;
    bool passed(double tol = 1e-4) const { return max_rel_error < tol; }
};

// Compares analytic gradients against (f(x+h) - f(x-h)) / 2h per parameter.
// Relative error uses max(1, |analytic|, |numeric|) as denominator, so tiny
// gradients are judged absolutely.
GradCheckResult run_grad_check(const GradCheckCase& check);

// One case per differentiable op plus composites (conv->relu->sum, the KLDiv
// training head, and the end-to-end toy model). Deterministic given the seed.
std::vector<GradCheckResult> gradcheck_suite(std::uint64_t seed);

}  // namespace vsal
