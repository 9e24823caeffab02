#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "adafsnet/optim.hpp"
#include "adafsnet/tensor.hpp"

namespace adafsnet {

// max over coordinates of |a - n| / max(1e-8, |a| + |n|)
real_t max_relative_error(const std::vector<real_t>& analytic, const std::vector<real_t>& numeric);

// Central-difference check of fn's gradient w.r.t. theta. fn must be a
// deterministic parameter-to-scalar map; it is re-evaluated with theta
// perturbed one coordinate at a time.
real_t finite_diff_check(const std::function<Tensor()>& fn, Parameter& theta,
                         real_t eps = real_t(1e-6));

struct GradCheckReport {
    std::string op;
    int cases = 0;
    real_t max_error = 0;
    double seconds = 0;
};

// Randomized finite-difference suite over every differentiable operation.
// Each op is exercised on `cases_per_op` random small shapes.
std::vector<GradCheckReport> run_gradient_suite(int cases_per_op = 20, std::uint64_t seed = 0);

}  // namespace adafsnet
