#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sguda/tensor.hpp"

namespace sguda {

struct GradCheckCase {
    std::string name;
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct GradCheckReport {
    std::vector<GradCheckCase> cases;
    bool all_pass = true;
    double seconds = 0.0;
};

// Central finite difference of a scalar function of one matrix entry.
double central_difference(const std::function<double()>& loss, double& slot, double h = 1e-5);

// Max relative error between an analytic gradient and central differences of
// `loss` over every entry of `value`. Near-zero gradients compare against an
// absolute floor of 1e-4.
double fd_max_rel_err(const std::function<double()>& loss, Matrix& value, const Matrix& analytic_grad,
                      double h = 1e-5);

// Finite-difference verification of every layer, both losses, and the full
// joint objective through a small two-branch encoder, for one seed.
GradCheckReport run_full_gradcheck(std::uint64_t seed);

}  // namespace sguda
