#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mvmt/autograd.hpp"
#include "mvmt/param_store.hpp"

namespace mvmt {

struct GradCheckReport {
    struct PerParam {
        std::string name;
        double max_relative_error = 0.0;
        std::size_t coords_checked = 0;
    };
    std::vector<PerParam> params;
    double max_relative_error = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

/// Compares the analytic gradients of a scalar loss against central finite
/// differences. The loss is supplied as a graph builder so the same function
/// serves both routes: one backward sweep for the analytic side, two value
/// evaluations per coordinate for the numeric side.
///
/// Tensors larger than `max_coords_per_tensor` are subsampled with a
/// deterministic per-name stream; at least 32 coordinates are always probed.
/// The relative error uses a denominator floor so that finite-difference
/// noise on near-zero gradients does not register as failure.
GradCheckReport finite_difference_check(
    const std::function<ag::Var(ParamStore&)>& loss_builder, ParamStore& params,
    double tolerance, std::size_t max_coords_per_tensor = 32, double step = 1e-5);

} // namespace mvmt
