#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bit/num/param_store.hpp"
#include "bit/num/rng.hpp"

namespace bit::num {

struct GradCheckEntry {
    std::string name;
    int64_t index;
    double analytic;
    double numeric;
    double rel_err;
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    double tol = 0.0;
    size_t checked = 0;
    bool pass = false;
    GradCheckEntry worst{};
};

// Central finite differences on `sample` randomly chosen scalar parameters.
// loss_fn must be a deterministic pure function of the parameter values; it is
// re-evaluated with individual scalars perturbed by +/- eps. Relative error is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
GradCheckReport grad_check(const std::function<Tensor(ParamStore&)>& loss_fn, ParamStore& params,
                           int sample, double eps, double tol, uint64_t seed);

}  // namespace bit::num
