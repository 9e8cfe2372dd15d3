#pragma once

#include <map>
#include <string>

#include "bit/num/param_store.hpp"

namespace bit::num {

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

// Per-parameter first/second moments plus the shared step counter used for
// bias correction.
struct OptState {
    struct Moments {
        Array m;
        Array v;
    };
    std::map<std::string, Moments> moments;
    int64_t step = 0;

    void init_like(const ParamStore& params) {
        moments.clear();
        for (const auto& [name, e] : params) {
            moments[name] = {Array(e.tensor.value().shape()), Array(e.tensor.value().shape())};
        }
        step = 0;
    }
};

// Decoupled weight decay: param <- param * (1 - lr*wd), applied independently
// of the gradient path, then the bias-corrected moment update.
void adamw_step(ParamStore& params, OptState& state, const AdamWConfig& cfg);

// Scales all gradients in place so the global L2 norm is at most `max_norm`.
// Returns the pre-clip norm. max_norm <= 0 disables clipping.
double clip_grad_norm(ParamStore& params, double max_norm);

// Linear warmup 0 -> peak over [0, warmup_steps], then linear decay to 0 at
// total_steps.
double lr_at_step(int64_t step, int64_t warmup_steps, int64_t total_steps, double peak);

}  // namespace bit::num
