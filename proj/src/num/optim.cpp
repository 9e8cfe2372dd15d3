#include "bit/num/optim.hpp"

#include <cmath>

namespace bit::num {

void adamw_step(ParamStore& params, OptState& state, const AdamWConfig& cfg) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (auto& [name, e] : params) {
        if (!e.trainable) continue;
        auto it = state.moments.find(name);
        if (it == state.moments.end()) throw NumericError("optimizer state missing for " + name);
        Node* node = e.tensor.node();
        node->ensure_grad();
        Array& p = node->value;
        const Array& g = node->grad;
        Array& m = it->second.m;
        Array& v = it->second.v;
        if (!m.same_shape(p) || !v.same_shape(p))
            throw NumericError("optimizer moment shape mismatch for " + name);
        for (int64_t i = 0; i < p.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] *= (1.0 - cfg.lr * cfg.weight_decay);
            p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
        check_finite(p, "adamw_step");
    }
}

double clip_grad_norm(ParamStore& params, double max_norm) {
    double sq = 0.0;
    for (auto& [name, e] : params) {
        if (!e.trainable) continue;
        Node* node = e.tensor.node();
        node->ensure_grad();
        for (int64_t i = 0; i < node->grad.size(); ++i) sq += node->grad[i] * node->grad[i];
    }
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double s = max_norm / norm;
        for (auto& [name, e] : params) {
            if (!e.trainable) continue;
            Node* node = e.tensor.node();
            for (int64_t i = 0; i < node->grad.size(); ++i) node->grad[i] *= s;
        }
    }
    return norm;
}

double lr_at_step(int64_t step, int64_t warmup_steps, int64_t total_steps, double peak) {
    if (total_steps <= 0 || warmup_steps < 0 || warmup_steps >= total_steps)
        throw ConfigError("invalid schedule: warmup must satisfy 0 <= warmup < total");
    if (step < 0 || step > total_steps)
        throw ConfigError("schedule step out of range [0, total]");
    if (step <= warmup_steps) {
        if (warmup_steps == 0) return peak;
        return peak * static_cast<double>(step) / static_cast<double>(warmup_steps);
    }
    return peak * static_cast<double>(total_steps - step) /
           static_cast<double>(total_steps - warmup_steps);
}

}  // namespace bit::num
