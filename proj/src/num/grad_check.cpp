#include "bit/num/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "bit/num/tape.hpp"

namespace bit::num {

GradCheckReport grad_check(const std::function<Tensor(ParamStore&)>& loss_fn, ParamStore& params,
                           int sample, double eps, double tol, uint64_t seed) {
    // Analytic pass.
    params.zero_grad();
    Tensor loss = loss_fn(params);
    if (!std::isfinite(loss.item())) throw NumericError("grad_check: non-finite loss");
    backward(loss);

    // Flatten the trainable scalar space for sampling.
    struct Slot {
        std::string name;
        int64_t index;
    };
    std::vector<Slot> slots;
    for (const auto& [name, e] : params) {
        if (!e.trainable) continue;
        for (int64_t i = 0; i < e.tensor.value().size(); ++i) slots.push_back({name, i});
    }
    if (slots.empty()) throw NumericError("grad_check: no trainable parameters");

    Rng rng(seed);
    GradCheckReport report;
    report.tol = tol;
    const size_t want = std::min<size_t>(static_cast<size_t>(sample), slots.size());
    for (size_t s = 0; s < want; ++s) {
        const Slot& slot = slots[rng.uniform_int(slots.size())];
        Tensor& p = params.at(slot.name);
        const double analytic = p.grad()[slot.index];
        const double orig = p.value()[slot.index];

        p.value()[slot.index] = orig + eps;
        const double up = loss_fn(params).item();
        p.value()[slot.index] = orig - eps;
        const double down = loss_fn(params).item();
        p.value()[slot.index] = orig;

        const double numeric = (up - down) / (2.0 * eps);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
        const double rel = std::abs(analytic - numeric) / denom;
        ++report.checked;
        if (rel > report.max_rel_err) {
            report.max_rel_err = rel;
            report.worst = {slot.name, slot.index, analytic, numeric, rel};
        }
    }
    report.pass = report.max_rel_err <= tol;
    return report;
}

}  // namespace bit::num
