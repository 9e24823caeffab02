#include "adafsnet/optim.hpp"

#include <cmath>

namespace adafsnet {

void adam_step(const std::vector<Parameter*>& params, const AdamConfig& cfg) {
    for (Parameter* p : params) {
        p->step_count += 1;
        const real_t bc1 = real_t(1) - std::pow(cfg.beta1, static_cast<real_t>(p->step_count));
        const real_t bc2 = real_t(1) - std::pow(cfg.beta2, static_cast<real_t>(p->step_count));
        std::vector<real_t>& theta = p->value.values();
        std::vector<real_t>& g = p->value.grad();
        for (std::size_t i = 0; i < theta.size(); ++i) {
            p->adam_m[i] = cfg.beta1 * p->adam_m[i] + (real_t(1) - cfg.beta1) * g[i];
            p->adam_v[i] = cfg.beta2 * p->adam_v[i] + (real_t(1) - cfg.beta2) * g[i] * g[i];
            const real_t mhat = p->adam_m[i] / bc1;
            const real_t vhat = p->adam_v[i] / bc2;
            theta[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
            g[i] = real_t(0);
        }
    }
}

}  // namespace adafsnet
