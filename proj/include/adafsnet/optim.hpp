#pragma once

#include <cstdint>
#include <vector>

#include "adafsnet/tensor.hpp"

namespace adafsnet {

// A trainable tensor plus its Adam moment estimates.
struct Parameter {
    Tensor value;
    std::vector<real_t> adam_m;
    std::vector<real_t> adam_v;
    std::int64_t step_count = 0;

    Parameter() = default;
    explicit Parameter(Tensor t) : value(std::move(t)) {
        value.set_requires_grad(true);
        adam_m.assign(static_cast<std::size_t>(value.numel()), real_t(0));
        adam_v.assign(static_cast<std::size_t>(value.numel()), real_t(0));
    }

    bool defined() const { return value.defined(); }
};

struct AdamConfig {
    real_t lr = real_t(0.001);
    real_t beta1 = real_t(0.9);
    real_t beta2 = real_t(0.999);
    real_t epsilon = real_t(1e-8);
};

// Bias-corrected Adam update; clears gradients afterwards.
void adam_step(const std::vector<Parameter*>& params, const AdamConfig& cfg);

}  // namespace adafsnet
