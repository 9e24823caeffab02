#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "adafsnet/optim.hpp"
#include "adafsnet/tensor.hpp"

namespace adafsnet {

// Fan-in-scaled uniform init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases zero.
inline Tensor uniform_init(Shape shape, int fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::int64_t n = 1;
    for (int e : shape) n *= e;
    std::vector<real_t> v(static_cast<std::size_t>(n));
    for (real_t& x : v) x = static_cast<real_t>(rng.uniform(-bound, bound));
    return Tensor::from_values(std::move(shape), std::move(v));
}

struct Conv1d {
    int in_channels = 0, out_channels = 0, kernel = 1, groups = 1;
    Parameter weight, bias;

    Conv1d() = default;
    Conv1d(int cin, int cout, int k, Rng& rng, int grp = 1)
        : in_channels(cin), out_channels(cout), kernel(k), groups(grp) {
        const int fan_in = (cin / grp) * k;
        weight = Parameter(uniform_init({cout, cin / grp, k}, fan_in, rng));
        bias = Parameter(Tensor::zeros({cout}));
    }

    Tensor forward(const Tensor& x) const { return conv1d_same(x, weight.value, bias.value, groups); }

    void collect(std::vector<Parameter*>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }
};

struct BatchNorm1d {
    int channels = 0;
    real_t momentum = real_t(0.1);
    real_t epsilon = real_t(1e-5);
    Parameter scale, shift;
    std::vector<real_t> running_mean, running_var;

    BatchNorm1d() = default;
    explicit BatchNorm1d(int c, real_t mom = real_t(0.1), real_t eps = real_t(1e-5))
        : channels(c), momentum(mom), epsilon(eps) {
        scale = Parameter(Tensor::full({c}, real_t(1)));
        shift = Parameter(Tensor::zeros({c}));
        running_mean.assign(static_cast<std::size_t>(c), real_t(0));
        running_var.assign(static_cast<std::size_t>(c), real_t(1));
    }

    Tensor forward(const Tensor& x, Mode mode) {
        return batchnorm1d(x, scale.value, shift.value, running_mean, running_var, mode, momentum,
                           epsilon);
    }

    void collect(std::vector<Parameter*>& out) {
        out.push_back(&scale);
        out.push_back(&shift);
    }
};

struct LinearLayer {
    int in_features = 0, out_features = 0;
    bool has_bias = true;
    Parameter weight, bias;

    LinearLayer() = default;
    LinearLayer(int in, int out, Rng& rng, bool with_bias = true)
        : in_features(in), out_features(out), has_bias(with_bias) {
        weight = Parameter(uniform_init({out, in}, in, rng));
        if (with_bias) bias = Parameter(Tensor::zeros({out}));
    }

    Tensor forward(const Tensor& x) const {
        return linear(x, weight.value, has_bias ? bias.value : Tensor());
    }

    void collect(std::vector<Parameter*>& out) {
        out.push_back(&weight);
        if (has_bias) out.push_back(&bias);
    }
};

// conv -> ReLU -> BN, the unit both the OS-Block and the dense blocks stack.
struct ConvUnit {
    Conv1d conv;
    BatchNorm1d bn;

    ConvUnit() = default;
    ConvUnit(int cin, int cout, int k, Rng& rng, real_t bn_momentum = real_t(0.1),
             real_t bn_epsilon = real_t(1e-5))
        : conv(cin, cout, k, rng), bn(cout, bn_momentum, bn_epsilon) {}

    Tensor forward(const Tensor& x, Mode bn_mode) { return bn.forward(relu(conv.forward(x)), bn_mode); }

    void collect(std::vector<Parameter*>& out) {
        conv.collect(out);
        bn.collect(out);
    }
};

}  // namespace adafsnet
