#include "adafsnet/gradcheck.hpp"

#include <chrono>
#include <cmath>
#include <memory>

#include "adafsnet/error.hpp"

namespace adafsnet {

real_t max_relative_error(const std::vector<real_t>& analytic, const std::vector<real_t>& numeric) {
    if (analytic.size() != numeric.size()) {
        throw ShapeError("max_relative_error: gradient arrays differ in length");
    }
    real_t worst = 0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const real_t denom = std::max(real_t(1e-8), std::fabs(analytic[i]) + std::fabs(numeric[i]));
        worst = std::max(worst, std::fabs(analytic[i] - numeric[i]) / denom);
    }
    return worst;
}

real_t finite_diff_check(const std::function<Tensor()>& fn, Parameter& theta, real_t eps) {
    theta.value.zero_grad();
    Tensor loss = fn();
    backward(loss);
    std::vector<real_t> analytic = theta.value.grad();

    std::vector<real_t>& coords = theta.value.values();
    std::vector<real_t> numeric(coords.size());
    {
        NoGradGuard no_grad;
        for (std::size_t i = 0; i < coords.size(); ++i) {
            const real_t saved = coords[i];
            coords[i] = saved + eps;
            const real_t up = fn().item();
            coords[i] = saved - eps;
            const real_t down = fn().item();
            coords[i] = saved;
            numeric[i] = (up - down) / (real_t(2) * eps);
        }
    }
    theta.value.zero_grad();
    return max_relative_error(analytic, numeric);
}

namespace {

// Checked gradients are inner products of these values, so the generators
// keep them positive where cancellation would otherwise push a coordinate's
// gradient toward zero and drown it in finite-difference noise. Signed inputs
// stay signed where the gradient does not dot with them (relu, sigmoid, BN).
Tensor random_tensor(Rng& rng, Shape shape, double lo, double hi) {
    std::int64_t n = 1;
    for (int e : shape) n *= e;
    std::vector<real_t> v(static_cast<std::size_t>(n));
    for (real_t& x : v) x = static_cast<real_t>(rng.uniform(lo, hi));
    return Tensor::from_values(std::move(shape), std::move(v));
}

Tensor signed_tensor(Rng& rng, Shape shape) { return random_tensor(rng, std::move(shape), -1.0, 1.0); }
Tensor positive_tensor(Rng& rng, Shape shape) {
    return random_tensor(rng, std::move(shape), 0.25, 1.25);
}
Tensor proj_tensor(Rng& rng, Shape shape) { return random_tensor(rng, std::move(shape), 0.5, 1.5); }

struct Case {
    std::function<Tensor()> fn;
    std::vector<Parameter*> inputs;
};

using CaseBuilder = std::function<Case(Rng&, std::vector<std::unique_ptr<Parameter>>&)>;

int rint(Rng& rng, int lo, int hi) {  // inclusive
    return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

Parameter* make_param(std::vector<std::unique_ptr<Parameter>>& store, Tensor t) {
    store.push_back(std::make_unique<Parameter>(std::move(t)));
    return store.back().get();
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

std::vector<GradCheckReport> run_gradient_suite(int cases_per_op, std::uint64_t seed) {
    std::vector<std::pair<std::string, CaseBuilder>> builders;

    builders.emplace_back("conv1d_same", [](Rng& rng, auto& store) {
        const int B = rint(rng, 1, 3), W = rint(rng, 2, 12), K = rint(rng, 1, 5);
        const int groups = rint(rng, 1, 2);
        const int cig = rint(rng, 1, 3), cog = rint(rng, 1, 3);
        const int Cin = groups * cig, Cout = groups * cog;
        Parameter* x = make_param(store, positive_tensor(rng, {B, Cin, W}));
        Parameter* w = make_param(store, positive_tensor(rng, {Cout, cig, K}));
        Parameter* b = make_param(store, positive_tensor(rng, {Cout}));
        Tensor proj = proj_tensor(rng, {B, Cout, W});
        Case c;
        c.inputs = {x, w, b};
        c.fn = [=]() { return sum(mul(conv1d_same(x->value, w->value, b->value, groups), proj)); };
        return c;
    });

    builders.emplace_back("batchnorm1d_train", [](Rng& rng, auto& store) {
        const int B = rint(rng, 2, 4), C = rint(rng, 1, 4), W = rint(rng, 2, 8);
        Parameter* x = make_param(store, signed_tensor(rng, {B, C, W}));
        Parameter* g = make_param(store, random_tensor(rng, {C}, 0.5, 1.5));
        Parameter* s = make_param(store, signed_tensor(rng, {C}));
        Tensor proj = proj_tensor(rng, {B, C, W});
        auto rm = std::make_shared<std::vector<real_t>>(C, real_t(0));
        auto rv = std::make_shared<std::vector<real_t>>(C, real_t(1));
        Case c;
        c.inputs = {x, g, s};
        c.fn = [=]() {
            return sum(mul(batchnorm1d(x->value, g->value, s->value, *rm, *rv, Mode::kTrain), proj));
        };
        return c;
    });

    builders.emplace_back("batchnorm1d_eval", [](Rng& rng, auto& store) {
        const int B = rint(rng, 1, 4), C = rint(rng, 1, 4), W = rint(rng, 1, 8);
        Parameter* x = make_param(store, signed_tensor(rng, {B, C, W}));
        Parameter* g = make_param(store, random_tensor(rng, {C}, 0.5, 1.5));
        Parameter* s = make_param(store, signed_tensor(rng, {C}));
        Tensor proj = proj_tensor(rng, {B, C, W});
        auto rm = std::make_shared<std::vector<real_t>>(C);
        auto rv = std::make_shared<std::vector<real_t>>(C);
        for (int i = 0; i < C; ++i) {
            (*rm)[static_cast<std::size_t>(i)] = static_cast<real_t>(rng.uniform(-0.5, 0.5));
            (*rv)[static_cast<std::size_t>(i)] = static_cast<real_t>(rng.uniform(0.5, 2.0));
        }
        Case c;
        c.inputs = {x, g, s};
        c.fn = [=]() {
            return sum(mul(batchnorm1d(x->value, g->value, s->value, *rm, *rv, Mode::kEval), proj));
        };
        return c;
    });

    builders.emplace_back("relu", [](Rng& rng, auto& store) {
        const int B = rint(rng, 1, 4), C = rint(rng, 1, 6), W = rint(rng, 1, 12);
        // Inputs away from the kink so the +-eps probes stay on one branch.
        Tensor t = signed_tensor(rng, {B, C, W});
        for (real_t& v : t.values()) v += (v >= 0 ? real_t(0.05) : real_t(-0.05));
        Parameter* x = make_param(store, std::move(t));
        Tensor proj = proj_tensor(rng, {B, C, W});
        Case c;
        c.inputs = {x};
        c.fn = [=]() { return sum(mul(relu(x->value), proj)); };
        return c;
    });

    builders.emplace_back("sigmoid", [](Rng& rng, auto& store) {
        const int B = rint(rng, 1, 4), C = rint(rng, 1, 6), W = rint(rng, 1, 12);
        Parameter* x = make_param(store, random_tensor(rng, {B, C, W}, -3.0, 3.0));
        Tensor proj = proj_tensor(rng, {B, C, W});
        Case c;
        c.inputs = {x};
        c.fn = [=]() { return sum(mul(sigmoid(x->value), proj)); };
        return c;
    });

    builders.emplace_back("linear", [](Rng& rng, auto& store) {
        const int B = rint(rng, 1, 5), Din = rint(rng, 1, 8), Dout = rint(rng, 1, 8);
        Parameter* x = make_param(store, positive_tensor(rng, {B, Din}));
        Parameter* w = make_param(store, positive_tensor(rng, {Dout, Din}));
        Case c;
        Tensor proj = proj_tensor(rng, {B, Dout});
        if (rng.below(2) == 0) {
            Parameter* b = make_param(store, positive_tensor(rng, {Dout}));
            c.inputs = {x, w, b};
            c.fn = [=]() { return sum(mul(linear(x->value, w->value, b->value), proj)); };
        } else {
            c.inputs = {x, w};
            c.fn = [=]() { return sum(mul(linear(x->value, w->value, Tensor()), proj)); };
        }
        return c;
    });

    builders.emplace_back("global_avg_pool", [](Rng& rng, auto& store) {
        const int B = rint(rng, 1, 4), C = rint(rng, 1, 6), W = rint(rng, 1, 16);
        Parameter* x = make_param(store, signed_tensor(rng, {B, C, W}));
        Tensor proj = proj_tensor(rng, {B, C});
        Case c;
        c.inputs = {x};
        c.fn = [=]() { return sum(mul(global_avg_pool(x->value), proj)); };
        return c;
    });

    builders.emplace_back("concat_channels", [](Rng& rng, auto& store) {
        const int B = rint(rng, 1, 3), W = rint(rng, 1, 8);
        const int parts = rint(rng, 1, 3);
        std::vector<Parameter*> xs;
        int Ctot = 0;
        for (int i = 0; i < parts; ++i) {
            const int C = rint(rng, 1, 4);
            Ctot += C;
            xs.push_back(make_param(store, signed_tensor(rng, {B, C, W})));
        }
        Tensor proj = proj_tensor(rng, {B, Ctot, W});
        Case c;
        c.inputs = xs;
        c.fn = [=]() {
            std::vector<Tensor> ts;
            for (Parameter* p : xs) ts.push_back(p->value);
            return sum(mul(concat_channels(ts), proj));
        };
        return c;
    });

    builders.emplace_back("add_mul", [](Rng& rng, auto& store) {
        const int B = rint(rng, 1, 4), C = rint(rng, 1, 6);
        Parameter* x = make_param(store, positive_tensor(rng, {B, C}));
        Parameter* y = make_param(store, positive_tensor(rng, {B, C}));
        Tensor proj = proj_tensor(rng, {B, C});
        Case c;
        c.inputs = {x, y};
        c.fn = [=]() { return sum(mul(add(mul(x->value, y->value), x->value), proj)); };
        return c;
    });

    builders.emplace_back("scale_channels", [](Rng& rng, auto& store) {
        const int B = rint(rng, 1, 3), C = rint(rng, 1, 6), W = rint(rng, 1, 10);
        Parameter* x = make_param(store, positive_tensor(rng, {B, C, W}));
        Parameter* s = make_param(store, positive_tensor(rng, {B, C}));
        Tensor proj = proj_tensor(rng, {B, C, W});
        Case c;
        c.inputs = {x, s};
        c.fn = [=]() { return sum(mul(scale_channels(x->value, s->value), proj)); };
        return c;
    });

    builders.emplace_back("softmax_cross_entropy", [](Rng& rng, auto& store) {
        const int B = rint(rng, 1, 5), C = rint(rng, 2, 6);
        Parameter* x = make_param(store, random_tensor(rng, {B, C}, -2.0, 2.0));
        auto labels = std::make_shared<std::vector<int>>();
        for (int b = 0; b < B; ++b) labels->push_back(rint(rng, 0, C - 1));
        Case c;
        c.inputs = {x};
        c.fn = [=]() { return softmax_cross_entropy(x->value, *labels); };
        return c;
    });

    // conv -> relu -> gap -> linear, the cross-op chain; positive regime keeps
    // every pre-activation off the relu kink.
    builders.emplace_back("composite", [](Rng& rng, auto& store) {
        const int B = rint(rng, 1, 3), D = rint(rng, 1, 2), W = rint(rng, 4, 10);
        const int C = rint(rng, 2, 4), K = rint(rng, 1, 4), Dout = rint(rng, 2, 4);
        Parameter* x = make_param(store, positive_tensor(rng, {B, D, W}));
        Parameter* cw = make_param(store, positive_tensor(rng, {C, D, K}));
        Parameter* cb = make_param(store, positive_tensor(rng, {C}));
        Parameter* fw = make_param(store, positive_tensor(rng, {Dout, C}));
        Parameter* fb = make_param(store, positive_tensor(rng, {Dout}));
        Tensor proj = proj_tensor(rng, {B, Dout});
        Case c;
        c.inputs = {x, cw, cb, fw, fb};
        c.fn = [=]() {
            Tensor h = relu(conv1d_same(x->value, cw->value, cb->value));
            Tensor logits = linear(global_avg_pool(h), fw->value, fb->value);
            return sum(mul(logits, proj));
        };
        return c;
    });

    std::vector<GradCheckReport> reports;
    for (const auto& [name, builder] : builders) {
        GradCheckReport report;
        report.op = name;
        const auto start = std::chrono::steady_clock::now();
        Rng rng(seed * 1000003ULL + fnv1a(name));  // per-op deterministic substream
        for (int i = 0; i < cases_per_op; ++i) {
            std::vector<std::unique_ptr<Parameter>> store;
            Case c = builder(rng, store);
            for (Parameter* p : c.inputs) {
                report.max_error = std::max(report.max_error, finite_diff_check(c.fn, *p));
            }
            report.cases += 1;
        }
        report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        reports.push_back(std::move(report));
    }
    return reports;
}

}  // namespace adafsnet
