#include "adafsnet/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>
#include <unordered_set>

#include "adafsnet/error.hpp"

namespace adafsnet {

namespace detail {

namespace {
std::atomic<std::uint64_t> g_seq{1};
thread_local bool g_grad_enabled = true;
}  // namespace

bool grad_enabled() noexcept { return g_grad_enabled; }
std::uint64_t next_seq() noexcept { return g_seq.fetch_add(1, std::memory_order_relaxed); }

}  // namespace detail

using detail::TensorImpl;

NoGradGuard::NoGradGuard() : previous_(detail::grad_enabled()) { detail::g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { detail::g_grad_enabled = previous_; }

namespace {

std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (int e : shape) {
        if (e < 0) throw ShapeError("negative extent in tensor shape");
        n *= e;
    }
    return n;
}

std::shared_ptr<TensorImpl> new_impl(Shape shape) {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->seq = detail::next_seq();
    return impl;
}

void require_defined(const Tensor& t, const char* who) {
    if (!t.defined()) throw ShapeError(std::string(who) + ": undefined tensor argument");
}

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

// Reductions written as eight independent partial sums so the vectorizer can
// use them without reassociation flags.
real_t dot8(const real_t* a, const real_t* b, int n) {
    real_t p0 = 0, p1 = 0, p2 = 0, p3 = 0, p4 = 0, p5 = 0, p6 = 0, p7 = 0;
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        p0 += a[i] * b[i];
        p1 += a[i + 1] * b[i + 1];
        p2 += a[i + 2] * b[i + 2];
        p3 += a[i + 3] * b[i + 3];
        p4 += a[i + 4] * b[i + 4];
        p5 += a[i + 5] * b[i + 5];
        p6 += a[i + 6] * b[i + 6];
        p7 += a[i + 7] * b[i + 7];
    }
    real_t acc = ((p0 + p1) + (p2 + p3)) + ((p4 + p5) + (p6 + p7));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

real_t sum8(const real_t* a, int n) {
    real_t p0 = 0, p1 = 0, p2 = 0, p3 = 0, p4 = 0, p5 = 0, p6 = 0, p7 = 0;
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        p0 += a[i];
        p1 += a[i + 1];
        p2 += a[i + 2];
        p3 += a[i + 3];
        p4 += a[i + 4];
        p5 += a[i + 5];
        p6 += a[i + 6];
        p7 += a[i + 7];
    }
    real_t acc = ((p0 + p1) + (p2 + p3)) + ((p4 + p5) + (p6 + p7));
    for (; i < n; ++i) acc += a[i];
    return acc;
}

// sum((a - m)^2)
real_t sqdev8(const real_t* a, real_t m, int n) {
    real_t p0 = 0, p1 = 0, p2 = 0, p3 = 0, p4 = 0, p5 = 0, p6 = 0, p7 = 0;
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        const real_t d0 = a[i] - m, d1 = a[i + 1] - m, d2 = a[i + 2] - m, d3 = a[i + 3] - m;
        const real_t d4 = a[i + 4] - m, d5 = a[i + 5] - m, d6 = a[i + 6] - m, d7 = a[i + 7] - m;
        p0 += d0 * d0;
        p1 += d1 * d1;
        p2 += d2 * d2;
        p3 += d3 * d3;
        p4 += d4 * d4;
        p5 += d5 * d5;
        p6 += d6 * d6;
        p7 += d7 * d7;
    }
    real_t acc = ((p0 + p1) + (p2 + p3)) + ((p4 + p5) + (p6 + p7));
    for (; i < n; ++i) acc += (a[i] - m) * (a[i] - m);
    return acc;
}

// sum(a * (b - m))
real_t dotdev8(const real_t* a, const real_t* b, real_t m, int n) {
    real_t p0 = 0, p1 = 0, p2 = 0, p3 = 0, p4 = 0, p5 = 0, p6 = 0, p7 = 0;
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        p0 += a[i] * (b[i] - m);
        p1 += a[i + 1] * (b[i + 1] - m);
        p2 += a[i + 2] * (b[i + 2] - m);
        p3 += a[i + 3] * (b[i + 3] - m);
        p4 += a[i + 4] * (b[i + 4] - m);
        p5 += a[i + 5] * (b[i + 5] - m);
        p6 += a[i + 6] * (b[i + 6] - m);
        p7 += a[i + 7] * (b[i + 7] - m);
    }
    real_t acc = ((p0 + p1) + (p2 + p3)) + ((p4 + p5) + (p6 + p7));
    for (; i < n; ++i) acc += a[i] * (b[i] - m);
    return acc;
}

// Marks `out` as grad-requiring and records its parents when recording is on.
// `parents` lists only the grad-bearing inputs; `fn` does the accumulation.
void record(const std::shared_ptr<TensorImpl>& out,
            std::vector<std::shared_ptr<TensorImpl>> parents,
            std::function<void()> fn) {
    bool any = false;
    for (const auto& p : parents) any = any || (p && p->requires_grad);
    if (!detail::grad_enabled() || !any) return;
    out->requires_grad = true;
    out->grad.assign(static_cast<std::size_t>(out->numel()), real_t(0));
    out->parents = std::move(parents);
    out->backprop = std::move(fn);
}

}  // namespace

// --- Tensor handle ----------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), real_t(0), requires_grad);
}

Tensor Tensor::full(Shape shape, real_t value, bool requires_grad) {
    auto impl = new_impl(std::move(shape));
    impl->values.assign(static_cast<std::size_t>(shape_numel(impl->shape)), value);
    Tensor t = wrap(std::move(impl));
    if (requires_grad) t.set_requires_grad(true);
    return t;
}

Tensor Tensor::from_values(Shape shape, std::vector<real_t> values, bool requires_grad) {
    if (shape_numel(shape) != static_cast<std::int64_t>(values.size())) {
        throw ShapeError("from_values: shape " + shape_str(shape) + " does not match " +
                         std::to_string(values.size()) + " elements");
    }
    auto impl = new_impl(std::move(shape));
    impl->values = std::move(values);
    Tensor t = wrap(std::move(impl));
    if (requires_grad) t.set_requires_grad(true);
    return t;
}

Tensor Tensor::scalar(real_t value, bool requires_grad) {
    return from_values(Shape{}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
    require_defined(*this, "shape");
    return impl_->shape;
}

int Tensor::ndim() const { return static_cast<int>(shape().size()); }

int Tensor::dim(int i) const {
    const Shape& s = shape();
    if (i < 0 || i >= static_cast<int>(s.size())) throw ShapeError("dim: axis out of range");
    return s[static_cast<std::size_t>(i)];
}

std::int64_t Tensor::numel() const {
    require_defined(*this, "numel");
    return impl_->numel();
}

std::vector<real_t>& Tensor::values() {
    require_defined(*this, "values");
    return impl_->values;
}

const std::vector<real_t>& Tensor::values() const {
    require_defined(*this, "values");
    return impl_->values;
}

std::vector<real_t>& Tensor::grad() {
    require_defined(*this, "grad");
    if (!impl_->requires_grad) throw ShapeError("grad: tensor does not require grad");
    return impl_->grad;
}

const std::vector<real_t>& Tensor::grad() const {
    return const_cast<Tensor*>(this)->grad();
}

bool Tensor::requires_grad() const {
    require_defined(*this, "requires_grad");
    return impl_->requires_grad;
}

void Tensor::set_requires_grad(bool on) {
    require_defined(*this, "set_requires_grad");
    impl_->requires_grad = on;
    if (on) {
        impl_->grad.assign(impl_->values.size(), real_t(0));
    } else {
        impl_->grad.clear();
    }
}

void Tensor::zero_grad() {
    require_defined(*this, "zero_grad");
    std::fill(impl_->grad.begin(), impl_->grad.end(), real_t(0));
}

real_t Tensor::item() const {
    if (numel() != 1) throw ShapeError("item: tensor is not a scalar");
    return impl_->values[0];
}

Tensor Tensor::wrap(std::shared_ptr<TensorImpl> impl) {
    Tensor t;
    t.impl_ = std::move(impl);
    return t;
}

// --- backward ---------------------------------------------------------------

void backward(const Tensor& loss) {
    require_defined(loss, "backward");
    if (loss.numel() != 1) throw ShapeError("backward: loss is not a scalar");
    auto root = loss.impl();
    if (!root->requires_grad) return;  // nothing reachable

    // Collect every grad-requiring node reachable from the loss, then replay
    // in reverse execution order.
    std::vector<TensorImpl*> nodes;
    std::unordered_set<TensorImpl*> seen;
    std::vector<TensorImpl*> stack{root.get()};
    seen.insert(root.get());
    while (!stack.empty()) {
        TensorImpl* node = stack.back();
        stack.pop_back();
        nodes.push_back(node);
        for (const auto& p : node->parents) {
            if (p && p->requires_grad && seen.insert(p.get()).second) {
                stack.push_back(p.get());
            }
        }
    }
    std::sort(nodes.begin(), nodes.end(),
              [](const TensorImpl* a, const TensorImpl* b) { return a->seq > b->seq; });

    root->grad[0] += real_t(1);
    for (TensorImpl* node : nodes) {
        if (node->backprop) node->backprop();
    }
}

// --- elementwise ops --------------------------------------------------------

Tensor relu(const Tensor& x) {
    require_defined(x, "relu");
    auto xi = x.impl();
    auto out = new_impl(xi->shape);
    const std::size_t n = xi->values.size();
    out->values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out->values[i] = xi->values[i] > real_t(0) ? xi->values[i] : real_t(0);
    }
    TensorImpl* o = out.get();
    record(out, {xi}, [xi, o]() {
        for (std::size_t i = 0; i < xi->values.size(); ++i) {
            if (xi->values[i] > real_t(0)) xi->grad[i] += o->grad[i];
        }
    });
    return Tensor::wrap(out);
}

Tensor sigmoid(const Tensor& x) {
    require_defined(x, "sigmoid");
    auto xi = x.impl();
    auto out = new_impl(xi->shape);
    const std::size_t n = xi->values.size();
    out->values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const real_t v = xi->values[i];
        if (v >= real_t(0)) {
            out->values[i] = real_t(1) / (real_t(1) + std::exp(-v));
        } else {
            const real_t e = std::exp(v);
            out->values[i] = e / (real_t(1) + e);
        }
    }
    TensorImpl* o = out.get();
    record(out, {xi}, [xi, o]() {
        for (std::size_t i = 0; i < xi->values.size(); ++i) {
            const real_t s = o->values[i];
            xi->grad[i] += o->grad[i] * s * (real_t(1) - s);
        }
    });
    return Tensor::wrap(out);
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_defined(a, "add");
    require_defined(b, "add");
    if (a.shape() != b.shape()) {
        throw ShapeError("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    auto ai = a.impl(), bi = b.impl();
    auto out = new_impl(ai->shape);
    const std::size_t n = ai->values.size();
    out->values.resize(n);
    for (std::size_t i = 0; i < n; ++i) out->values[i] = ai->values[i] + bi->values[i];
    TensorImpl* o = out.get();
    record(out, {ai, bi}, [ai, bi, o]() {
        if (ai->requires_grad) {
            for (std::size_t i = 0; i < ai->grad.size(); ++i) ai->grad[i] += o->grad[i];
        }
        if (bi->requires_grad) {
            for (std::size_t i = 0; i < bi->grad.size(); ++i) bi->grad[i] += o->grad[i];
        }
    });
    return Tensor::wrap(out);
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_defined(a, "mul");
    require_defined(b, "mul");
    if (a.shape() != b.shape()) {
        throw ShapeError("mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    auto ai = a.impl(), bi = b.impl();
    auto out = new_impl(ai->shape);
    const std::size_t n = ai->values.size();
    out->values.resize(n);
    for (std::size_t i = 0; i < n; ++i) out->values[i] = ai->values[i] * bi->values[i];
    TensorImpl* o = out.get();
    record(out, {ai, bi}, [ai, bi, o]() {
        if (ai->requires_grad) {
            for (std::size_t i = 0; i < ai->grad.size(); ++i) ai->grad[i] += o->grad[i] * bi->values[i];
        }
        if (bi->requires_grad) {
            for (std::size_t i = 0; i < bi->grad.size(); ++i) bi->grad[i] += o->grad[i] * ai->values[i];
        }
    });
    return Tensor::wrap(out);
}

Tensor sum(const Tensor& x) {
    require_defined(x, "sum");
    auto xi = x.impl();
    auto out = new_impl(Shape{});
    out->values = {sum8(xi->values.data(), static_cast<int>(xi->values.size()))};
    TensorImpl* o = out.get();
    record(out, {xi}, [xi, o]() {
        const real_t g = o->grad[0];
        for (std::size_t i = 0; i < xi->grad.size(); ++i) xi->grad[i] += g;
    });
    return Tensor::wrap(out);
}

// --- conv1d -----------------------------------------------------------------

namespace {

// Scratch rows padded with zeros on both sides remove every bounds check from
// the convolution inner loops. One buffer per thread, reused across calls.
real_t* padded_scratch(std::size_t n) {
    thread_local std::vector<real_t> buf;
    if (buf.size() < n) buf.resize(n);
    return buf.data();
}

real_t* padded_scratch2(std::size_t n) {
    thread_local std::vector<real_t> buf;
    if (buf.size() < n) buf.resize(n);
    return buf.data();
}

// out[w] += sum_t wt[t] * pad[w + t] for w in [0, W). One saxpy per tap over
// the padded row; the plain loop body is what the vectorizer handles best.
inline void conv_rows_accumulate(real_t* __restrict out, const real_t* pad, const real_t* wt,
                                 int K, int W) {
    for (int t = 0; t < K; ++t) {
        const real_t wv = wt[t];
        const real_t* p = pad + t;
        for (int w = 0; w < W; ++w) out[w] += wv * p[w];
    }
}

}  // namespace

Tensor conv1d_same(const Tensor& input, const Tensor& weight, const Tensor& bias, int groups) {
    require_defined(input, "conv1d_same");
    require_defined(weight, "conv1d_same");
    require_defined(bias, "conv1d_same");
    if (input.ndim() != 3) {
        throw ShapeError("conv1d_same: input must be [B,Cin,W], got " + shape_str(input.shape()));
    }
    if (weight.ndim() != 3) {
        throw ShapeError("conv1d_same: weight must be [Cout,Cin/groups,k], got " + shape_str(weight.shape()));
    }
    const int B = input.dim(0), Cin = input.dim(1), W = input.dim(2);
    const int Cout = weight.dim(0), Cw = weight.dim(1), K = weight.dim(2);
    if (groups < 1) throw ShapeError("conv1d_same: groups must be >= 1");
    if (W < 1) throw ShapeError("conv1d_same: input width must be >= 1");
    if (K < 1) throw ShapeError("conv1d_same: kernel size must be >= 1");
    if (Cin % groups != 0) {
        throw ShapeError("conv1d_same: input channels " + std::to_string(Cin) +
                         " not divisible by groups " + std::to_string(groups));
    }
    if (Cout % groups != 0) {
        throw ShapeError("conv1d_same: output channels " + std::to_string(Cout) +
                         " not divisible by groups " + std::to_string(groups));
    }
    if (Cw != Cin / groups) {
        throw ShapeError("conv1d_same: weight dim 1 is " + std::to_string(Cw) + ", expected Cin/groups = " +
                         std::to_string(Cin / groups));
    }
    if (bias.ndim() != 1 || bias.dim(0) != Cout) {
        throw ShapeError("conv1d_same: bias must be [Cout=" + std::to_string(Cout) + "], got " +
                         shape_str(bias.shape()));
    }

    auto xi = input.impl();
    auto wi = weight.impl();
    auto bi = bias.impl();
    auto out = new_impl(Shape{B, Cout, W});
    out->values.resize(static_cast<std::size_t>(B) * Cout * W);

    const int cig = Cin / groups;   // input channels per group
    const int cog = Cout / groups;  // output channels per group
    const int pad_left = (K - 1) / 2;
    const int padded_w = W + K - 1;

    {
        const real_t* in = xi->values.data();
        const real_t* wt = wi->values.data();
        const real_t* bs = bi->values.data();
        real_t* ov = out->values.data();
        real_t* pad = padded_scratch(static_cast<std::size_t>(Cin) * padded_w);

        for (int b = 0; b < B; ++b) {
            for (int ci = 0; ci < Cin; ++ci) {
                real_t* prow = pad + static_cast<std::size_t>(ci) * padded_w;
                const real_t* irow = in + (static_cast<std::size_t>(b) * Cin + ci) * W;
                std::fill(prow, prow + pad_left, real_t(0));
                std::copy(irow, irow + W, prow + pad_left);
                std::fill(prow + pad_left + W, prow + padded_w, real_t(0));
            }
            for (int co = 0; co < Cout; ++co) {
                real_t* orow = ov + (static_cast<std::size_t>(b) * Cout + co) * W;
                std::fill(orow, orow + W, bs[co]);
                const int g = co / cog;
                for (int cl = 0; cl < cig; ++cl) {
                    const real_t* prow = pad + static_cast<std::size_t>(g * cig + cl) * padded_w;
                    const real_t* wrow = wt + (static_cast<std::size_t>(co) * cig + cl) * K;
                    conv_rows_accumulate(orow, prow, wrow, K, W);
                }
            }
        }
    }

    TensorImpl* o = out.get();
    record(out, {xi, wi, bi}, [xi, wi, bi, o, B, Cin, W, Cout, K, cig, cog, pad_left, padded_w]() {
        const real_t* go = o->grad.data();
        const real_t* in = xi->values.data();
        const real_t* wt = wi->values.data();
        // Padded upstream-grad rows turn the input gradient into a plain
        // correlation with the flipped kernel; padded input rows make the
        // weight gradient a set of dot products.
        real_t* gpad = padded_scratch(static_cast<std::size_t>(Cout) * padded_w);
        real_t* ipad = padded_scratch2(static_cast<std::size_t>(Cin) * padded_w);
        const int go_pad_left = K - 1 - pad_left;
        std::vector<real_t> wflip(static_cast<std::size_t>(K));
        for (int b = 0; b < B; ++b) {
            if (xi->requires_grad) {
                for (int co = 0; co < Cout; ++co) {
                    real_t* prow = gpad + static_cast<std::size_t>(co) * padded_w;
                    const real_t* grow = go + (static_cast<std::size_t>(b) * Cout + co) * W;
                    std::fill(prow, prow + go_pad_left, real_t(0));
                    std::copy(grow, grow + W, prow + go_pad_left);
                    std::fill(prow + go_pad_left + W, prow + padded_w, real_t(0));
                }
            }
            if (wi->requires_grad) {
                for (int ci = 0; ci < Cin; ++ci) {
                    real_t* prow = ipad + static_cast<std::size_t>(ci) * padded_w;
                    const real_t* irow = in + (static_cast<std::size_t>(b) * Cin + ci) * W;
                    std::fill(prow, prow + pad_left, real_t(0));
                    std::copy(irow, irow + W, prow + pad_left);
                    std::fill(prow + pad_left + W, prow + padded_w, real_t(0));
                }
            }
            for (int co = 0; co < Cout; ++co) {
                const real_t* grow = go + (static_cast<std::size_t>(b) * Cout + co) * W;
                const int g = co / cog;
                if (bi->requires_grad) {
                    bi->grad[static_cast<std::size_t>(co)] += sum8(grow, W);
                }
                for (int cl = 0; cl < cig; ++cl) {
                    const int ci = g * cig + cl;
                    const real_t* wrow = wt + (static_cast<std::size_t>(co) * cig + cl) * K;
                    if (xi->requires_grad) {
                        for (int t = 0; t < K; ++t) wflip[static_cast<std::size_t>(K - 1 - t)] = wrow[t];
                        conv_rows_accumulate(
                            xi->grad.data() + (static_cast<std::size_t>(b) * Cin + ci) * W,
                            gpad + static_cast<std::size_t>(co) * padded_w, wflip.data(), K, W);
                    }
                    if (wi->requires_grad) {
                        const real_t* prow = ipad + static_cast<std::size_t>(ci) * padded_w;
                        real_t* gwrow =
                            wi->grad.data() + (static_cast<std::size_t>(co) * cig + cl) * K;
                        for (int t = 0; t < K; ++t) {
                            gwrow[t] += dot8(grow, prow + t, W);
                        }
                    }
                }
            }
        }
    });
    return Tensor::wrap(out);
}

// --- batchnorm ----------------------------------------------------------------

Tensor batchnorm1d(const Tensor& x, const Tensor& scale, const Tensor& shift,
                   std::vector<real_t>& running_mean, std::vector<real_t>& running_var,
                   Mode mode, real_t momentum, real_t epsilon) {
    require_defined(x, "batchnorm1d");
    require_defined(scale, "batchnorm1d");
    require_defined(shift, "batchnorm1d");
    if (x.ndim() != 3) {
        throw ShapeError("batchnorm1d: input must be [B,C,W], got " + shape_str(x.shape()));
    }
    const int B = x.dim(0), C = x.dim(1), W = x.dim(2);
    if (scale.ndim() != 1 || scale.dim(0) != C || shift.ndim() != 1 || shift.dim(0) != C) {
        throw ShapeError("batchnorm1d: scale/shift must be [C=" + std::to_string(C) + "]");
    }
    if (running_mean.size() != static_cast<std::size_t>(C) ||
        running_var.size() != static_cast<std::size_t>(C)) {
        throw ShapeError("batchnorm1d: running stats must have C=" + std::to_string(C) + " entries");
    }
    const std::int64_t N = static_cast<std::int64_t>(B) * W;
    if (mode == Mode::kTrain && N < 2) {
        throw ShapeError("batchnorm1d: train mode needs B*W >= 2 per channel, got " + std::to_string(N));
    }

    auto xi = x.impl();
    auto si = scale.impl();
    auto hi = shift.impl();
    auto out = new_impl(xi->shape);
    out->values.resize(xi->values.size());

    std::vector<real_t> mean(C), invstd(C);
    if (mode == Mode::kTrain) {
        for (int c = 0; c < C; ++c) {
            real_t m = 0;
            for (int b = 0; b < B; ++b) {
                m += sum8(xi->values.data() + (static_cast<std::size_t>(b) * C + c) * W, W);
            }
            m /= static_cast<real_t>(N);
            real_t var = 0;
            for (int b = 0; b < B; ++b) {
                var += sqdev8(xi->values.data() + (static_cast<std::size_t>(b) * C + c) * W, m, W);
            }
            var /= static_cast<real_t>(N);
            mean[c] = m;
            invstd[c] = real_t(1) / std::sqrt(var + epsilon);
            running_mean[c] = (real_t(1) - momentum) * running_mean[c] + momentum * m;
            running_var[c] = (real_t(1) - momentum) * running_var[c] + momentum * var;
        }
    } else {
        for (int c = 0; c < C; ++c) {
            mean[c] = running_mean[c];
            invstd[c] = real_t(1) / std::sqrt(running_var[c] + epsilon);
        }
    }

    for (int b = 0; b < B; ++b) {
        for (int c = 0; c < C; ++c) {
            const real_t* row = xi->values.data() + (static_cast<std::size_t>(b) * C + c) * W;
            real_t* orow = out->values.data() + (static_cast<std::size_t>(b) * C + c) * W;
            const real_t m = mean[c], is = invstd[c];
            const real_t g = si->values[static_cast<std::size_t>(c)];
            const real_t s = hi->values[static_cast<std::size_t>(c)];
            for (int w = 0; w < W; ++w) orow[w] = (row[w] - m) * is * g + s;
        }
    }

    TensorImpl* o = out.get();
    const bool train = (mode == Mode::kTrain);
    record(out, {xi, si, hi},
           [xi, si, hi, o, B, C, W, N, train, mean = std::move(mean), invstd = std::move(invstd)]() {
               for (int c = 0; c < C; ++c) {
                   const real_t m = mean[static_cast<std::size_t>(c)];
                   const real_t is = invstd[static_cast<std::size_t>(c)];
                   const real_t g = si->values[static_cast<std::size_t>(c)];
                   real_t s1 = 0, s2_raw = 0;  // sum(go), sum(go * (x - m))
                   for (int b = 0; b < B; ++b) {
                       const std::size_t base = (static_cast<std::size_t>(b) * C + c) * W;
                       s1 += sum8(o->grad.data() + base, W);
                       s2_raw += dotdev8(o->grad.data() + base, xi->values.data() + base, m, W);
                   }
                   const real_t s2 = s2_raw * is;  // sum(go * xhat)
                   if (si->requires_grad) si->grad[static_cast<std::size_t>(c)] += s2;
                   if (hi->requires_grad) hi->grad[static_cast<std::size_t>(c)] += s1;
                   if (xi->requires_grad) {
                       if (train) {
                           const real_t inv_n = real_t(1) / static_cast<real_t>(N);
                           for (int b = 0; b < B; ++b) {
                               const std::size_t base = (static_cast<std::size_t>(b) * C + c) * W;
                               const real_t* grow = o->grad.data() + base;
                               const real_t* row = xi->values.data() + base;
                               real_t* gx = xi->grad.data() + base;
                               for (int w = 0; w < W; ++w) {
                                   const real_t xhat = (row[w] - m) * is;
                                   gx[w] += g * is * (grow[w] - s1 * inv_n - xhat * s2 * inv_n);
                               }
                           }
                       } else {
                           for (int b = 0; b < B; ++b) {
                               const std::size_t base = (static_cast<std::size_t>(b) * C + c) * W;
                               const real_t* grow = o->grad.data() + base;
                               real_t* gx = xi->grad.data() + base;
                               for (int w = 0; w < W; ++w) gx[w] += g * is * grow[w];
                           }
                       }
                   }
               }
           });
    return Tensor::wrap(out);
}

// --- linear -------------------------------------------------------------------

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    require_defined(x, "linear");
    require_defined(weight, "linear");
    if (x.ndim() != 2) throw ShapeError("linear: input must be [B,din], got " + shape_str(x.shape()));
    if (weight.ndim() != 2) {
        throw ShapeError("linear: weight must be [dout,din], got " + shape_str(weight.shape()));
    }
    const int B = x.dim(0), Din = x.dim(1);
    const int Dout = weight.dim(0);
    if (weight.dim(1) != Din) {
        throw ShapeError("linear: input feature dim " + std::to_string(Din) +
                         " does not match weight columns " + std::to_string(weight.dim(1)));
    }
    const bool has_bias = bias.defined();
    if (has_bias && (bias.ndim() != 1 || bias.dim(0) != Dout)) {
        throw ShapeError("linear: bias must be [dout=" + std::to_string(Dout) + "], got " +
                         shape_str(bias.shape()));
    }

    auto xi = x.impl();
    auto wi = weight.impl();
    auto bi = has_bias ? bias.impl() : nullptr;
    auto out = new_impl(Shape{B, Dout});
    out->values.resize(static_cast<std::size_t>(B) * Dout);
    for (int b = 0; b < B; ++b) {
        const real_t* xrow = xi->values.data() + static_cast<std::size_t>(b) * Din;
        real_t* orow = out->values.data() + static_cast<std::size_t>(b) * Dout;
        for (int oc = 0; oc < Dout; ++oc) {
            const real_t* wrow = wi->values.data() + static_cast<std::size_t>(oc) * Din;
            orow[oc] = (bi ? bi->values[static_cast<std::size_t>(oc)] : real_t(0)) +
                       dot8(xrow, wrow, Din);
        }
    }

    TensorImpl* o = out.get();
    std::vector<std::shared_ptr<TensorImpl>> parents{xi, wi};
    if (bi) parents.push_back(bi);
    record(out, std::move(parents), [xi, wi, bi, o, B, Din, Dout]() {
        for (int b = 0; b < B; ++b) {
            const real_t* grow = o->grad.data() + static_cast<std::size_t>(b) * Dout;
            const real_t* xrow = xi->values.data() + static_cast<std::size_t>(b) * Din;
            real_t* gxrow = xi->requires_grad ? xi->grad.data() + static_cast<std::size_t>(b) * Din : nullptr;
            for (int oc = 0; oc < Dout; ++oc) {
                const real_t g = grow[oc];
                const real_t* wrow = wi->values.data() + static_cast<std::size_t>(oc) * Din;
                if (gxrow) {
                    for (int i = 0; i < Din; ++i) gxrow[i] += g * wrow[i];
                }
                if (wi->requires_grad) {
                    real_t* gwrow = wi->grad.data() + static_cast<std::size_t>(oc) * Din;
                    for (int i = 0; i < Din; ++i) gwrow[i] += g * xrow[i];
                }
                if (bi && bi->requires_grad) bi->grad[static_cast<std::size_t>(oc)] += g;
            }
        }
    });
    return Tensor::wrap(out);
}

// --- pooling / stacking ---------------------------------------------------------

Tensor global_avg_pool(const Tensor& x) {
    require_defined(x, "global_avg_pool");
    if (x.ndim() != 3) {
        throw ShapeError("global_avg_pool: input must be [B,C,W], got " + shape_str(x.shape()));
    }
    const int B = x.dim(0), C = x.dim(1), W = x.dim(2);
    if (W < 1) throw ShapeError("global_avg_pool: width must be >= 1");
    auto xi = x.impl();
    auto out = new_impl(Shape{B, C});
    out->values.resize(static_cast<std::size_t>(B) * C);
    const real_t inv_w = real_t(1) / static_cast<real_t>(W);
    for (int b = 0; b < B; ++b) {
        for (int c = 0; c < C; ++c) {
            out->values[static_cast<std::size_t>(b) * C + c] =
                sum8(xi->values.data() + (static_cast<std::size_t>(b) * C + c) * W, W) * inv_w;
        }
    }
    TensorImpl* o = out.get();
    record(out, {xi}, [xi, o, B, C, W, inv_w]() {
        for (int b = 0; b < B; ++b) {
            for (int c = 0; c < C; ++c) {
                const real_t g = o->grad[static_cast<std::size_t>(b) * C + c] * inv_w;
                real_t* gx = xi->grad.data() + (static_cast<std::size_t>(b) * C + c) * W;
                for (int w = 0; w < W; ++w) gx[w] += g;
            }
        }
    });
    return Tensor::wrap(out);
}

Tensor concat_channels(const std::vector<Tensor>& xs) {
    if (xs.empty()) throw ShapeError("concat_channels: empty input list");
    for (const Tensor& t : xs) {
        require_defined(t, "concat_channels");
        if (t.ndim() != 3) {
            throw ShapeError("concat_channels: inputs must be [B,C,W], got " + shape_str(t.shape()));
        }
    }
    const int B = xs[0].dim(0), W = xs[0].dim(2);
    int Ctot = 0;
    for (const Tensor& t : xs) {
        if (t.dim(0) != B || t.dim(2) != W) {
            throw ShapeError("concat_channels: batch/width mismatch, expected [" + std::to_string(B) +
                             ",*," + std::to_string(W) + "], got " + shape_str(t.shape()));
        }
        Ctot += t.dim(1);
    }
    auto out = new_impl(Shape{B, Ctot, W});
    out->values.resize(static_cast<std::size_t>(B) * Ctot * W);
    std::vector<std::shared_ptr<TensorImpl>> impls;
    impls.reserve(xs.size());
    for (const Tensor& t : xs) impls.push_back(t.impl());

    int coff = 0;
    std::vector<int> offsets(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        offsets[i] = coff;
        const int Ci = xs[i].dim(1);
        for (int b = 0; b < B; ++b) {
            const real_t* src = impls[i]->values.data() + static_cast<std::size_t>(b) * Ci * W;
            real_t* dst = out->values.data() + (static_cast<std::size_t>(b) * Ctot + coff) * W;
            std::copy(src, src + static_cast<std::size_t>(Ci) * W, dst);
        }
        coff += Ci;
    }

    TensorImpl* o = out.get();
    record(out, {impls.begin(), impls.end()}, [impls, offsets, o, B, Ctot, W]() {
        for (std::size_t i = 0; i < impls.size(); ++i) {
            if (!impls[i]->requires_grad) continue;
            const int Ci = impls[i]->shape[1];
            for (int b = 0; b < B; ++b) {
                const real_t* src = o->grad.data() + (static_cast<std::size_t>(b) * Ctot + offsets[i]) * W;
                real_t* dst = impls[i]->grad.data() + static_cast<std::size_t>(b) * Ci * W;
                for (std::size_t j = 0; j < static_cast<std::size_t>(Ci) * W; ++j) dst[j] += src[j];
            }
        }
    });
    return Tensor::wrap(out);
}

Tensor scale_channels(const Tensor& x, const Tensor& s) {
    require_defined(x, "scale_channels");
    require_defined(s, "scale_channels");
    if (x.ndim() != 3) {
        throw ShapeError("scale_channels: input must be [B,C,W], got " + shape_str(x.shape()));
    }
    const int B = x.dim(0), C = x.dim(1), W = x.dim(2);
    if (s.ndim() != 2 || s.dim(0) != B || s.dim(1) != C) {
        throw ShapeError("scale_channels: scale must be [B=" + std::to_string(B) + ",C=" +
                         std::to_string(C) + "], got " + shape_str(s.shape()));
    }
    auto xi = x.impl(), si = s.impl();
    auto out = new_impl(xi->shape);
    out->values.resize(xi->values.size());
    for (int b = 0; b < B; ++b) {
        for (int c = 0; c < C; ++c) {
            const real_t f = si->values[static_cast<std::size_t>(b) * C + c];
            const real_t* row = xi->values.data() + (static_cast<std::size_t>(b) * C + c) * W;
            real_t* orow = out->values.data() + (static_cast<std::size_t>(b) * C + c) * W;
            for (int w = 0; w < W; ++w) orow[w] = row[w] * f;
        }
    }
    TensorImpl* o = out.get();
    record(out, {xi, si}, [xi, si, o, B, C, W]() {
        for (int b = 0; b < B; ++b) {
            for (int c = 0; c < C; ++c) {
                const std::size_t base = (static_cast<std::size_t>(b) * C + c) * W;
                const real_t f = si->values[static_cast<std::size_t>(b) * C + c];
                const real_t* grow = o->grad.data() + base;
                if (xi->requires_grad) {
                    real_t* gx = xi->grad.data() + base;
                    for (int w = 0; w < W; ++w) gx[w] += grow[w] * f;
                }
                if (si->requires_grad) {
                    si->grad[static_cast<std::size_t>(b) * C + c] +=
                        dot8(grow, xi->values.data() + base, W);
                }
            }
        }
    });
    return Tensor::wrap(out);
}

// --- loss ------------------------------------------------------------------------

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    require_defined(logits, "softmax_cross_entropy");
    if (logits.ndim() != 2) {
        throw ShapeError("softmax_cross_entropy: logits must be [B,c], got " + shape_str(logits.shape()));
    }
    const int B = logits.dim(0), C = logits.dim(1);
    if (static_cast<int>(labels.size()) != B) {
        throw ShapeError("softmax_cross_entropy: got " + std::to_string(labels.size()) +
                         " labels for batch " + std::to_string(B));
    }
    for (int b = 0; b < B; ++b) {
        if (labels[static_cast<std::size_t>(b)] < 0 || labels[static_cast<std::size_t>(b)] >= C) {
            throw DataError("softmax_cross_entropy: label " +
                            std::to_string(labels[static_cast<std::size_t>(b)]) + " at row " +
                            std::to_string(b) + " outside [0," + std::to_string(C) + ")");
        }
    }

    auto xi = logits.impl();
    std::vector<real_t> probs(static_cast<std::size_t>(B) * C);
    real_t loss = 0;
    for (int b = 0; b < B; ++b) {
        const real_t* row = xi->values.data() + static_cast<std::size_t>(b) * C;
        real_t m = row[0];
        for (int c = 1; c < C; ++c) m = std::max(m, row[c]);
        real_t z = 0;
        for (int c = 0; c < C; ++c) z += std::exp(row[c] - m);
        const real_t logz = std::log(z);
        loss += logz - (row[labels[static_cast<std::size_t>(b)]] - m);
        real_t* prow = probs.data() + static_cast<std::size_t>(b) * C;
        for (int c = 0; c < C; ++c) prow[c] = std::exp(row[c] - m) / z;
    }
    loss /= static_cast<real_t>(B);

    auto out = new_impl(Shape{});
    out->values = {loss};
    TensorImpl* o = out.get();
    record(out, {xi}, [xi, o, B, C, labels, probs = std::move(probs)]() {
        const real_t g = o->grad[0] / static_cast<real_t>(B);
        for (int b = 0; b < B; ++b) {
            const real_t* prow = probs.data() + static_cast<std::size_t>(b) * C;
            real_t* gx = xi->grad.data() + static_cast<std::size_t>(b) * C;
            const int lab = labels[static_cast<std::size_t>(b)];
            for (int c = 0; c < C; ++c) {
                gx[c] += g * (prow[c] - (c == lab ? real_t(1) : real_t(0)));
            }
        }
    });
    return Tensor::wrap(out);
}

}  // namespace adafsnet
