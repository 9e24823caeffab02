#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <vector>

namespace adafsnet {

#ifdef ADAFSNET_SINGLE_PRECISION
using real_t = float;
#else
using real_t = double;
#endif

using Shape = std::vector<int>;

enum class Mode { kTrain, kEval };

namespace detail {

// One node of the recorded computation. Operations append nodes in execution
// order (monotone `seq`); backward() replays reachable nodes in reverse.
struct TensorImpl {
    Shape shape;
    std::vector<real_t> values;
    std::vector<real_t> grad;  // allocated iff requires_grad
    bool requires_grad = false;
    std::uint64_t seq = 0;
    std::vector<std::shared_ptr<TensorImpl>> parents;
    std::function<void()> backprop;  // accumulates into parents' grads

    std::int64_t numel() const {
        std::int64_t n = 1;
        for (int e : shape) n *= e;
        return n;
    }
};

bool grad_enabled() noexcept;
std::uint64_t next_seq() noexcept;

}  // namespace detail

// Disables graph recording on this thread while alive (used for eval passes
// and finite-difference probes).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, real_t value, bool requires_grad = false);
    static Tensor from_values(Shape shape, std::vector<real_t> values, bool requires_grad = false);
    static Tensor scalar(real_t value, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    int ndim() const;
    int dim(int i) const;
    std::int64_t numel() const;

    std::vector<real_t>& values();
    const std::vector<real_t>& values() const;
    std::vector<real_t>& grad();
    const std::vector<real_t>& grad() const;
    bool requires_grad() const;
    void set_requires_grad(bool on);
    void zero_grad();
    real_t item() const;  // scalar tensors only

    std::shared_ptr<detail::TensorImpl> impl() const { return impl_; }
    static Tensor wrap(std::shared_ptr<detail::TensorImpl> impl);

private:
    std::shared_ptr<detail::TensorImpl> impl_;
};

// --- operations -----------------------------------------------------------

// "Same" padding convolution over [B, Cin, W] with weight [Cout, Cin/groups, k]
// and bias [Cout]. Pads floor((k-1)/2) left and ceil((k-1)/2) right, so the
// output width always equals the input width (k=2 pads the right side only).
Tensor conv1d_same(const Tensor& input, const Tensor& weight, const Tensor& bias, int groups = 1);

// Per-channel batch normalization over [B, C, W]. Train mode normalizes with
// batch statistics (population variance) and updates the running stats by
// exponential moving average; eval mode uses the running stats only.
Tensor batchnorm1d(const Tensor& x, const Tensor& scale, const Tensor& shift,
                   std::vector<real_t>& running_mean, std::vector<real_t>& running_var,
                   Mode mode, real_t momentum = real_t(0.1), real_t epsilon = real_t(1e-5));

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// x [B, din] -> [B, dout]; bias may be an undefined Tensor for bias-free maps.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// [B, C, W] -> [B, C]
Tensor global_avg_pool(const Tensor& x);

Tensor concat_channels(const std::vector<Tensor>& xs);
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

// y[b,c,w] = x[b,c,w] * s[b,c]
Tensor scale_channels(const Tensor& x, const Tensor& s);

Tensor sum(const Tensor& x);  // -> scalar

// Mean over the batch of -log softmax(logits)[label], max-stabilized.
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// Reverse accumulation from a scalar loss into every reachable grad slot.
void backward(const Tensor& loss);

// --- deterministic RNG ----------------------------------------------------

// mt19937_64 with hand-rolled uniform/shuffle so streams are identical across
// standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform(double lo, double hi) {
        const double u = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
        return lo + u * (hi - lo);
    }

    std::uint64_t next() { return gen_(); }

    // Unbiased integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t rem = std::numeric_limits<std::uint64_t>::max() % n;
        const std::uint64_t bound = std::numeric_limits<std::uint64_t>::max() - rem;
        std::uint64_t x = gen_();
        while (x > bound) x = gen_();
        return x % n;
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace adafsnet
