#pragma once

#include <cstdint>
#include <vector>

#include "adafsnet/nn.hpp"
#include "adafsnet/optim.hpp"
#include "adafsnet/tensor.hpp"

namespace adafsnet {

struct TargetDropConfig {
    real_t gamma = real_t(0.15);  // drop probability, in (0,1)
    int reduction_ratio = 16;
    int region_length = 0;  // 0 -> max(2, ceil(W/10))
};

int resolve_region_length(const TargetDropConfig& cfg, int width);

// Eq. 3: per-channel mean over the time axis (same math as global_avg_pool).
Tensor channel_significance(const Tensor& u);

// Eq. 4: sigmoid(W2 relu(W1 v)), bias-free bottleneck pair.
Tensor attention_map(const Tensor& v, const Tensor& w1, const Tensor& w2);

struct TargetVector {
    std::vector<std::uint8_t> selected;  // T_p = 1 iff M_p >= threshold
    int k = 0;                           // ceil(gamma * C)
    real_t threshold = 0;                // K-th largest attention value
};

// Eq. 5 with the literal tie rule: ties at the threshold may select > K.
TargetVector select_targets(const std::vector<real_t>& attention, real_t gamma);

struct DropRegion {
    int peak = 0;  // 1-indexed argmax, smallest index on ties
    int w1 = 0, w2 = 0;
};

// Eq. 6: region of length ~k centered on the channel peak, clamped to [1, W].
DropRegion drop_region(const real_t* channel, int width, int k);

// Eq. 7 applied with a binary mask [B,C,W]: masked points become zero and
// survivors are rescaled by numel/sum per channel (count*value then divide,
// keeping the arithmetic of the equation). A fully-masked channel yields
// zeros. Gradients flow to u only; the mask is a constant.
Tensor apply_mask(const Tensor& u, const Tensor& mask);

// Running per-channel mean attention across observed samples.
// Kahan-compensated so accumulation order barely matters.
struct AttentionStats {
    std::vector<double> sum, comp;
    std::int64_t count = 0;

    void resize(int channels) {
        sum.assign(static_cast<std::size_t>(channels), 0.0);
        comp.assign(static_cast<std::size_t>(channels), 0.0);
        count = 0;
    }
    void accumulate(const Tensor& attention);  // [B,C]
    std::vector<real_t> mean() const;
    void reset() {
        std::fill(sum.begin(), sum.end(), 0.0);
        std::fill(comp.begin(), comp.end(), 0.0);
        count = 0;
    }
};

// The full module: attention-targeted structured dropout plus channel
// recalibration. The recalibration multiply is what trains W1/W2; mask
// construction itself is constant w.r.t. the graph.
struct TargetDrop {
    TargetDropConfig cfg;
    LinearLayer squeeze;  // W1: [C/r, C], bias-free
    LinearLayer excite;   // W2: [C, C/r], bias-free
    AttentionStats stats;

    TargetDrop() = default;
    TargetDrop(int channels, const TargetDropConfig& config, Rng& rng);

    // Train: mask peaks of the top-ceil(gamma*C) channels per sample, rescale,
    // then multiply every channel by its attention. Eval: recalibration only.
    Tensor forward(const Tensor& u, Mode mode, bool collect_stats);

    void collect(std::vector<Parameter*>& out) {
        squeeze.collect(out);
        excite.collect(out);
    }
};

}  // namespace adafsnet
