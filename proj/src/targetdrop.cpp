#include "adafsnet/targetdrop.hpp"

#include <algorithm>
#include <cmath>

#include "adafsnet/error.hpp"

namespace adafsnet {

int resolve_region_length(const TargetDropConfig& cfg, int width) {
    if (cfg.region_length > 0) return cfg.region_length;
    return std::max(2, (width + 9) / 10);
}

Tensor channel_significance(const Tensor& u) { return global_avg_pool(u); }

Tensor attention_map(const Tensor& v, const Tensor& w1, const Tensor& w2) {
    return sigmoid(linear(relu(linear(v, w1, Tensor())), w2, Tensor()));
}

TargetVector select_targets(const std::vector<real_t>& attention, real_t gamma) {
    if (attention.empty()) throw ShapeError("select_targets: empty attention vector");
    const int c = static_cast<int>(attention.size());
    TargetVector tv;
    tv.k = static_cast<int>(std::ceil(static_cast<double>(gamma) * c));
    tv.k = std::max(1, std::min(tv.k, c));
    std::vector<real_t> sorted(attention);
    std::sort(sorted.begin(), sorted.end(), std::greater<real_t>());
    tv.threshold = sorted[static_cast<std::size_t>(tv.k - 1)];
    tv.selected.resize(attention.size());
    for (std::size_t i = 0; i < attention.size(); ++i) {
        tv.selected[i] = attention[i] >= tv.threshold ? 1 : 0;
    }
    return tv;
}

DropRegion drop_region(const real_t* channel, int width, int k) {
    if (width < 1) throw ShapeError("drop_region: width must be >= 1");
    if (k < 1) throw ShapeError("drop_region: region length must be >= 1");
    int arg = 0;
    for (int i = 1; i < width; ++i) {
        if (channel[i] > channel[arg]) arg = i;
    }
    DropRegion region;
    region.peak = arg + 1;  // 1-indexed
    const int half = k / 2;
    region.w1 = std::max(region.peak - half, 1);
    region.w2 = std::min(region.peak + half, width);
    return region;
}

Tensor apply_mask(const Tensor& u, const Tensor& mask) {
    if (!u.defined() || !mask.defined()) throw ShapeError("apply_mask: undefined tensor");
    if (u.shape() != mask.shape() || u.ndim() != 3) {
        throw ShapeError("apply_mask: tensor/mask shapes must both be [B,C,W]");
    }
    const int B = u.dim(0), C = u.dim(1), W = u.dim(2);
    // Fold Eq. 7 into one factor tensor: s * numel / sum per channel, with the
    // multiply-then-divide order preserved per element so exact cases stay
    // exact. Guard: a fully masked channel goes to zero.
    Tensor out = Tensor::zeros(u.shape());
    std::vector<real_t> factors(static_cast<std::size_t>(B) * C, real_t(0));
    const auto& mv = mask.values();
    for (int b = 0; b < B; ++b) {
        for (int c = 0; c < C; ++c) {
            const real_t* mrow = mv.data() + (static_cast<std::size_t>(b) * C + c) * W;
            int keep = 0;
            for (int w = 0; w < W; ++w) keep += mrow[w] != real_t(0) ? 1 : 0;
            factors[static_cast<std::size_t>(b) * C + c] = keep > 0 ? static_cast<real_t>(keep) : real_t(0);
        }
    }

    auto ui = u.impl();
    auto oi = out.impl();
    const auto& uv = ui->values;
    auto& ov = oi->values;
    for (int b = 0; b < B; ++b) {
        for (int c = 0; c < C; ++c) {
            const std::size_t base = (static_cast<std::size_t>(b) * C + c) * W;
            const real_t keep = factors[static_cast<std::size_t>(b) * C + c];
            const real_t* mrow = mv.data() + base;
            if (keep == real_t(0)) continue;  // all-masked channel stays zero
            if (keep == static_cast<real_t>(W)) {
                // untouched channel: numel/sum is exactly 1
                std::copy(uv.begin() + static_cast<std::ptrdiff_t>(base),
                          uv.begin() + static_cast<std::ptrdiff_t>(base + W),
                          ov.begin() + static_cast<std::ptrdiff_t>(base));
                continue;
            }
            for (int w = 0; w < W; ++w) {
                ov[base + static_cast<std::size_t>(w)] =
                    (uv[base + static_cast<std::size_t>(w)] * mrow[w] * static_cast<real_t>(W)) / keep;
            }
        }
    }

    if (detail::grad_enabled() && ui->requires_grad) {
        detail::TensorImpl* o = oi.get();
        auto mi = mask.impl();
        o->requires_grad = true;
        o->grad.assign(ov.size(), real_t(0));
        o->parents = {ui};
        o->backprop = [ui, mi, o, B, C, W, factors = std::move(factors)]() {
            const auto& mv = mi->values;
            for (int b = 0; b < B; ++b) {
                for (int c = 0; c < C; ++c) {
                    const std::size_t base = (static_cast<std::size_t>(b) * C + c) * W;
                    const real_t keep = factors[static_cast<std::size_t>(b) * C + c];
                    if (keep == real_t(0)) continue;
                    if (keep == static_cast<real_t>(W)) {
                        for (int w = 0; w < W; ++w) {
                            ui->grad[base + static_cast<std::size_t>(w)] +=
                                o->grad[base + static_cast<std::size_t>(w)];
                        }
                        continue;
                    }
                    const real_t* mrow = mv.data() + base;
                    for (int w = 0; w < W; ++w) {
                        ui->grad[base + static_cast<std::size_t>(w)] +=
                            (o->grad[base + static_cast<std::size_t>(w)] * mrow[w] *
                             static_cast<real_t>(W)) /
                            keep;
                    }
                }
            }
        };
    }
    return out;
}

void AttentionStats::accumulate(const Tensor& attention) {
    if (attention.ndim() != 2 || attention.dim(1) != static_cast<int>(sum.size())) {
        throw ShapeError("AttentionStats: attention shape does not match channel count");
    }
    const int B = attention.dim(0), C = attention.dim(1);
    const auto& v = attention.values();
    for (int b = 0; b < B; ++b) {
        for (int c = 0; c < C; ++c) {
            const double x = static_cast<double>(v[static_cast<std::size_t>(b) * C + c]);
            const std::size_t i = static_cast<std::size_t>(c);
            const double y = x - comp[i];
            const double t = sum[i] + y;
            comp[i] = (t - sum[i]) - y;
            sum[i] = t;
        }
    }
    count += B;
}

std::vector<real_t> AttentionStats::mean() const {
    if (count == 0) throw NumericError("AttentionStats: no batches observed");
    std::vector<real_t> m(sum.size());
    for (std::size_t i = 0; i < sum.size(); ++i) {
        m[i] = static_cast<real_t>(sum[i] / static_cast<double>(count));
    }
    return m;
}

TargetDrop::TargetDrop(int channels, const TargetDropConfig& config, Rng& rng) : cfg(config) {
    if (!(cfg.gamma > real_t(0) && cfg.gamma < real_t(1))) {
        throw UsageError("TargetDrop: gamma must lie in (0,1)");
    }
    if (cfg.reduction_ratio < 1) throw UsageError("TargetDrop: reduction ratio must be >= 1");
    const int bottleneck = std::max(1, channels / cfg.reduction_ratio);
    squeeze = LinearLayer(channels, bottleneck, rng, /*with_bias=*/false);
    excite = LinearLayer(bottleneck, channels, rng, /*with_bias=*/false);
    stats.resize(channels);
}

Tensor TargetDrop::forward(const Tensor& u, Mode mode, bool collect_stats) {
    const int B = u.dim(0), C = u.dim(1), W = u.dim(2);
    Tensor v = channel_significance(u);
    Tensor m = attention_map(v, squeeze.weight.value, excite.weight.value);
    if (collect_stats) stats.accumulate(m);
    if (mode == Mode::kEval) return scale_channels(u, m);

    const int k = resolve_region_length(cfg, W);
    Tensor mask = Tensor::full({B, C, W}, real_t(1));
    const auto& uv = u.values();
    const auto& mv = m.values();
    auto& maskv = mask.values();
    std::vector<real_t> row(static_cast<std::size_t>(C));
    for (int b = 0; b < B; ++b) {
        for (int c = 0; c < C; ++c) row[static_cast<std::size_t>(c)] = mv[static_cast<std::size_t>(b) * C + c];
        const TargetVector targets = select_targets(row, cfg.gamma);
        for (int c = 0; c < C; ++c) {
            if (!targets.selected[static_cast<std::size_t>(c)]) continue;
            const std::size_t base = (static_cast<std::size_t>(b) * C + c) * W;
            const DropRegion region = drop_region(uv.data() + base, W, k);
            for (int w = region.w1; w <= region.w2; ++w) {
                maskv[base + static_cast<std::size_t>(w - 1)] = real_t(0);
            }
        }
    }
    return scale_channels(apply_mask(u, mask), m);
}

}  // namespace adafsnet
