#include "adafsnet/model.hpp"

#include <algorithm>
#include <numeric>

#include "adafsnet/error.hpp"

namespace adafsnet {

DenseBlock::DenseBlock(int cin, int growth_rate, const std::vector<int>& kernels, Rng& rng,
                       real_t bn_momentum, real_t bn_epsilon)
    : in_channels(cin), growth(growth_rate) {
    layers.reserve(kernels.size());
    int channels = cin;
    for (int k : kernels) {
        DenseLayer layer;
        layer.kernel = k;
        layer.unit = ConvUnit(channels, growth_rate, k, rng, bn_momentum, bn_epsilon);
        layers.push_back(std::move(layer));
        channels += growth_rate;
    }
}

Tensor DenseBlock::forward(const Tensor& x, Mode bn_mode) {
    std::vector<Tensor> features{x};
    Tensor current = x;
    for (DenseLayer& layer : layers) {
        Tensor out = layer.unit.forward(current, bn_mode);
        features.push_back(out);
        current = concat_channels(features);
    }
    return current;
}

void DenseBlock::collect(std::vector<Parameter*>& out) {
    for (DenseLayer& layer : layers) layer.unit.collect(out);
}

std::vector<int> dense_kernel_schedule(const std::vector<int>& sizes, int layers) {
    if (sizes.empty()) throw UsageError("dense_kernel_schedule: empty kernel list");
    std::vector<int> schedule(static_cast<std::size_t>(layers));
    for (int i = 0; i < layers; ++i) {
        schedule[static_cast<std::size_t>(i)] = sizes[static_cast<std::size_t>(i) % sizes.size()];
    }
    return schedule;
}

AdaFSNet::AdaFSNet(const KernelPlan& plan, const ModelConfig& cfg, int input_dim, Rng& rng)
    : plan_(plan), cfg_(cfg), input_dim_(input_dim) {
    if (cfg.filters_per_path < 1) throw UsageError("model: filters_per_path must be >= 1");
    if (cfg.growth_rate < 1) throw UsageError("model: growth_rate must be >= 1");
    if (cfg.dense_block_count < 0 || cfg.dense_block_count > 2) {
        throw UsageError("model: dense_block_count must be 0, 1 or 2");
    }
    if (cfg.num_classes < 1) throw UsageError("model: num_classes must be >= 1");
    if (plan.paths.empty()) throw UsageError("model: kernel plan has no paths");
    if (input_dim < 1) throw UsageError("model: input dimension must be >= 1");

    const int F = cfg.filters_per_path;
    paths_.reserve(plan.paths.size());
    attribution_.reserve(plan.paths.size());
    int channel = 0;
    for (const auto& p : plan.paths) {
        PathStack stack;
        stack.k1 = p[0];
        stack.k2 = p[1];
        stack.k3 = p[2];
        stack.u1 = ConvUnit(input_dim, F, p[0], rng, cfg.bn_momentum, cfg.bn_epsilon);
        stack.u2 = ConvUnit(F, F, p[1], rng, cfg.bn_momentum, cfg.bn_epsilon);
        stack.u3 = ConvUnit(F, F, p[2], rng, cfg.bn_momentum, cfg.bn_epsilon);
        paths_.push_back(std::move(stack));

        PathInfo info;
        info.k1 = p[0];
        info.k2 = p[1];
        info.k3 = p[2];
        info.rf = receptive_field({p[0], p[1], p[2]});
        info.channel_begin = channel;
        info.channel_end = channel + F;
        channel += F;
        attribution_.push_back(info);
    }
    os_channels_ = channel;

    if (cfg.enable_targetdrop) {
        td_ = TargetDrop(os_channels_, cfg.targetdrop, rng);
    }

    if (cfg.dense_block_count >= 1) {
        const int db1_out = os_channels_ + ModelConfig::kDenseLayersPerBlock * cfg.growth_rate;
        residual_ = Conv1d(os_channels_, db1_out, 1, rng);
    }

    build_dense(dense_kernel_schedule(plan_.p1, ModelConfig::kDenseLayersPerBlock), rng);

    head_ = LinearLayer(head_in_channels(), cfg.num_classes, rng);
}

void AdaFSNet::build_dense(const std::vector<int>& kernels, Rng& rng) {
    dense_kernels_ = kernels;
    blocks_.clear();
    int cin = os_channels_;
    for (int i = 0; i < cfg_.dense_block_count; ++i) {
        blocks_.emplace_back(cin, cfg_.growth_rate, kernels, rng, cfg_.bn_momentum, cfg_.bn_epsilon);
        cin = blocks_.back().out_channels();
    }
}

int AdaFSNet::head_in_channels() const {
    return os_channels_ +
           cfg_.dense_block_count * ModelConfig::kDenseLayersPerBlock * cfg_.growth_rate;
}

Tensor AdaFSNet::forward(const Tensor& x, Mode mode, ForwardTrace* trace) {
    return forward_ex(x, mode, mode, trace);
}

Tensor AdaFSNet::forward_ex(const Tensor& x, Mode mode, Mode bn_mode, ForwardTrace* trace) {
    if (x.ndim() != 3) throw ShapeError("forward: input must be [B,D,W], got rank " +
                                        std::to_string(x.ndim()));
    if (x.dim(1) != input_dim_) {
        throw ShapeError("forward: input dimension " + std::to_string(x.dim(1)) +
                         " does not match model dimension " + std::to_string(input_dim_));
    }

    std::vector<Tensor> outs;
    outs.reserve(paths_.size());
    for (PathStack& path : paths_) {
        Tensor h = path.u1.forward(x, bn_mode);
        h = path.u2.forward(h, bn_mode);
        h = path.u3.forward(h, bn_mode);
        outs.push_back(h);
    }
    Tensor os_out = concat_channels(outs);
    if (trace) {
        trace->os_out = os_out;
        trace->path_outputs = outs;
    }

    Tensor h = cfg_.enable_targetdrop ? td_.forward(os_out, mode, mode == Mode::kTrain) : os_out;
    if (trace) trace->td_out = h;

    if (cfg_.dense_block_count >= 1) {
        Tensor db1 = blocks_[0].forward(h, bn_mode);
        if (trace) trace->db1_out = db1;
        h = add(db1, residual_.forward(os_out));
        if (trace) trace->db2_in = h;
        if (cfg_.dense_block_count >= 2) h = blocks_[1].forward(h, bn_mode);
    }

    Tensor pooled = global_avg_pool(h);
    if (trace) trace->pooled = pooled;
    return head_.forward(pooled);
}

std::vector<Parameter*> AdaFSNet::parameters() {
    std::vector<Parameter*> out;
    for (PathStack& path : paths_) {
        path.u1.collect(out);
        path.u2.collect(out);
        path.u3.collect(out);
    }
    if (cfg_.enable_targetdrop) td_.collect(out);
    if (cfg_.dense_block_count >= 1) residual_.collect(out);
    for (DenseBlock& block : blocks_) block.collect(out);
    head_.collect(out);
    return out;
}

std::int64_t AdaFSNet::parameter_count() {
    std::int64_t n = 0;
    for (Parameter* p : parameters()) n += p->value.numel();
    return n;
}

namespace {

void push_conv(std::vector<NamedArray>& out, const std::string& prefix, Conv1d& conv) {
    out.push_back({prefix + ".weight", conv.weight.value.shape(), &conv.weight.value.values()});
    out.push_back({prefix + ".bias", conv.bias.value.shape(), &conv.bias.value.values()});
}

void push_bn(std::vector<NamedArray>& out, const std::string& prefix, BatchNorm1d& bn) {
    out.push_back({prefix + ".scale", bn.scale.value.shape(), &bn.scale.value.values()});
    out.push_back({prefix + ".shift", bn.shift.value.shape(), &bn.shift.value.values()});
    out.push_back({prefix + ".running_mean", Shape{bn.channels}, &bn.running_mean});
    out.push_back({prefix + ".running_var", Shape{bn.channels}, &bn.running_var});
}

void push_unit(std::vector<NamedArray>& out, const std::string& prefix, ConvUnit& unit) {
    push_conv(out, prefix + ".conv", unit.conv);
    push_bn(out, prefix + ".bn", unit.bn);
}

}  // namespace

std::vector<NamedArray> AdaFSNet::named_arrays() {
    std::vector<NamedArray> out;
    for (std::size_t i = 0; i < paths_.size(); ++i) {
        const std::string prefix = "os.path" + std::to_string(i);
        push_unit(out, prefix + ".l1", paths_[i].u1);
        push_unit(out, prefix + ".l2", paths_[i].u2);
        push_unit(out, prefix + ".l3", paths_[i].u3);
    }
    if (cfg_.enable_targetdrop) {
        out.push_back({"td.w1", td_.squeeze.weight.value.shape(), &td_.squeeze.weight.value.values()});
        out.push_back({"td.w2", td_.excite.weight.value.shape(), &td_.excite.weight.value.values()});
    }
    if (cfg_.dense_block_count >= 1) push_conv(out, "residual", residual_);
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        for (std::size_t l = 0; l < blocks_[b].layers.size(); ++l) {
            push_unit(out, "dense" + std::to_string(b + 1) + ".layer" + std::to_string(l),
                      blocks_[b].layers[l].unit);
        }
    }
    out.push_back({"head.weight", head_.weight.value.shape(), &head_.weight.value.values()});
    out.push_back({"head.bias", head_.bias.value.shape(), &head_.bias.value.values()});
    return out;
}

void AdaFSNet::respecialize_dense_blocks(const std::vector<int>& preserved, Rng& rng) {
    if (cfg_.dense_block_count == 0) return;
    build_dense(dense_kernel_schedule(preserved, ModelConfig::kDenseLayersPerBlock), rng);
    respecialized_ = true;
}

std::vector<int> preserved_kernel_sizes(const std::vector<PathInfo>& attribution,
                                        const std::vector<real_t>& mean_attention, int m) {
    if (attribution.empty()) throw UsageError("preserved_kernel_sizes: empty attribution");
    if (m < 1) throw UsageError("preserved_kernel_sizes: m must be >= 1");

    struct Ranked {
        double score;
        int k1, k2, k3;
    };
    std::vector<Ranked> ranked;
    ranked.reserve(attribution.size());
    for (const PathInfo& info : attribution) {
        if (info.channel_end > static_cast<int>(mean_attention.size()) ||
            info.channel_begin >= info.channel_end) {
            throw ShapeError("preserved_kernel_sizes: attribution exceeds attention length");
        }
        double score = 0;
        for (int c = info.channel_begin; c < info.channel_end; ++c) {
            score += static_cast<double>(mean_attention[static_cast<std::size_t>(c)]);
        }
        score /= static_cast<double>(info.channel_end - info.channel_begin);
        ranked.push_back({score, info.k1, info.k2, info.k3});
    }
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.k1 != b.k1) return a.k1 > b.k1;  // ties: larger kernel first
        if (a.k2 != b.k2) return a.k2 > b.k2;
        return a.k3 > b.k3;
    });

    std::vector<int> preserved;
    for (const Ranked& r : ranked) {
        if (std::find(preserved.begin(), preserved.end(), r.k1) == preserved.end()) {
            preserved.push_back(r.k1);
            if (static_cast<int>(preserved.size()) == m) break;
        }
    }
    return preserved;
}

}  // namespace adafsnet
