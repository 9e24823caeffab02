#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adafsnet/nn.hpp"
#include "adafsnet/planner.hpp"
#include "adafsnet/targetdrop.hpp"
#include "adafsnet/tensor.hpp"

namespace adafsnet {

struct ModelConfig {
    int filters_per_path = 4;          // F
    int growth_rate = 16;              // g
    int dense_block_count = 2;         // 0, 1 or 2
    bool enable_targetdrop = true;
    int preserved_kernel_count = 4;    // m: distinct sizes kept at respecialization
    int num_classes = 2;
    TargetDropConfig targetdrop;
    real_t bn_momentum = real_t(0.1);
    real_t bn_epsilon = real_t(1e-5);

    static constexpr int kDenseLayersPerBlock = 8;
};

// Maps a contiguous group of layer-3 output channels back to its kernel path.
struct PathInfo {
    int k1 = 0, k2 = 0, k3 = 0;
    int rf = 0;
    int channel_begin = 0, channel_end = 0;  // [begin, end)
};

// One isolated three-conv stack per (k1,k2,k3) path; outputs are concatenated.
struct PathStack {
    int k1 = 0, k2 = 0, k3 = 0;
    ConvUnit u1, u2, u3;
};

struct DenseLayer {
    int kernel = 0;
    ConvUnit unit;  // concat(previous) -> growth_rate channels
};

// Eight conv layers with dense connectivity: layer j consumes the block input
// concatenated with outputs 1..j-1 and emits growth_rate new channels.
struct DenseBlock {
    int in_channels = 0;
    int growth = 0;
    std::vector<DenseLayer> layers;

    DenseBlock() = default;
    DenseBlock(int cin, int growth_rate, const std::vector<int>& kernels, Rng& rng,
               real_t bn_momentum, real_t bn_epsilon);

    int out_channels() const { return in_channels + static_cast<int>(layers.size()) * growth; }
    Tensor forward(const Tensor& x, Mode bn_mode);
    void collect(std::vector<Parameter*>& out);
};

// Intermediate activations, exposed for structural tests and audits.
struct ForwardTrace {
    Tensor os_out;     // concatenated OS-Block output
    Tensor td_out;     // after TargetDrop (or identical to os_out when disabled)
    Tensor db1_out;    // first dense block output
    Tensor db2_in;     // after the residual add (input of block 2 / the head)
    Tensor pooled;     // after GAP
    std::vector<Tensor> path_outputs;  // per-path layer-3 activations
};

struct NamedArray {
    std::string name;
    Shape shape;
    std::vector<real_t>* data = nullptr;
};

class AdaFSNet {
public:
    AdaFSNet(const KernelPlan& plan, const ModelConfig& cfg, int input_dim, Rng& rng);

    Tensor forward(const Tensor& x, Mode mode, ForwardTrace* trace = nullptr);
    // Test hook: drive batch-norm in a different mode than the rest.
    Tensor forward_ex(const Tensor& x, Mode mode, Mode bn_mode, ForwardTrace* trace = nullptr);

    std::vector<Parameter*> parameters();
    std::int64_t parameter_count();
    std::vector<NamedArray> named_arrays();  // parameters + BN running stats, declaration order

    const KernelPlan& plan() const { return plan_; }
    const ModelConfig& config() const { return cfg_; }
    int input_dim() const { return input_dim_; }
    int os_channels() const { return os_channels_; }
    int head_in_channels() const;
    const std::vector<PathInfo>& attribution() const { return attribution_; }
    const std::vector<int>& dense_kernels() const { return dense_kernels_; }
    bool respecialized() const { return respecialized_; }

    TargetDrop& targetdrop() { return td_; }
    AttentionStats& attention_stats() { return td_.stats; }

    // Rebuilds both dense blocks with the preserved kernel sizes assigned
    // round-robin; their parameters are freshly initialized, everything else
    // is retained.
    void respecialize_dense_blocks(const std::vector<int>& preserved, Rng& rng);

    // Internals used by checkpoint loading and structural tests.
    std::vector<PathStack>& paths() { return paths_; }
    std::vector<DenseBlock>& dense_blocks() { return blocks_; }
    Conv1d& residual_projection() { return residual_; }
    LinearLayer& head() { return head_; }
    void set_respecialized(const std::vector<int>& kernels, Rng& rng) {
        respecialize_dense_blocks(kernels, rng);
    }

private:
    void build_dense(const std::vector<int>& kernels, Rng& rng);

    KernelPlan plan_;
    ModelConfig cfg_;
    int input_dim_ = 1;
    int os_channels_ = 0;
    std::vector<PathStack> paths_;
    std::vector<PathInfo> attribution_;
    TargetDrop td_;
    Conv1d residual_;  // kernel-1 projection, built when dense blocks exist
    std::vector<DenseBlock> blocks_;
    LinearLayer head_;
    std::vector<int> dense_kernels_;
    bool respecialized_ = false;
};

// Ranks paths by the mean attention of their channels and returns the top-m
// distinct first-layer kernel sizes (ties favor the larger kernel).
std::vector<int> preserved_kernel_sizes(const std::vector<PathInfo>& attribution,
                                        const std::vector<real_t>& mean_attention, int m);

// Round-robin assignment of the per-block dense kernel sizes.
std::vector<int> dense_kernel_schedule(const std::vector<int>& sizes, int layers);

}  // namespace adafsnet
