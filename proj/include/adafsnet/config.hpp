#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "adafsnet/model.hpp"
#include "adafsnet/train.hpp"

namespace adafsnet {

// Every tunable the CLI accepts, with its documented default. Values come
// from an optional key=value config file, then repeatable --set overrides.
struct Options {
    // planner
    int rf_cap = 48;
    bool p3_literal = false;
    // model
    int filters_per_path = 4;
    int growth_rate = 16;
    int dense_block_count = 2;
    bool enable_targetdrop = true;
    int preserved_kernels = 4;
    double gamma = 0.15;
    int reduction_ratio = 16;
    std::string drop_region = "auto";  // "auto" -> max(2, ceil(W/10)), or an integer
    double bn_momentum = 0.1;
    double bn_epsilon = 1e-5;
    // training
    double lr = 0.001;
    int batch_size = 16;
    int max_epochs = 1500;
    int warmup_epochs = 20;
    int early_stop_patience = 0;
    bool best_checkpoint = false;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::uint64_t seed = 0;
    // data
    bool normalize = true;
    bool interpolate_missing = false;
    int eval_batch = 64;
    int log_every = 0;
};

// Parses `key = value` lines ('#' comments, blank lines allowed), then applies
// overrides of the same syntax. Unknown keys raise a UsageError listing the
// valid ones.
Options load_options(const std::optional<std::filesystem::path>& config_file,
                     const std::vector<std::string>& overrides);

// One "key=value" line per option in a fixed order; the config fingerprint is
// the FNV-1a hash of this text.
std::string canonical_options(const Options& opts);
std::string options_fingerprint(const Options& opts);

// Multi-line listing of keys and defaults for --help.
std::string describe_options();

ModelConfig to_model_config(const Options& opts, int num_classes);
TrainConfig to_train_config(const Options& opts);
LoadOptions to_load_options(const Options& opts);
PlannerOptions to_planner_options(const Options& opts);

}  // namespace adafsnet
