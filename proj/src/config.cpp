#include "adafsnet/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "adafsnet/error.hpp"

namespace adafsnet {

namespace {

struct Key {
    std::string name;
    std::string default_value;
    std::string help;
    std::function<void(Options&, const std::string&)> apply;
    std::function<std::string(const Options&)> render;
};

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw UsageError("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

int parse_int(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const int x = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw UsageError("config: key '" + key + "' expects an integer, got '" + v + "'");
    }
}

double parse_double(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw UsageError("config: key '" + key + "' expects a number, got '" + v + "'");
    }
}

std::string render_double(double v) {
    std::ostringstream out;
    out << v;
    return out.str();
}

const std::vector<Key>& registry() {
    auto int_key = [](std::string name, int Options::*field, std::string help) {
        Options defaults;
        return Key{name, std::to_string(defaults.*field), std::move(help),
                   [field, name](Options& o, const std::string& v) { o.*field = parse_int(v, name); },
                   [field](const Options& o) { return std::to_string(o.*field); }};
    };
    auto double_key = [](std::string name, double Options::*field, std::string help) {
        Options defaults;
        return Key{name, render_double(defaults.*field), std::move(help),
                   [field, name](Options& o, const std::string& v) { o.*field = parse_double(v, name); },
                   [field](const Options& o) { return render_double(o.*field); }};
    };
    auto bool_key = [](std::string name, bool Options::*field, std::string help) {
        Options defaults;
        return Key{name, defaults.*field ? "true" : "false", std::move(help),
                   [field, name](Options& o, const std::string& v) { o.*field = parse_bool(v, name); },
                   [field](const Options& o) { return o.*field ? "true" : "false"; }};
    };

    static const std::vector<Key> keys = {
        int_key("rf_cap", &Options::rf_cap, "receptive-field coverage target cap"),
        bool_key("p3_literal", &Options::p3_literal,
                 "layer-3 kernel set {2} instead of {1,2} (breaks odd coverage)"),
        int_key("filters_per_path", &Options::filters_per_path, "conv filters per kernel path"),
        int_key("growth_rate", &Options::growth_rate, "dense block growth rate"),
        int_key("dense_block_count", &Options::dense_block_count, "number of dense blocks (0-2)"),
        bool_key("enable_targetdrop", &Options::enable_targetdrop, "attention dropout module"),
        int_key("preserved_kernels", &Options::preserved_kernels,
                "distinct kernel sizes kept at respecialization"),
        double_key("gamma", &Options::gamma, "drop probability in (0,1)"),
        int_key("reduction_ratio", &Options::reduction_ratio, "attention bottleneck ratio"),
        Key{"drop_region", "auto", "drop region length: auto = max(2, ceil(W/10))",
            [](Options& o, const std::string& v) {
                if (v != "auto") parse_int(v, "drop_region");
                o.drop_region = v;
            },
            [](const Options& o) { return o.drop_region; }},
        double_key("bn_momentum", &Options::bn_momentum, "batch-norm running stat momentum"),
        double_key("bn_epsilon", &Options::bn_epsilon, "batch-norm variance epsilon"),
        double_key("lr", &Options::lr, "Adam learning rate"),
        int_key("batch_size", &Options::batch_size, "minibatch size"),
        int_key("max_epochs", &Options::max_epochs, "training epoch budget"),
        int_key("warmup_epochs", &Options::warmup_epochs,
                "epochs before dense blocks respecialize"),
        int_key("early_stop_patience", &Options::early_stop_patience,
                "stop after this many epochs without train-loss improvement (0 = off)"),
        bool_key("best_checkpoint", &Options::best_checkpoint,
                 "restore the best-train-loss parameters at the end"),
        double_key("adam_beta1", &Options::adam_beta1, "Adam beta1"),
        double_key("adam_beta2", &Options::adam_beta2, "Adam beta2"),
        double_key("adam_epsilon", &Options::adam_epsilon, "Adam epsilon"),
        Key{"seed", "0", "RNG seed",
            [](Options& o, const std::string& v) {
                try {
                    o.seed = std::stoull(v);
                } catch (const std::exception&) {
                    throw UsageError("config: key 'seed' expects an integer, got '" + v + "'");
                }
            },
            [](const Options& o) { return std::to_string(o.seed); }},
        bool_key("normalize", &Options::normalize, "z-normalize each series per dimension"),
        bool_key("interpolate_missing", &Options::interpolate_missing,
                 "linear in-fill for NaN values instead of erroring"),
        int_key("eval_batch", &Options::eval_batch, "evaluation batch size"),
        int_key("log_every", &Options::log_every, "print loss every N epochs (0 = quiet)"),
    };
    return keys;
}

const Key* find_key(const std::string& name) {
    for (const Key& k : registry()) {
        if (k.name == name) return &k;
    }
    return nullptr;
}

void apply_line(Options& opts, const std::string& raw, const std::string& where) {
    std::string line = raw;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) return;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
        throw UsageError("config: expected key=value in " + where + ", got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const Key* k = find_key(key);
    if (!k) {
        std::string valid;
        for (const Key& cand : registry()) {
            if (!valid.empty()) valid += ", ";
            valid += cand.name;
        }
        throw UsageError("config: unknown key '" + key + "' in " + where + "; valid keys: " + valid);
    }
    k->apply(opts, value);
}

void validate(const Options& opts) {
    if (opts.rf_cap < 1) throw UsageError("config: rf_cap must be >= 1");
    if (opts.filters_per_path < 1) throw UsageError("config: filters_per_path must be >= 1");
    if (opts.growth_rate < 1) throw UsageError("config: growth_rate must be >= 1");
    if (opts.dense_block_count < 0 || opts.dense_block_count > 2) {
        throw UsageError("config: dense_block_count must be 0, 1 or 2");
    }
    if (opts.preserved_kernels < 1) throw UsageError("config: preserved_kernels must be >= 1");
    if (!(opts.gamma > 0 && opts.gamma < 1)) throw UsageError("config: gamma must lie in (0,1)");
    if (opts.reduction_ratio < 1) throw UsageError("config: reduction_ratio must be >= 1");
    if (opts.batch_size < 1) throw UsageError("config: batch_size must be >= 1");
    if (opts.max_epochs < 1) throw UsageError("config: max_epochs must be >= 1");
    if (opts.warmup_epochs < 1) throw UsageError("config: warmup_epochs must be >= 1");
    if (opts.max_epochs < opts.warmup_epochs) {
        throw UsageError("config: max_epochs must be >= warmup_epochs");
    }
    if (opts.eval_batch < 1) throw UsageError("config: eval_batch must be >= 1");
    if (opts.drop_region != "auto" && parse_int(opts.drop_region, "drop_region") < 1) {
        throw UsageError("config: drop_region must be 'auto' or a positive integer");
    }
}

}  // namespace

Options load_options(const std::optional<std::filesystem::path>& config_file,
                     const std::vector<std::string>& overrides) {
    Options opts;
    if (config_file) {
        std::ifstream in(*config_file);
        if (!in) throw DataError("config: cannot open " + config_file->string());
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            line_no += 1;
            apply_line(opts, line, config_file->filename().string() + ":" + std::to_string(line_no));
        }
    }
    for (const std::string& o : overrides) apply_line(opts, o, "--set");
    validate(opts);
    return opts;
}

std::string canonical_options(const Options& opts) {
    std::ostringstream out;
    for (const Key& k : registry()) out << k.name << '=' << k.render(opts) << '\n';
    return out.str();
}

std::string options_fingerprint(const Options& opts) {
    return fingerprint_text(canonical_options(opts));
}

std::string describe_options() {
    std::ostringstream out;
    for (const Key& k : registry()) {
        out << "  " << k.name << " (default " << k.default_value << "): " << k.help << '\n';
    }
    return out.str();
}

ModelConfig to_model_config(const Options& opts, int num_classes) {
    ModelConfig cfg;
    cfg.filters_per_path = opts.filters_per_path;
    cfg.growth_rate = opts.growth_rate;
    cfg.dense_block_count = opts.dense_block_count;
    cfg.enable_targetdrop = opts.enable_targetdrop;
    cfg.preserved_kernel_count = opts.preserved_kernels;
    cfg.num_classes = num_classes;
    cfg.targetdrop.gamma = static_cast<real_t>(opts.gamma);
    cfg.targetdrop.reduction_ratio = opts.reduction_ratio;
    cfg.targetdrop.region_length = opts.drop_region == "auto" ? 0 : std::stoi(opts.drop_region);
    cfg.bn_momentum = static_cast<real_t>(opts.bn_momentum);
    cfg.bn_epsilon = static_cast<real_t>(opts.bn_epsilon);
    return cfg;
}

TrainConfig to_train_config(const Options& opts) {
    TrainConfig cfg;
    cfg.lr = opts.lr;
    cfg.batch_size = opts.batch_size;
    cfg.max_epochs = opts.max_epochs;
    cfg.seed = opts.seed;
    cfg.warmup_epochs = opts.warmup_epochs;
    cfg.early_stop_patience = opts.early_stop_patience;
    cfg.keep_best = opts.best_checkpoint;
    cfg.adam_beta1 = opts.adam_beta1;
    cfg.adam_beta2 = opts.adam_beta2;
    cfg.adam_epsilon = opts.adam_epsilon;
    cfg.log_every = opts.log_every;
    return cfg;
}

LoadOptions to_load_options(const Options& opts) {
    LoadOptions load;
    load.normalize = opts.normalize;
    load.interpolate_missing = opts.interpolate_missing;
    return load;
}

PlannerOptions to_planner_options(const Options& opts) {
    PlannerOptions planner;
    planner.rf_cap = opts.rf_cap;
    planner.p3_literal = opts.p3_literal;
    return planner;
}

}  // namespace adafsnet
