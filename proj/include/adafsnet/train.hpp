#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "adafsnet/dataset.hpp"
#include "adafsnet/model.hpp"
#include "adafsnet/optim.hpp"

namespace adafsnet {

struct TrainConfig {
    double lr = 0.001;
    int batch_size = 16;
    int max_epochs = 1500;
    std::uint64_t seed = 0;
    int warmup_epochs = 20;        // respecialization point
    int early_stop_patience = 0;   // 0 disables
    bool keep_best = false;        // restore best-train-loss parameters at the end
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    int log_every = 0;  // epochs; 0 silences per-epoch logging
};

struct EpochStats {
    int epoch = 0;
    double loss = 0;
    double train_accuracy = 0;
};

struct TrainResult {
    std::vector<EpochStats> history;
    bool respecialized = false;
    std::vector<int> preserved_kernels;
    double wall_seconds = 0;
};

// Seeded-shuffle minibatch Adam training. At epoch == warmup_epochs the dense
// blocks are rebuilt once from the attention statistics (when both dense
// blocks and TargetDrop are enabled). Aborts with a diagnostic on non-finite
// loss. `rng` must be the same stream that initialized the model.
TrainResult train(AdaFSNet& model, const TimeSeriesDataset& train_set, const TrainConfig& cfg,
                  Rng& rng);

// Argmax-of-logits accuracy; ties resolve to the smallest class index.
double evaluate(AdaFSNet& model, const TimeSeriesDataset& test_set, int eval_batch = 64);

double pce(double error, int classes);
double mpce(const std::vector<double>& pces);

struct RunRow {
    std::string dataset;
    double accuracy = 0;
    double error = 0;
    int classes = 0;
    double pce = 0;
};

struct RunReport {
    std::vector<RunRow> rows;
    double mpce = 0;
    std::string config_fingerprint;
    std::string data_fingerprint;
    double wall_seconds = 0;
};

RunReport make_report(std::vector<RunRow> rows, std::string config_fingerprint,
                      std::string data_fingerprint, double wall_seconds);

enum class ReportFormat { kCsv, kMarkdown };

// name, acc, error, classes, PCE columns; MPCE footer; 4 decimal places.
std::string emit_report(const RunReport& report, ReportFormat format);

// Reads rows back from emit_report's CSV output.
RunReport parse_report_csv(const std::string& text);

// --- ablation -----------------------------------------------------------------

struct AblationVariant {
    std::string name;
    bool targetdrop = true;
    int dense_blocks = 2;
};

// Declaration order is the tie-break order for win counting.
const std::vector<AblationVariant>& ablation_grid();

struct AblationCell {
    std::string dataset;
    std::string variant;
    double mean_accuracy = 0;
    std::vector<double> per_seed;
};

struct AblationReport {
    std::vector<AblationCell> cells;                  // dataset-major, variant order
    std::vector<std::pair<std::string, int>> wins;    // per variant, sums to dataset count
    std::vector<std::uint64_t> seeds;
    std::string data_fingerprint;
};

struct AblationJob {
    std::string name;
    TimeSeriesDataset train_set;
    TimeSeriesDataset test_set;
};

struct PlannerOptions {
    int rf_cap = 48;
    bool p3_literal = false;
};

// Runs the variant grid with a shared seed set on every dataset and counts
// wins per variant (best mean accuracy; earlier declaration wins ties).
AblationReport run_ablation(const std::vector<AblationJob>& jobs, const ModelConfig& base_model,
                            const TrainConfig& base_train, const PlannerOptions& planner,
                            const std::vector<std::uint64_t>& seeds = {0, 1, 2});

std::string emit_ablation(const AblationReport& report, ReportFormat format);

// FNV-1a fingerprint of canonical key=value lines.
std::string fingerprint_text(const std::string& canonical);

}  // namespace adafsnet
