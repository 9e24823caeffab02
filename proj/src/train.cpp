#include "adafsnet/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "adafsnet/error.hpp"

namespace adafsnet {

namespace {

int argmax_row(const std::vector<real_t>& values, int row, int classes) {
    int best = 0;
    for (int c = 1; c < classes; ++c) {
        if (values[static_cast<std::size_t>(row) * classes + c] >
            values[static_cast<std::size_t>(row) * classes + best]) {
            best = c;
        }
    }
    return best;
}

// batch_size-sized index groups; a trailing singleton is merged into the
// previous batch so batch statistics stay well-defined.
std::vector<std::vector<int>> make_batches(const std::vector<int>& order, int batch_size) {
    std::vector<std::vector<int>> batches;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    if (batches.size() >= 2 && batches.back().size() == 1) {
        batches[batches.size() - 2].push_back(batches.back()[0]);
        batches.pop_back();
    }
    return batches;
}

struct Snapshot {
    std::vector<std::vector<real_t>> arrays;
};

Snapshot snapshot_arrays(AdaFSNet& model) {
    Snapshot snap;
    for (const NamedArray& a : model.named_arrays()) snap.arrays.push_back(*a.data);
    return snap;
}

void restore_arrays(AdaFSNet& model, const Snapshot& snap) {
    const auto arrays = model.named_arrays();
    if (arrays.size() != snap.arrays.size()) return;  // structure changed since snapshot
    for (std::size_t i = 0; i < arrays.size(); ++i) *arrays[i].data = snap.arrays[i];
}

}  // namespace

TrainResult train(AdaFSNet& model, const TimeSeriesDataset& train_set, const TrainConfig& cfg,
                  Rng& rng) {
    if (train_set.samples.empty()) throw DataError("train: empty training set");
    if (train_set.num_classes() != model.config().num_classes) {
        throw DataError("train: dataset has " + std::to_string(train_set.num_classes()) +
                        " classes, model head has " + std::to_string(model.config().num_classes));
    }
    if (cfg.batch_size < 1) throw UsageError("train: batch_size must be >= 1");
    if (cfg.max_epochs < cfg.warmup_epochs) {
        throw UsageError("train: max_epochs must be >= warmup_epochs");
    }

    AdamConfig adam;
    adam.lr = static_cast<real_t>(cfg.lr);
    adam.beta1 = static_cast<real_t>(cfg.adam_beta1);
    adam.beta2 = static_cast<real_t>(cfg.adam_beta2);
    adam.epsilon = static_cast<real_t>(cfg.adam_epsilon);

    const auto start = std::chrono::steady_clock::now();
    std::vector<Parameter*> params = model.parameters();
    std::vector<int> order(train_set.samples.size());
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    const int classes = model.config().num_classes;
    double best_loss = std::numeric_limits<double>::infinity();
    double snapshot_best = std::numeric_limits<double>::infinity();
    int since_best = 0;
    Snapshot best_snapshot;

    const bool can_respecialize =
        model.config().dense_block_count > 0 && model.config().enable_targetdrop;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0;
        std::int64_t correct = 0;
        for (const std::vector<int>& batch : make_batches(order, cfg.batch_size)) {
            Tensor x = batch_tensor(train_set, batch);
            const std::vector<int> labels = batch_labels(train_set, batch);
            Tensor logits = model.forward(x, Mode::kTrain);
            Tensor loss = softmax_cross_entropy(logits, labels);
            const double batch_loss = static_cast<double>(loss.item());
            if (!std::isfinite(batch_loss)) {
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                   " (diverged; reduce lr or check data)");
            }
            backward(loss);
            adam_step(params, adam);
            loss_sum += batch_loss * static_cast<double>(batch.size());
            const auto& lv = logits.values();
            for (std::size_t i = 0; i < batch.size(); ++i) {
                correct += argmax_row(lv, static_cast<int>(i), classes) ==
                                   labels[i]
                               ? 1
                               : 0;
            }
        }
        EpochStats stats;
        stats.epoch = epoch;
        stats.loss = loss_sum / static_cast<double>(train_set.samples.size());
        stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_set.samples.size());
        result.history.push_back(stats);
        if (cfg.log_every > 0 && epoch % cfg.log_every == 0) {
            std::fprintf(stderr, "epoch %d loss %.6f train_acc %.4f\n", epoch, stats.loss,
                         stats.train_accuracy);
        }

        // snapshots track the best loss produced by the final architecture,
        // so epochs at or before the respecialization point are excluded
        if (cfg.keep_best && (!can_respecialize || epoch > cfg.warmup_epochs) &&
            stats.loss < snapshot_best - 1e-12) {
            snapshot_best = stats.loss;
            best_snapshot = snapshot_arrays(model);
        }

        if (epoch == cfg.warmup_epochs && can_respecialize && !result.respecialized) {
            result.preserved_kernels = preserved_kernel_sizes(
                model.attribution(), model.attention_stats().mean(),
                model.config().preserved_kernel_count);
            model.respecialize_dense_blocks(result.preserved_kernels, rng);
            params = model.parameters();
            result.respecialized = true;
        }
        if (stats.loss < best_loss - 1e-12) {
            best_loss = stats.loss;
            since_best = 0;
        } else {
            since_best += 1;
            if (cfg.early_stop_patience > 0 && since_best >= cfg.early_stop_patience &&
                (!can_respecialize || result.respecialized)) {
                break;
            }
        }
    }

    if (cfg.keep_best && !best_snapshot.arrays.empty()) restore_arrays(model, best_snapshot);
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

double evaluate(AdaFSNet& model, const TimeSeriesDataset& test_set, int eval_batch) {
    if (test_set.samples.empty()) throw DataError("evaluate: empty test set");
    if (test_set.num_classes() != model.config().num_classes) {
        throw DataError("evaluate: dataset has " + std::to_string(test_set.num_classes()) +
                        " classes, model head has " + std::to_string(model.config().num_classes));
    }
    NoGradGuard no_grad;
    const int classes = model.config().num_classes;
    std::int64_t correct = 0;
    std::vector<int> indices;
    for (std::size_t start = 0; start < test_set.samples.size();
         start += static_cast<std::size_t>(eval_batch)) {
        const std::size_t end =
            std::min(test_set.samples.size(), start + static_cast<std::size_t>(eval_batch));
        indices.clear();
        for (std::size_t i = start; i < end; ++i) indices.push_back(static_cast<int>(i));
        Tensor logits = model.forward(batch_tensor(test_set, indices), Mode::kEval);
        const auto& lv = logits.values();
        for (std::size_t i = 0; i < indices.size(); ++i) {
            const int pred = argmax_row(lv, static_cast<int>(i), classes);
            correct += pred == test_set.samples[start + i].label ? 1 : 0;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(test_set.samples.size());
}

double pce(double error, int classes) {
    if (classes < 1) throw UsageError("pce: class count must be >= 1");
    if (error < 0 || error > 1) throw UsageError("pce: error must lie in [0,1]");
    return error / static_cast<double>(classes);
}

double mpce(const std::vector<double>& pces) {
    if (pces.empty()) throw UsageError("mpce: empty PCE list");
    double acc = 0;
    for (double v : pces) acc += v;
    return acc / static_cast<double>(pces.size());
}

RunReport make_report(std::vector<RunRow> rows, std::string config_fingerprint,
                      std::string data_fingerprint, double wall_seconds) {
    RunReport report;
    report.rows = std::move(rows);
    std::vector<double> pces;
    for (const RunRow& r : report.rows) pces.push_back(r.pce);
    report.mpce = mpce(pces);
    report.config_fingerprint = std::move(config_fingerprint);
    report.data_fingerprint = std::move(data_fingerprint);
    report.wall_seconds = wall_seconds;
    return report;
}

namespace {

std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

}  // namespace

std::string emit_report(const RunReport& report, ReportFormat format) {
    std::ostringstream out;
    if (format == ReportFormat::kCsv) {
        out << "dataset,accuracy,error,classes,pce\n";
        for (const RunRow& r : report.rows) {
            out << r.dataset << ',' << fixed4(r.accuracy) << ',' << fixed4(r.error) << ','
                << r.classes << ',' << fixed4(r.pce) << '\n';
        }
        out << "MPCE,,,," << fixed4(report.mpce) << '\n';
    } else {
        out << "| dataset | accuracy | error | classes | PCE |\n";
        out << "|---|---|---|---|---|\n";
        for (const RunRow& r : report.rows) {
            out << "| " << r.dataset << " | " << fixed4(r.accuracy) << " | " << fixed4(r.error)
                << " | " << r.classes << " | " << fixed4(r.pce) << " |\n";
        }
        out << "| MPCE |  |  |  | " << fixed4(report.mpce) << " |\n";
    }
    return out.str();
}

RunReport parse_report_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<RunRow> rows;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first) {
            if (line.rfind("dataset,", 0) != 0) {
                throw DataError("report: missing csv header");
            }
            first = false;
            continue;
        }
        if (line.rfind("MPCE,", 0) == 0) continue;  // recomputed below
        std::istringstream row(line);
        std::string field;
        RunRow r;
        std::getline(row, r.dataset, ',');
        std::getline(row, field, ',');
        r.accuracy = std::stod(field);
        std::getline(row, field, ',');
        r.error = std::stod(field);
        std::getline(row, field, ',');
        r.classes = std::stoi(field);
        std::getline(row, field, ',');
        r.pce = std::stod(field);
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw DataError("report: no data rows");
    return make_report(std::move(rows), "", "", 0.0);
}

const std::vector<AblationVariant>& ablation_grid() {
    static const std::vector<AblationVariant> grid = {
        {"full", true, 2},         {"no-targetdrop", false, 2}, {"dense0", true, 0},
        {"dense1", true, 1},       {"dense2", true, 2},
    };
    return grid;
}

AblationReport run_ablation(const std::vector<AblationJob>& jobs, const ModelConfig& base_model,
                            const TrainConfig& base_train, const PlannerOptions& planner,
                            const std::vector<std::uint64_t>& seeds) {
    if (jobs.empty()) throw DataError("ablate: no datasets");
    if (seeds.empty()) throw UsageError("ablate: need at least one seed");

    AblationReport report;
    report.seeds = seeds;
    std::vector<int> win_count(ablation_grid().size(), 0);

    for (const AblationJob& job : jobs) {
        double best_acc = -1;
        std::size_t best_variant = 0;
        for (std::size_t vi = 0; vi < ablation_grid().size(); ++vi) {
            const AblationVariant& variant = ablation_grid()[vi];
            AblationCell cell;
            cell.dataset = job.name;
            cell.variant = variant.name;
            for (std::uint64_t seed : seeds) {
                ModelConfig mc = base_model;
                mc.enable_targetdrop = variant.targetdrop;
                mc.dense_block_count = variant.dense_blocks;
                mc.num_classes = job.train_set.num_classes();
                const KernelPlan plan =
                    select_pk(job.train_set.width, planner.rf_cap, planner.p3_literal);
                TrainConfig tc = base_train;
                tc.seed = seed;
                Rng rng(seed);
                AdaFSNet model(plan, mc, job.train_set.dims, rng);
                train(model, job.train_set, tc, rng);
                cell.per_seed.push_back(evaluate(model, job.test_set));
            }
            double acc = 0;
            for (double a : cell.per_seed) acc += a;
            cell.mean_accuracy = acc / static_cast<double>(cell.per_seed.size());
            if (cell.mean_accuracy > best_acc) {
                best_acc = cell.mean_accuracy;
                best_variant = vi;
            }
            report.cells.push_back(std::move(cell));
        }
        win_count[best_variant] += 1;
        if (report.data_fingerprint.empty()) {
            report.data_fingerprint = dataset_fingerprint(job.train_set, job.test_set);
        }
    }

    for (std::size_t vi = 0; vi < ablation_grid().size(); ++vi) {
        report.wins.emplace_back(ablation_grid()[vi].name, win_count[vi]);
    }
    return report;
}

std::string emit_ablation(const AblationReport& report, ReportFormat format) {
    std::ostringstream out;
    if (format == ReportFormat::kCsv) {
        out << "dataset,variant,mean_accuracy";
        for (std::size_t i = 0; i < report.seeds.size(); ++i) out << ",seed" << report.seeds[i];
        out << '\n';
        for (const AblationCell& cell : report.cells) {
            out << cell.dataset << ',' << cell.variant << ',' << fixed4(cell.mean_accuracy);
            for (double a : cell.per_seed) out << ',' << fixed4(a);
            out << '\n';
        }
        out << "variant,wins\n";
        for (const auto& [name, wins] : report.wins) out << name << ',' << wins << '\n';
    } else {
        out << "| dataset | variant | mean accuracy |\n|---|---|---|\n";
        for (const AblationCell& cell : report.cells) {
            out << "| " << cell.dataset << " | " << cell.variant << " | "
                << fixed4(cell.mean_accuracy) << " |\n";
        }
        out << "\n| variant | wins |\n|---|---|\n";
        for (const auto& [name, wins] : report.wins) out << "| " << name << " | " << wins << " |\n";
    }
    return out.str();
}

std::string fingerprint_text(const std::string& canonical) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace adafsnet
