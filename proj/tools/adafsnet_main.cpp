// adafsnet command line: plan / train / eval / gradcheck / ablate / report.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adafsnet/checkpoint.hpp"
#include "adafsnet/config.hpp"
#include "adafsnet/dataset.hpp"
#include "adafsnet/error.hpp"
#include "adafsnet/gradcheck.hpp"
#include "adafsnet/model.hpp"
#include "adafsnet/planner.hpp"
#include "adafsnet/train.hpp"

namespace fs = std::filesystem;
using namespace adafsnet;

namespace {

constexpr const char* kDataRootEnv = "ADAFSNET_DATA_ROOT";

struct CommonArgs {
    std::string data_root;
    std::optional<fs::path> config_file;
    std::vector<std::string> overrides;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_data_root = true) {
    if (with_data_root) {
        cmd->add_option("--data-root", args.data_root,
                        "dataset directory (falls back to $" + std::string(kDataRootEnv) + ")");
    }
    cmd->add_option("--config", args.config_file, "key=value config file");
    cmd->add_option("--set", args.overrides, "override a config key, e.g. --set lr=0.01")
        ->take_all();
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--seed", args.seed, "RNG seed (shadows the config file)");
}

fs::path resolve_data_root(const CommonArgs& args) {
    if (!args.data_root.empty()) return args.data_root;
    if (const char* env = std::getenv(kDataRootEnv)) return env;
    throw UsageError("no dataset directory: pass --data-root or set " + std::string(kDataRootEnv));
}

Options resolve_options(const CommonArgs& args) {
    std::vector<std::string> overrides = args.overrides;
    if (args.seed) overrides.push_back("seed=" + std::to_string(*args.seed));
    return load_options(args.config_file, overrides);
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out << text;
}

std::string history_csv(const TrainResult& result) {
    std::string text = "epoch,loss,train_acc\n";
    char buf[96];
    for (const EpochStats& e : result.history) {
        std::snprintf(buf, sizeof(buf), "%d,%.9f,%.6f\n", e.epoch, e.loss, e.train_accuracy);
        text += buf;
    }
    return text;
}

int cmd_plan(int length, const CommonArgs& args) {
    const Options opts = resolve_options(args);
    const KernelPlan plan = select_pk(length, opts.rf_cap, opts.p3_literal);
    std::printf("series length %d, target RF %d\n", length, plan.target_rf);
    std::printf("p_k = %d\n", plan.p_k);
    auto print_set = [](const char* name, const std::vector<int>& s) {
        std::printf("%s = {", name);
        for (std::size_t i = 0; i < s.size(); ++i) std::printf("%s%d", i ? "," : "", s[i]);
        std::printf("}\n");
    };
    print_set("P(1)", plan.p1);
    print_set("P(2)", plan.p2);
    print_set("P(3)", plan.p3);
    std::printf("paths = %zu\n", plan.paths.size());
    std::fputs(coverage_certificate(plan).c_str(), stdout);
    return 0;
}

int cmd_train(const std::string& dataset, const CommonArgs& args) {
    const Options opts = resolve_options(args);
    const fs::path root = resolve_data_root(args);
    auto [train_set, test_set] = load_pair(root, dataset, to_load_options(opts));

    const KernelPlan plan = select_pk(train_set.width, opts.rf_cap, opts.p3_literal);
    Rng rng(opts.seed);
    AdaFSNet model(plan, to_model_config(opts, train_set.num_classes()), train_set.dims, rng);
    std::printf("dataset %s: %zu train / %zu test, W=%d, D=%d, %d classes\n", dataset.c_str(),
                train_set.size(), test_set.size(), train_set.width, train_set.dims,
                train_set.num_classes());
    std::printf("plan: p_k=%d, %zu paths; parameters: %lld\n", plan.p_k, plan.paths.size(),
                static_cast<long long>(model.parameter_count()));

    const TrainResult result = train(model, train_set, to_train_config(opts), rng);

    fs::create_directories(args.out_dir);
    const fs::path ckpt = fs::path(args.out_dir) / (dataset + ".afsn");
    save_checkpoint(model, ckpt);
    write_file(fs::path(args.out_dir) / (dataset + "_history.csv"), history_csv(result));

    const double accuracy = evaluate(model, test_set, opts.eval_batch);
    const double err = 1.0 - accuracy;
    RunRow row{dataset, accuracy, err, test_set.num_classes(),
               pce(err, test_set.num_classes())};
    const RunReport report = make_report({row}, options_fingerprint(opts),
                                         dataset_fingerprint(train_set, test_set),
                                         result.wall_seconds);
    write_file(fs::path(args.out_dir) / (dataset + "_eval.csv"),
               emit_report(report, ReportFormat::kCsv));

    std::printf("trained %d epochs, final loss %.6f, train acc %.4f\n",
                static_cast<int>(result.history.size()), result.history.back().loss,
                result.history.back().train_accuracy);
    if (result.respecialized) {
        std::printf("preserved kernels:");
        for (int k : result.preserved_kernels) std::printf(" %d", k);
        std::printf("\n");
    }
    std::printf("test accuracy %.4f, error %.4f, PCE %.4f\n", accuracy, err, row.pce);
    std::printf("checkpoint: %s\n", ckpt.string().c_str());
    return 0;
}

int cmd_eval(const std::string& dataset, const std::string& checkpoint, const CommonArgs& args) {
    const Options opts = resolve_options(args);
    const fs::path root = resolve_data_root(args);
    auto [train_set, test_set] = load_pair(root, dataset, to_load_options(opts));
    AdaFSNet model = load_checkpoint(checkpoint);
    const double accuracy = evaluate(model, test_set, opts.eval_batch);
    const double err = 1.0 - accuracy;
    std::printf("dataset %s: accuracy %.4f, error %.4f, classes %d, PCE %.4f\n", dataset.c_str(),
                accuracy, err, test_set.num_classes(), pce(err, test_set.num_classes()));
    return 0;
}

int cmd_gradcheck(int cases, std::uint64_t seed) {
    const auto reports = run_gradient_suite(cases, seed);
    bool ok = true;
    for (const auto& r : reports) {
        std::printf("%-24s cases %-3d max rel err %.3e  (%.2fs)\n", r.op.c_str(), r.cases,
                    static_cast<double>(r.max_error), r.seconds);
        ok = ok && r.max_error < real_t(1e-5);
    }
    if (!ok) throw NumericError("gradcheck: at least one op exceeded 1e-5");
    std::printf("gradcheck OK\n");
    return 0;
}

int cmd_ablate(const std::vector<std::string>& datasets, const CommonArgs& args) {
    const Options opts = resolve_options(args);
    const fs::path root = resolve_data_root(args);
    std::vector<AblationJob> jobs;
    for (const std::string& name : datasets) {
        auto [train_set, test_set] = load_pair(root, name, to_load_options(opts));
        jobs.push_back({name, std::move(train_set), std::move(test_set)});
    }
    const AblationReport report =
        run_ablation(jobs, to_model_config(opts, 2), to_train_config(opts),
                     to_planner_options(opts));
    const std::string csv = emit_ablation(report, ReportFormat::kCsv);
    fs::create_directories(args.out_dir);
    write_file(fs::path(args.out_dir) / "ablation.csv", csv);
    write_file(fs::path(args.out_dir) / "ablation.md",
               emit_ablation(report, ReportFormat::kMarkdown));
    std::fputs(csv.c_str(), stdout);
    return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& format,
               const CommonArgs& args) {
    std::vector<RunRow> rows;
    for (const std::string& file : inputs) {
        std::ifstream in(file);
        if (!in) throw DataError("report: cannot open " + file);
        std::ostringstream buf;
        buf << in.rdbuf();
        const RunReport part = parse_report_csv(buf.str());
        rows.insert(rows.end(), part.rows.begin(), part.rows.end());
    }
    const RunReport merged = make_report(std::move(rows), "", "", 0.0);
    const ReportFormat fmt = format == "md" ? ReportFormat::kMarkdown : ReportFormat::kCsv;
    const std::string text = emit_report(merged, fmt);
    fs::create_directories(args.out_dir);
    write_file(fs::path(args.out_dir) / (format == "md" ? "report.md" : "report.csv"), text);
    std::fputs(text.c_str(), stdout);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"AdaFSNet: prime-kernel full-scope 1D CNN for time series classification"};
    app.require_subcommand(1);
    app.footer("config keys (config file or --set):\n" + describe_options() +
               "\nFloating-point precision is fixed at build time: float64 by default,"
               "\nfloat32 with -DADAFSNET_SINGLE_PRECISION=ON.");

    CommonArgs plan_args, train_args, eval_args, ablate_args, report_args;

    auto* plan_cmd = app.add_subcommand("plan", "print the kernel plan and coverage certificate");
    int plan_length = 0;
    plan_cmd->add_option("--length", plan_length, "series length")->required();
    add_common(plan_cmd, plan_args, false);

    auto* train_cmd = app.add_subcommand("train", "train on a dataset and write a checkpoint");
    std::string train_dataset;
    train_cmd->add_option("--dataset", train_dataset, "dataset name")->required();
    add_common(train_cmd, train_args);

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    std::string eval_dataset, eval_checkpoint;
    eval_cmd->add_option("--dataset", eval_dataset, "dataset name")->required();
    eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint file")->required();
    add_common(eval_cmd, eval_args);

    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    int grad_cases = 20;
    std::uint64_t grad_seed = 0;
    grad_cmd->add_option("--cases", grad_cases, "random cases per op");
    grad_cmd->add_option("--seed", grad_seed, "RNG seed");

    auto* ablate_cmd = app.add_subcommand("ablate", "run the ablation variant grid");
    std::vector<std::string> ablate_datasets;
    ablate_cmd->add_option("--dataset", ablate_datasets, "dataset name (repeatable)")
        ->required()
        ->take_all();
    add_common(ablate_cmd, ablate_args);

    auto* report_cmd = app.add_subcommand("report", "merge eval csv files into an MPCE table");
    std::vector<std::string> report_inputs;
    std::string report_format = "csv";
    report_cmd->add_option("inputs", report_inputs, "eval csv files")->required();
    report_cmd->add_option("--format", report_format, "csv or md")
        ->check(CLI::IsMember({"csv", "md"}));
    add_common(report_cmd, report_args, false);

    try {
        app.parse(argc, argv);
        if (*plan_cmd) return cmd_plan(plan_length, plan_args);
        if (*train_cmd) return cmd_train(train_dataset, train_args);
        if (*eval_cmd) return cmd_eval(eval_dataset, eval_checkpoint, eval_args);
        if (*grad_cmd) return cmd_gradcheck(grad_cases, grad_seed);
        if (*ablate_cmd) return cmd_ablate(ablate_datasets, ablate_args);
        if (*report_cmd) return cmd_report(report_inputs, report_format, report_args);
        return 1;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        std::fprintf(stderr, "ERROR 1: %s\n", e.what());
        return 1;
    } catch (const Error& e) {
        std::fprintf(stderr, "ERROR %d: %s\n", e.code(), e.what());
        return e.code();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "ERROR 3: %s\n", e.what());
        return 3;
    }
}
