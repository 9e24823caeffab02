// Acceptance suite: one line per criterion, nonzero exit if any fails.
//
// Criteria 5 and 6 train on the real UCR datasets when they are found under
// $ADAFSNET_DATA_ROOT (ItalyPowerDemand / Coffee / GunPoint pairs in .tsv or
// .ts form). Without them, deterministic synthetic stand-ins with the same
// sizes, lengths and class counts are used and the output says so.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "adafsnet/dataset.hpp"
#include "adafsnet/error.hpp"
#include "adafsnet/gradcheck.hpp"
#include "adafsnet/model.hpp"
#include "adafsnet/planner.hpp"
#include "adafsnet/targetdrop.hpp"
#include "adafsnet/train.hpp"
#include "support/synth.hpp"

using namespace adafsnet;
namespace fs = std::filesystem;
using clock_type = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(clock_type::time_point start) {
    return std::chrono::duration<double>(clock_type::now() - start).count();
}

std::string fmt(const char* format, ...) {
    va_list args;
    va_start(args, format);
    char buf[512];
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return buf;
}

// --- criterion 1: gradient suite -------------------------------------------

Outcome criterion_gradients() {
    const auto start = clock_type::now();
    const auto reports = run_gradient_suite(20, 0);
    real_t worst = 0;
    std::string worst_op;
    bool ok = true;
    for (const auto& r : reports) {
        ok = ok && r.cases >= 20 && r.max_error < real_t(1e-5);
        if (r.max_error > worst) {
            worst = r.max_error;
            worst_op = r.op;
        }
    }
    const double elapsed = seconds_since(start);
    ok = ok && elapsed < 60.0;
    return {ok, fmt("%zu ops x 20 shapes, worst %.2e (%s) < 1e-5, %.1fs < 60s", reports.size(),
                    static_cast<double>(worst), worst_op.c_str(), elapsed)};
}

// --- criterion 2: coverage oracle -------------------------------------------

Outcome criterion_coverage() {
    const auto start = clock_type::now();
    bool ok = true;
    std::ostringstream notes;

    // (a) coverage_set equals an independent brute-force enumeration
    for (int p : sieve_primes(97)) {
        std::vector<int> p1, p2, p3;
        build_kernel_sets(p, false, p1, p2, p3);
        std::set<int> oracle;
        for (int a : p1)
            for (int b : p2)
                for (int c : p3) oracle.insert(a + b + c - 2);
        const std::vector<int> got = coverage_set(p1, p2, p3);
        ok = ok && std::vector<int>(oracle.begin(), oracle.end()) == got;
    }

    // (b) the planner covers [1, 2p] for each listed prime (selecting a larger
    // prime when the literal one has gaps; see the bounded-Goldbach note)
    std::vector<int> gap_primes;
    for (int p : sieve_primes(97)) {
        if (p < 5) continue;
        const KernelPlan plan = select_pk(2 * p, 2 * p);
        const CoverageReport report = verify_coverage(plan);
        ok = ok && report.ok && plan.target_rf == 2 * p;
        if (!verify_coverage(make_plan(p, 2 * p)).ok) gap_primes.push_back(p);
    }

    // (c) pinned facts: p_k=7 covers exactly [1,14]; p_k=5 fails target 14
    const KernelPlan plan7 = make_plan(7, 14);
    ok = ok && verify_coverage(plan7).ok && plan7.coverage.back() == 14 &&
         select_pk(14, 48).p_k == 7;
    const CoverageReport bad5 = verify_coverage(make_plan(5, 14));
    bool missing_odd_high = false;
    for (int rf : bad5.missing) missing_odd_high = missing_odd_high || (rf >= 11 && rf % 2 == 1);
    ok = ok && !bad5.ok && missing_odd_high;

    const double elapsed = seconds_since(start);
    ok = ok && elapsed < 10.0;
    notes << "oracle equality for all primes <= 97; planner covers [1,2p] for each (own-prime gaps at";
    for (std::size_t i = 0; i < std::min<std::size_t>(gap_primes.size(), 6); ++i) {
        notes << ' ' << gap_primes[i];
    }
    notes << " ...); p_k=7 exact [1,14]; p_k=5 fails 14; " << fmt("%.1fs < 10s", elapsed);
    return {ok, notes.str()};
}

// --- criterion 3: Goldbach desk check ---------------------------------------

Outcome criterion_goldbach() {
    const auto start = clock_type::now();
    bool ok = true;
    for (int e = 4; e <= 20000 && ok; e += 2) {
        const auto [p, q] = goldbach_pair(e);
        ok = p + q == e;
    }
    const double elapsed = seconds_since(start);
    ok = ok && elapsed < 5.0;
    return {ok, fmt("every even in [4,20000] decomposes, %.1fs < 5s", elapsed)};
}

// --- criterion 4: TargetDrop properties -------------------------------------

Outcome criterion_targetdrop() {
    const auto start = clock_type::now();
    Rng rng(2024);
    bool ok = true;
    int checked = 0;
    for (int trial = 0; trial < 1000 && ok; ++trial) {
        const int C = 2 + static_cast<int>(rng.below(63));
        const int W = 4 + static_cast<int>(rng.below(253));
        const real_t gamma = static_cast<real_t>(rng.uniform(0.01, 0.99));
        const int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(W)));

        std::vector<real_t> attention(static_cast<std::size_t>(C));
        for (real_t& a : attention) a = static_cast<real_t>(rng.uniform(0.001, 0.999));
        std::set<real_t> distinct(attention.begin(), attention.end());
        const TargetVector tv = select_targets(attention, gamma);
        if (distinct.size() == attention.size()) {
            const int selected = static_cast<int>(std::count(tv.selected.begin(), tv.selected.end(), 1));
            ok = ok && selected == static_cast<int>(std::ceil(static_cast<double>(gamma) * C));
        }

        // one masked channel: contiguous zero run bounded by 2*floor(k/2)+1
        std::vector<real_t> channel(static_cast<std::size_t>(W));
        for (real_t& v : channel) v = static_cast<real_t>(rng.uniform(-2, 2));
        const DropRegion region = drop_region(channel.data(), W, k);
        ok = ok && region.w1 >= 1 && region.w2 <= W && region.w1 <= region.w2;
        ok = ok && (region.w2 - region.w1 + 1) <= 2 * (k / 2) + 1;

        std::vector<real_t> mask(static_cast<std::size_t>(W), 1);
        for (int w = region.w1; w <= region.w2; ++w) mask[static_cast<std::size_t>(w - 1)] = 0;
        int keep = 0;
        for (real_t m : mask) keep += m != 0 ? 1 : 0;
        Tensor out = apply_mask(Tensor::from_values({1, 1, W}, channel),
                                Tensor::from_values({1, 1, W}, mask));
        // zeros form a single contiguous run
        int runs = 0;
        bool in_run = false;
        for (int w = 0; w < W; ++w) {
            const bool zero = mask[static_cast<std::size_t>(w)] == 0;
            if (zero && !in_run) runs += 1;
            in_run = zero;
        }
        ok = ok && runs == 1;
        // Eq. 7 identity, exact: sum of the output equals the sum of the
        // per-term rescaled survivors
        real_t lhs = 0, rhs = 0;
        for (int w = 0; w < W; ++w) {
            lhs += out.values()[static_cast<std::size_t>(w)];
            if (mask[static_cast<std::size_t>(w)] != 0 && keep > 0) {
                rhs += (channel[static_cast<std::size_t>(w)] * static_cast<real_t>(W)) /
                       static_cast<real_t>(keep);
            }
        }
        ok = ok && lhs == rhs;
        checked += 1;
    }

    // eval mode: drop-free and bitwise deterministic
    {
        Rng mrng(7);
        TargetDropConfig cfg;
        TargetDrop td(8, cfg, mrng);
        std::vector<real_t> v(2 * 8 * 32);
        for (real_t& x : v) x = static_cast<real_t>(mrng.uniform(-1, 1));
        Tensor u = Tensor::from_values({2, 8, 32}, v);
        Tensor a = td.forward(u, Mode::kEval, false);
        Tensor b = td.forward(u, Mode::kEval, false);
        ok = ok && a.values() == b.values();
        int zeros = 0;
        for (real_t x : a.values()) zeros += x == real_t(0) ? 1 : 0;
        ok = ok && zeros == 0;
    }

    const double elapsed = seconds_since(start);
    ok = ok && elapsed < 30.0;
    return {ok, fmt("%d randomized cases: top-K count, contiguity, exact rescale identity, "
                    "drop-free eval, %.1fs < 30s",
                    checked, elapsed)};
}

// --- criteria 5 and 6: desk-scale reproduction ------------------------------

struct DeskSpec {
    std::string dataset;
    synth::SynthSpec stand_in;
    double min_accuracy;
    int epochs;
    double budget_seconds;
    int rf_cap;
    int filters;
    int growth;
};

std::optional<fs::path> data_root() {
    if (const char* env = std::getenv("ADAFSNET_DATA_ROOT")) {
        if (*env) return fs::path(env);
    }
    return std::nullopt;
}

bool real_pair_available(const std::string& name) {
    const auto root = data_root();
    if (!root) return false;
    for (const char* ext : {".tsv", ".ts"}) {
        if (fs::exists(*root / (name + "_TRAIN" + ext)) &&
            fs::exists(*root / (name + "_TEST" + ext))) {
            return true;
        }
    }
    return false;
}

std::pair<TimeSeriesDataset, TimeSeriesDataset> desk_pair(const DeskSpec& spec, bool& real_data) {
    real_data = real_pair_available(spec.dataset);
    if (real_data) return load_pair(*data_root(), spec.dataset, LoadOptions{});
    return synth::make_pair(spec.stand_in);
}

Outcome run_desk(const DeskSpec& spec) {
    const auto start = clock_type::now();
    bool real_data = false;
    auto [train_set, test_set] = desk_pair(spec, real_data);

    const KernelPlan plan = select_pk(train_set.width, spec.rf_cap);
    ModelConfig mc;
    mc.filters_per_path = spec.filters;
    mc.growth_rate = spec.growth;
    mc.num_classes = train_set.num_classes();
    TrainConfig tc;
    tc.max_epochs = spec.epochs;
    tc.warmup_epochs = 10;
    tc.seed = 0;
    Rng rng(0);
    AdaFSNet model(plan, mc, train_set.dims, rng);
    train(model, train_set, tc, rng);
    const double accuracy = evaluate(model, test_set);
    const double elapsed = seconds_since(start);
    const bool ok = accuracy >= spec.min_accuracy && elapsed < spec.budget_seconds;
    return {ok, fmt("%s (%s): accuracy %.4f >= %.2f, %d epochs, %.0fs < %.0fs", spec.dataset.c_str(),
                    real_data ? "real UCR data" : "synthetic stand-in, set ADAFSNET_DATA_ROOT for real",
                    accuracy, spec.min_accuracy, spec.epochs, elapsed, spec.budget_seconds)};
}

Outcome criterion_desk_scale() {
    const std::vector<DeskSpec> specs = {
        {"ItalyPowerDemand", synth::italy_power_shape(), 0.90, 100, 600.0, 24, 2, 8},
        {"Coffee", synth::coffee_shape(), 0.92, 100, 900.0, 24, 1, 8},
        {"GunPoint", synth::gunpoint_shape(), 0.90, 100, 1200.0, 24, 1, 8},
    };
    bool ok = true;
    std::string detail;
    for (const DeskSpec& spec : specs) {
        const Outcome o = run_desk(spec);
        ok = ok && o.pass;
        if (!detail.empty()) detail += " | ";
        detail += o.detail;
    }
    return {ok, detail};
}

Outcome criterion_overfit() {
    const auto start = clock_type::now();
    bool real_data = false;
    DeskSpec spec{"GunPoint", synth::gunpoint_shape(), 1.0, 200, 120.0, 8, 1, 2};
    auto [full_train, full_test] = desk_pair(spec, real_data);

    // 8-sample 2-class subset: first four of each of the first two classes
    TimeSeriesDataset subset = full_train;
    subset.samples.clear();
    int count0 = 0, count1 = 0;
    for (const Sample& s : full_train.samples) {
        if (s.label == 0 && count0 < 4) {
            subset.samples.push_back(s);
            count0 += 1;
        } else if (s.label == 1 && count1 < 4) {
            subset.samples.push_back(s);
            count1 += 1;
        }
    }

    const KernelPlan plan = select_pk(subset.width, spec.rf_cap);
    ModelConfig mc;
    mc.filters_per_path = spec.filters;
    mc.growth_rate = spec.growth;
    mc.num_classes = subset.num_classes();
    TrainConfig tc;
    tc.max_epochs = 200;
    tc.warmup_epochs = 10;
    Rng rng(0);
    AdaFSNet model(plan, mc, subset.dims, rng);
    const TrainResult result = train(model, subset, tc, rng);
    int reached = -1;
    for (const EpochStats& e : result.history) {
        if (e.train_accuracy == 1.0) {
            reached = e.epoch;
            break;
        }
    }
    const double elapsed = seconds_since(start);
    const bool ok = reached > 0 && elapsed < 120.0;
    return {ok, fmt("8-sample 2-class subset (%s): 100%% train accuracy at epoch %d <= 200, %.0fs < 120s",
                    real_data ? "real GunPoint" : "synthetic stand-in", reached, elapsed)};
}

// --- criterion 7: metric oracle ---------------------------------------------

Outcome criterion_metrics() {
    // spec example: errors [0.2, 0.1] with classes [4, 2] -> PCEs [0.05, 0.05]
    bool ok = pce(0.2, 4) == 0.05 && pce(0.1, 2) == 0.05 && mpce({0.05, 0.05}) == 0.05;

    // synthetic 5-dataset table, hand-computed
    const std::vector<double> errors{0.2, 0.1, 0.0, 0.5, 0.25};
    const std::vector<int> classes{4, 2, 3, 10, 5};
    const std::vector<double> expect_pce{0.05, 0.05, 0.0, 0.05, 0.05};
    std::vector<double> pces;
    for (std::size_t i = 0; i < errors.size(); ++i) {
        const double got = pce(errors[i], classes[i]);
        ok = ok && got == expect_pce[i];
        pces.push_back(got);
    }
    ok = ok && mpce(pces) == (0.05 + 0.05 + 0.0 + 0.05 + 0.05) / 5.0;
    return {ok, "PCE/MPCE match hand-computed values exactly on the 5-dataset table"};
}

// --- criterion 8: parser conformance ----------------------------------------

Outcome criterion_parsers() {
    bool ok = true;
    std::string note;

    // Table I shaped pairs: GunPoint 50/150 W=150, Coffee 28/28
    for (const auto& [name, tr_n, te_n, width] :
         std::vector<std::tuple<std::string, int, int, int>>{{"GunPoint", 50, 150, 150},
                                                             {"Coffee", 28, 28, 286}}) {
        bool real_data = real_pair_available(name);
        TimeSeriesDataset train_set, test_set;
        if (real_data) {
            std::tie(train_set, test_set) = load_pair(*data_root(), name, LoadOptions{});
        } else {
            synth::SynthSpec spec = name == "GunPoint" ? synth::gunpoint_shape() : synth::coffee_shape();
            auto pair = synth::make_pair(spec);
            // serialize and reload through the real parser path
            train_set = parse_ucr_tsv(to_tsv(pair.first), LoadOptions{});
            test_set = parse_ucr_tsv(to_tsv(pair.second), LoadOptions{});
        }
        ok = ok && static_cast<int>(train_set.size()) == tr_n &&
             static_cast<int>(test_set.size()) == te_n;
        if (name == "GunPoint") ok = ok && train_set.width == width;
        ok = ok && train_set.num_classes() == 2;
    }

    // negative fixtures all raise structured errors
    const std::vector<std::string> bad_tsv = {
        "",                        // empty
        "1\t2\t3\n2\t4\n",         // ragged
        "1\t2\tpotato\n",          // non-numeric
        "1\t2\tNaN\n",             // missing value, interpolation off
        "solo_label\n",            // label without values
    };
    for (const std::string& text : bad_tsv) {
        try {
            parse_ucr_tsv(text, LoadOptions{});
            ok = false;
            note += " tsv fixture unexpectedly parsed;";
        } catch (const DataError&) {
        }
    }
    const std::vector<std::string> bad_ts = {
        "@problemName x\n@classLabel true a\n@data\n1,2:zebra\n",
        "@problemName x\n@classLabel true a\n1,2:a\n",
        "@problemName x\n@classLabel true a\n@data\n1,2:3:a\n4,5:a\n",
        "@problemName x\n@classLabel false\n@data\n1,2\n",
    };
    for (const std::string& text : bad_ts) {
        try {
            parse_ts(text, LoadOptions{});
            ok = false;
            note += " ts fixture unexpectedly parsed;";
        } catch (const DataError&) {
        }
    }

    // round-trip serialization is field-identical
    LoadOptions raw;
    raw.normalize = false;
    TimeSeriesDataset a = parse_ucr_tsv("1\t0.25\t-3.5\t0.125\n2\t9\t8\t7\n", raw);
    TimeSeriesDataset b = parse_ucr_tsv(to_tsv(a), raw);
    ok = ok && a.width == b.width && a.class_names == b.class_names && a.samples.size() == b.samples.size();
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        ok = ok && a.samples[i].values == b.samples[i].values && a.samples[i].label == b.samples[i].label;
    }

    return {ok, "Table I shaped pairs load with stated counts; all negative fixtures raise "
                "structured errors; round-trip is field-identical" + note};
}

// --- criterion 9: ablation harness ------------------------------------------

Outcome criterion_ablation() {
    const auto start = clock_type::now();
    std::vector<AblationJob> jobs;
    for (int i = 0; i < 3; ++i) {
        synth::SynthSpec spec{"synth" + std::to_string(i), 10, 8, 16, 2, 0.3,
                              static_cast<std::uint64_t>(300 + i)};
        auto [tr, te] = synth::make_pair(spec);
        jobs.push_back({spec.name, std::move(tr), std::move(te)});
    }
    ModelConfig mc;
    mc.filters_per_path = 1;
    mc.growth_rate = 2;
    TrainConfig tc;
    tc.max_epochs = 3;
    tc.warmup_epochs = 2;
    PlannerOptions planner;
    planner.rf_cap = 6;
    const AblationReport report = run_ablation(jobs, mc, tc, planner, {0, 1, 2});

    bool ok = report.cells.size() == jobs.size() * ablation_grid().size();
    ok = ok && report.seeds == std::vector<std::uint64_t>{0, 1, 2};
    int wins = 0;
    for (const auto& [name, count] : report.wins) wins += count;
    ok = ok && wins == static_cast<int>(jobs.size());
    ok = ok && report.wins.size() == ablation_grid().size();
    for (const AblationCell& cell : report.cells) {
        ok = ok && cell.per_seed.size() == 3;
        ok = ok && cell.mean_accuracy >= 0.0 && cell.mean_accuracy <= 1.0;
    }
    const std::string table = emit_ablation(report, ReportFormat::kCsv);
    ok = ok && table.find("variant,wins") != std::string::npos;
    const double elapsed = seconds_since(start);
    return {ok, fmt("3 datasets x 5 variants x 3 seeds; win counts sum to 3; table well-formed; %.0fs",
                    elapsed)};
}

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    if (argc > 2 && std::strcmp(argv[1], "--only") == 0) only = std::atoi(argv[2]);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"gradient suite", criterion_gradients},
        {"coverage oracle", criterion_coverage},
        {"Goldbach desk check", criterion_goldbach},
        {"TargetDrop properties", criterion_targetdrop},
        {"desk-scale reproduction", criterion_desk_scale},
        {"overfit sanity", criterion_overfit},
        {"metric oracle", criterion_metrics},
        {"parser conformance", criterion_parsers},
        {"ablation harness", criterion_ablation},
    };

    bool all_pass = true;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (only != 0 && static_cast<int>(i) + 1 != only) continue;
        Outcome outcome;
        try {
            outcome = criteria[i].second();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        std::printf("criterion %zu (%s): %s — %s\n", i + 1, criteria[i].first.c_str(),
                    outcome.pass ? "PASS" : "FAIL", outcome.detail.c_str());
        std::fflush(stdout);
        all_pass = all_pass && outcome.pass;
    }
    std::printf(all_pass ? "acceptance: all criteria PASS\n" : "acceptance: FAILURES present\n");
    return all_pass ? 0 : 1;
}
