#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "adafsnet/config.hpp"
#include "adafsnet/error.hpp"

using namespace adafsnet;

namespace {

std::filesystem::path write_config(const std::string& text) {
    const auto path = std::filesystem::temp_directory_path() / "afsn_cfg_test.cfg";
    std::ofstream out(path);
    out << text;
    return path;
}

}  // namespace

TEST_CASE("defaults match the documented values") {
    const Options opts = load_options(std::nullopt, {});
    CHECK(opts.rf_cap == 48);
    CHECK(opts.filters_per_path == 4);
    CHECK(opts.growth_rate == 16);
    CHECK(opts.dense_block_count == 2);
    CHECK(opts.enable_targetdrop);
    CHECK(opts.preserved_kernels == 4);
    CHECK(opts.gamma == doctest::Approx(0.15));
    CHECK(opts.reduction_ratio == 16);
    CHECK(opts.drop_region == "auto");
    CHECK(opts.lr == doctest::Approx(0.001));
    CHECK(opts.batch_size == 16);
    CHECK(opts.max_epochs == 1500);
    CHECK(opts.warmup_epochs == 20);
    CHECK(opts.normalize);
}

TEST_CASE("config file with comments, blanks and overrides") {
    const auto path = write_config(
        "# training setup\n"
        "lr = 0.01\n"
        "\n"
        "batch_size=8   # inline comment\n"
        "enable_targetdrop = false\n");
    Options opts = load_options(path, {"lr=0.02", "seed=7"});
    CHECK(opts.lr == doctest::Approx(0.02));  // override shadows the file
    CHECK(opts.batch_size == 8);
    CHECK_FALSE(opts.enable_targetdrop);
    CHECK(opts.seed == 7);
    std::filesystem::remove(path);
}

TEST_CASE("unknown keys list the valid ones") {
    CHECK_THROWS_WITH_AS(load_options(std::nullopt, {"learning_rate=0.1"}),
                         doctest::Contains("valid keys"), UsageError);
    CHECK_THROWS_WITH_AS(load_options(std::nullopt, {"learning_rate=0.1"}),
                         doctest::Contains("rf_cap"), UsageError);
}

TEST_CASE("value and invariant validation") {
    CHECK_THROWS_AS(load_options(std::nullopt, {"batch_size=zero"}), UsageError);
    CHECK_THROWS_AS(load_options(std::nullopt, {"gamma=1.5"}), UsageError);
    CHECK_THROWS_AS(load_options(std::nullopt, {"max_epochs=5", "warmup_epochs=10"}), UsageError);
    CHECK_THROWS_AS(load_options(std::nullopt, {"dense_block_count=3"}), UsageError);
    CHECK_THROWS_AS(load_options(std::nullopt, {"drop_region=sometimes"}), UsageError);
    CHECK_THROWS_AS(load_options(std::nullopt, {"lr"}), UsageError);
    const Options opts = load_options(std::nullopt, {"drop_region=5"});
    CHECK(to_model_config(opts, 2).targetdrop.region_length == 5);
}

TEST_CASE("fingerprint tracks every key") {
    const Options base = load_options(std::nullopt, {});
    CHECK(options_fingerprint(base) == options_fingerprint(base));
    const Options changed = load_options(std::nullopt, {"growth_rate=8"});
    CHECK(options_fingerprint(base) != options_fingerprint(changed));
}

TEST_CASE("conversions carry fields through") {
    const Options opts =
        load_options(std::nullopt, {"gamma=0.25", "reduction_ratio=4", "warmup_epochs=3",
                                    "max_epochs=9", "best_checkpoint=true"});
    const ModelConfig mc = to_model_config(opts, 5);
    CHECK(mc.num_classes == 5);
    CHECK(mc.targetdrop.gamma == doctest::Approx(0.25));
    CHECK(mc.targetdrop.reduction_ratio == 4);
    const TrainConfig tc = to_train_config(opts);
    CHECK(tc.warmup_epochs == 3);
    CHECK(tc.max_epochs == 9);
    CHECK(tc.keep_best);
    const PlannerOptions po = to_planner_options(opts);
    CHECK(po.rf_cap == 48);
    CHECK(describe_options().find("rf_cap") != std::string::npos);
}
