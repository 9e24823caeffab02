// Spawns the built CLI binary (path in $ADAFSNET_CLI) and checks exit codes
// and output contracts.

#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "support/synth.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args) {
    const char* cli = std::getenv("ADAFSNET_CLI");
    REQUIRE(cli != nullptr);
    const std::string cmd = std::string(cli) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult result;
    std::array<char, 512> buf;
    while (fgets(buf.data(), buf.size(), pipe)) result.output += buf.data();
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

fs::path fixture_dir() {
    const fs::path dir = fs::temp_directory_path() / "afsn_cli_fixtures";
    if (!fs::exists(dir)) {
        fs::create_directories(dir);
        auto spec = adafsnet::synth::SynthSpec{"CliToy", 12, 8, 20, 2, 0.25, 77};
        auto [train, test] = adafsnet::synth::make_pair(spec);
        std::ofstream(dir / "CliToy_TRAIN.tsv") << adafsnet::to_tsv(train);
        std::ofstream(dir / "CliToy_TEST.tsv") << adafsnet::to_tsv(test);
    }
    return dir;
}

}  // namespace

TEST_CASE("help exits 0 for every subcommand") {
    CHECK(run_cli("--help").exit_code == 0);
    for (const char* sub : {"plan", "train", "eval", "gradcheck", "ablate", "report"}) {
        const RunResult r = run_cli(std::string(sub) + " --help");
        INFO(sub);
        CHECK(r.exit_code == 0);
    }
}

TEST_CASE("plan prints sets and a coverage certificate") {
    const RunResult r = run_cli("plan --length 30");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("p_k = ") != std::string::npos);
    CHECK(r.output.find("P(1)") != std::string::npos);
    CHECK(r.output.find("P(3)") != std::string::npos);
    CHECK(r.output.find("coverage OK [1..30]") != std::string::npos);
    CHECK(r.output.find("RF 30:") != std::string::npos);
}

TEST_CASE("usage errors exit 1 with a machine-parsable line") {
    CHECK(run_cli("").exit_code == 1);
    CHECK(run_cli("plan").exit_code != 0);  // missing --length
    const RunResult r = run_cli("plan --length 30 --set no_such_key=1");
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("ERROR 1:") != std::string::npos);
}

TEST_CASE("missing dataset exits 2") {
    const fs::path dir = fixture_dir();
    const RunResult r = run_cli("train --dataset Nope --data-root " + dir.string());
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("ERROR 2:") != std::string::npos);
}

TEST_CASE("data root env var is honored when the flag is absent") {
    const fs::path dir = fixture_dir();
    const char* cli = std::getenv("ADAFSNET_CLI");
    REQUIRE(cli != nullptr);
    const std::string cmd = "ADAFSNET_DATA_ROOT=" + dir.string() + " " + cli +
                            " train --dataset Nope 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string output;
    std::array<char, 256> buf;
    while (fgets(buf.data(), buf.size(), pipe)) output += buf.data();
    const int status = pclose(pipe);
    // the root resolved (no usage error); the dataset itself is missing
    CHECK(WEXITSTATUS(status) == 2);
    CHECK(output.find("no dataset files") != std::string::npos);

    const std::string unset_cmd = std::string("env -u ADAFSNET_DATA_ROOT ") + cli +
                                  " train --dataset Nope 2>&1";
    FILE* pipe2 = popen(unset_cmd.c_str(), "r");
    REQUIRE(pipe2 != nullptr);
    while (fgets(buf.data(), buf.size(), pipe2)) {
    }
    CHECK(WEXITSTATUS(pclose(pipe2)) == 1);  // neither flag nor env var
}

TEST_CASE("numeric failures exit 3") {
    const fs::path dir = fixture_dir();
    const RunResult r = run_cli(
        "train --dataset CliToy --data-root " + dir.string() +
        " --out /tmp/afsn_cli_div --set rf_cap=8 --set filters_per_path=1 --set growth_rate=2"
        " --set max_epochs=5 --set warmup_epochs=1 --set lr=1e200");
    CHECK(r.exit_code == 3);
    CHECK(r.output.find("ERROR 3:") != std::string::npos);
}

TEST_CASE("gradcheck on a pristine build exits 0 with small errors") {
    const RunResult r = run_cli("gradcheck --cases 5");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("gradcheck OK") != std::string::npos);
}

TEST_CASE("train then eval round-trips through the checkpoint") {
    const fs::path dir = fixture_dir();
    const fs::path out = fs::temp_directory_path() / "afsn_cli_out";
    fs::remove_all(out);
    const std::string common =
        " --data-root " + dir.string() + " --out " + out.string() +
        " --set rf_cap=8 --set filters_per_path=1 --set growth_rate=2 --set max_epochs=6"
        " --set warmup_epochs=3 --set log_every=0";
    const RunResult tr = run_cli("train --dataset CliToy" + common);
    INFO(tr.output);
    CHECK(tr.exit_code == 0);
    CHECK(fs::exists(out / "CliToy.afsn"));
    CHECK(fs::exists(out / "CliToy_history.csv"));
    CHECK(fs::exists(out / "CliToy_eval.csv"));
    CHECK(tr.output.find("test accuracy") != std::string::npos);

    const RunResult ev = run_cli("eval --dataset CliToy --checkpoint " +
                                 (out / "CliToy.afsn").string() + " --data-root " + dir.string());
    INFO(ev.output);
    CHECK(ev.exit_code == 0);
    CHECK(ev.output.find("accuracy") != std::string::npos);

    // identical invocations produce identical output files
    const fs::path out2 = fs::temp_directory_path() / "afsn_cli_out2";
    fs::remove_all(out2);
    const std::string common2 =
        " --data-root " + dir.string() + " --out " + out2.string() +
        " --set rf_cap=8 --set filters_per_path=1 --set growth_rate=2 --set max_epochs=6"
        " --set warmup_epochs=3 --set log_every=0";
    const RunResult tr2 = run_cli("train --dataset CliToy" + common2);
    CHECK(tr2.exit_code == 0);
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    };
    CHECK(slurp(out / "CliToy.afsn") == slurp(out2 / "CliToy.afsn"));
    CHECK(slurp(out / "CliToy_history.csv") == slurp(out2 / "CliToy_history.csv"));

    const RunResult rep = run_cli("report " + (out / "CliToy_eval.csv").string() + " --out " +
                                  out.string() + " --format md");
    CHECK(rep.exit_code == 0);
    CHECK(fs::exists(out / "report.md"));
    CHECK(rep.output.find("MPCE") != std::string::npos);
}

TEST_CASE("ablate writes the variant grid and win table") {
    const fs::path dir = fixture_dir();
    const fs::path out = fs::temp_directory_path() / "afsn_cli_ablate";
    fs::remove_all(out);
    const RunResult r = run_cli(
        "ablate --dataset CliToy --data-root " + dir.string() + " --out " + out.string() +
        " --set rf_cap=8 --set filters_per_path=1 --set growth_rate=2 --set max_epochs=2"
        " --set warmup_epochs=1");
    INFO(r.output);
    CHECK(r.exit_code == 0);
    CHECK(fs::exists(out / "ablation.csv"));
    CHECK(fs::exists(out / "ablation.md"));
    CHECK(r.output.find("variant,wins") != std::string::npos);
    for (const char* variant : {"full", "no-targetdrop", "dense0", "dense1", "dense2"}) {
        CHECK(r.output.find(variant) != std::string::npos);
    }
}

TEST_CASE("history csv looks like epoch,loss,train_acc") {
    const fs::path out = fs::temp_directory_path() / "afsn_cli_out";
    std::ifstream in(out / "CliToy_history.csv");
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    CHECK(header == "epoch,loss,train_acc");
    std::string row;
    std::getline(in, row);
    CHECK(row.rfind("1,", 0) == 0);
}
