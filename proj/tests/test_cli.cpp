#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#ifndef AKI_BIN
#error "AKI_BIN must point at the pipeline binary"
#endif

namespace {

namespace fs = std::filesystem;

const fs::path kDir = fs::temp_directory_path() / "aki_cli_test";

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

int run(const std::string& args) {
    const std::string cmd = std::string(AKI_BIN) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return rc < 0 ? rc : WEXITSTATUS(static_cast<unsigned>(rc));
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::size_t line_count(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) ++n;
    return n;
}

struct DirGuard {
    DirGuard() {
        fs::remove_all(kDir);
        fs::create_directories(kDir);
    }
    ~DirGuard() { fs::remove_all(kDir); }
};

std::string tables() {
    return "--admin " + q(kDir / "synth/admin.csv") + " --labs " + q(kDir / "synth/labs.csv") +
           " --pharmacy " + q(kDir / "synth/pharmacy.csv");
}

}  // namespace

TEST_CASE("the full pipeline chain runs end to end") {
    DirGuard guard;
    REQUIRE(run("--seed 5 synth --n-patients 150 --out " + q(kDir / "synth")) == 0);
    for (const char* f : {"admin.csv", "labs.csv", "pharmacy.csv", "truth.csv"}) {
        CHECK(fs::exists(kDir / "synth" / f));
    }

    REQUIRE(run("ingest " + tables() + " --out " + q(kDir / "ingest")) == 0);
    CHECK(fs::exists(kDir / "ingest.summary.json"));
    CHECK(line_count(kDir / "ingest.rejects.csv") == 1);  // header only

    REQUIRE(run("label " + tables() + " --out " + q(kDir / "label")) == 0);
    CHECK(fs::exists(kDir / "label.labels.csv"));
    CHECK(fs::exists(kDir / "label.cohort.csv"));
    CHECK(fs::exists(kDir / "label.crosstab.json"));

    REQUIRE(run("featurize " + tables() + " --labels " + q(kDir / "label.labels.csv") +
                " --cohort " + q(kDir / "label.cohort.csv") + " --min-support 5 --out " +
                q(kDir / "matrix")) == 0);
    CHECK(fs::exists(kDir / "matrix.dict.csv"));
    CHECK(fs::exists(kDir / "matrix.samples.csv"));
    CHECK(fs::exists(kDir / "matrix.features.csv"));

    REQUIRE(run("--seed 5 train --matrix " + q(kDir / "matrix") +
                " --system LR1 --out " + q(kDir / "model.json")) == 0);
    CHECK(fs::exists(kDir / "model.json"));

    REQUIRE(run("--seed 5 --iterations 2 --folds 3 evaluate --matrix " + q(kDir / "matrix") +
                " --system LR1 --out " + q(kDir / "eval")) == 0);
    CHECK(fs::exists(kDir / "eval.records.csv"));
    CHECK(fs::exists(kDir / "eval.summary.json"));
    CHECK(fs::exists(kDir / "eval.predictions.csv"));
    CHECK(fs::exists(kDir / "eval.calibration.csv"));
    CHECK(fs::exists(kDir / "eval.utilization.csv"));
    CHECK(fs::exists(kDir / "eval.patient_calibration.csv"));
    CHECK(line_count(kDir / "eval.records.csv") == 7);  // header + 2x3 folds

    SUBCASE("report files are byte-identical across reruns") {
        REQUIRE(run("--seed 5 --iterations 2 --folds 3 evaluate --matrix " + q(kDir / "matrix") +
                    " --system LR1 --out " + q(kDir / "eval2")) == 0);
        CHECK(slurp(kDir / "eval2.records.csv") == slurp(kDir / "eval.records.csv"));
        CHECK(slurp(kDir / "eval2.predictions.csv") == slurp(kDir / "eval.predictions.csv"));
    }

    SUBCASE("comparing a run against itself concentrates in the rope") {
        REQUIRE(run("--folds 3 compare " + q(kDir / "eval.records.csv") + " " +
                    q(kDir / "eval.records.csv") + " --out " + q(kDir / "cmp.csv")) == 0);
        const std::string cmp = slurp(kDir / "cmp.csv");
        CHECK(cmp.find("system_a,system_b,metric,rope_width,p_higher,p_rope,p_lower") == 0);
        CHECK(cmp.find("roc_auc,0.01,0,1,0") != std::string::npos);
        CHECK(cmp.find("brier,0.001,0,1,0") != std::string::npos);
    }

    SUBCASE("error analysis consumes the evaluation outputs") {
        REQUIRE(run("--seed 5 --iterations 2 --folds 3 error-analysis --matrix " +
                    q(kDir / "matrix") + " --predictions " + q(kDir / "eval.predictions.csv") +
                    " --labels " + q(kDir / "label.labels.csv") + " --stratum controls --out " +
                    q(kDir / "err")) == 0);
        CHECK(fs::exists(kDir / "err.coefficients.csv"));
        CHECK(fs::exists(kDir / "err.by_method.csv"));
    }
}

TEST_CASE("an unknown system name exits with code 2 and lists the systems") {
    DirGuard guard;
    const std::string cmd = std::string(AKI_BIN) + " train --matrix " + q(kDir / "matrix") +
                            " --system NOPE 2> " + q(kDir / "stderr.txt") + " > /dev/null";
    const int rc = std::system(cmd.c_str());
    CHECK(WEXITSTATUS(static_cast<unsigned>(rc)) == 2);
    const std::string err = slurp(kDir / "stderr.txt");
    CHECK(err.find("unknown system 'NOPE'") != std::string::npos);
    CHECK(err.find("GBC") != std::string::npos);
    CHECK(err.find("CLR") != std::string::npos);
}

TEST_CASE("a missing input artifact exits with code 3") {
    DirGuard guard;
    CHECK(run("ingest --admin " + q(kDir / "nope.csv") + " --labs " + q(kDir / "nope.csv") +
              " --pharmacy " + q(kDir / "nope.csv")) == 3);
    CHECK(run("evaluate --matrix " + q(kDir / "ghost") + " --system GBC") == 3);
    CHECK(run("--config " + q(kDir / "ghost.json") + " synth --out " + q(kDir / "synth")) == 3);
}

TEST_CASE("bad usage is rejected by the argument parser") {
    CHECK(run("") != 0);               // a subcommand is required
    CHECK(run("train") != 0);          // --matrix and --system are required
    CHECK(run("no-such-command") != 0);
}
