#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "aki/common.hpp"
#include "aki/ehr.hpp"
#include "aki/labeling.hpp"
#include "aki/parallel.hpp"
#include "aki/synthgen.hpp"

using namespace aki;

namespace {

PatientStore parse_output(const SynthOutput& out, RejectReport& rejects) {
    PipelineConfig cfg;
    std::istringstream a(out.admin_csv), l(out.lab_csv), p(out.pharmacy_csv);
    return parse_tables(a, l, p, cfg, rejects);
}

// prevalence over stays that have at least one prior stay of the same patient
double eligible_prevalence(const std::vector<TruthRow>& truth) {
    std::map<std::string, std::size_t> seen;
    std::size_t eligible = 0, positive = 0;
    for (const auto& t : truth) {
        if (seen[t.patient_id]++ > 0) {
            ++eligible;
            positive += t.label;
        }
    }
    return static_cast<double>(positive) / static_cast<double>(eligible);
}

}  // namespace

TEST_CASE("generation is reproducible and seed-sensitive") {
    SynthConfig cfg;
    cfg.n_patients = 120;
    cfg.seed = 3;
    const SynthOutput a = generate(cfg);
    const SynthOutput b = generate(cfg);
    CHECK(a.admin_csv == b.admin_csv);
    CHECK(a.lab_csv == b.lab_csv);
    CHECK(a.pharmacy_csv == b.pharmacy_csv);
    REQUIRE(a.truth.size() == b.truth.size());
    for (std::size_t i = 0; i < a.truth.size(); ++i) {
        CHECK(a.truth[i].risk == b.truth[i].risk);
        CHECK(a.truth[i].label == b.truth[i].label);
    }
    cfg.seed = 4;
    CHECK(generate(cfg).admin_csv != a.admin_csv);
}

TEST_CASE("output does not depend on the thread count") {
    SynthConfig cfg;
    cfg.n_patients = 150;
    cfg.seed = 5;
    thread_count() = 1;
    const SynthOutput serial = generate(cfg);
    thread_count() = 4;
    const SynthOutput parallel = generate(cfg);
    thread_count() = 0;
    CHECK(serial.admin_csv == parallel.admin_csv);
    CHECK(serial.lab_csv == parallel.lab_csv);
    CHECK(serial.pharmacy_csv == parallel.pharmacy_csv);
    CHECK(serial.intercept == parallel.intercept);
}

TEST_CASE("the intercept search hits the requested prevalence") {
    SynthConfig cfg;
    cfg.n_patients = 800;
    cfg.seed = 7;
    const SynthOutput out = generate(cfg);
    CHECK(std::abs(out.achieved_prevalence - cfg.prevalence) <= 0.01);
    // the truth table reproduces the same rate
    CHECK(eligible_prevalence(out.truth) == doctest::Approx(out.achieved_prevalence).epsilon(1e-12));
}

TEST_CASE("the written tables parse cleanly and reproduce the planted labels") {
    SynthConfig cfg;
    cfg.n_patients = 600;
    cfg.seed = 11;
    const SynthOutput out = generate(cfg);
    RejectReport rejects;
    const PatientStore store = parse_output(out, rejects);
    CHECK(rejects.items.empty());
    CHECK(store.hospitalization_count() == out.truth.size());

    PipelineConfig pcfg;
    const LabelMap labels = label_all(store, pcfg);
    for (const auto& t : out.truth) {
        INFO("admit ", t.admit_id);
        REQUIRE(labels.count(t.admit_id));
        CHECK(labels.at(t.admit_id).aki() == (t.label == 1));
    }

    SUBCASE("every diagnosis-method cell is populated") {
        const Crosstab x = diagnosis_crosstab(labels);
        CHECK(x.code_and_scr > 0);
        CHECK(x.code_only > 0);
        CHECK(x.scr_only > 0);
        CHECK(x.neither > 0);
        CHECK(x.total() == out.truth.size());
    }
    SUBCASE("creatinine-mechanism cases carry a qualifying rise, negatives never do") {
        for (const auto& t : out.truth) {
            const LabelRecord& rec = labels.at(t.admit_id);
            if (t.label && !rec.by_code) CHECK(rec.by_scr);
            if (!t.label) {
                CHECK_FALSE(rec.by_scr);
                CHECK_FALSE(rec.by_code);
            }
        }
    }
}

TEST_CASE("exclusion paths are exercised when requested") {
    SynthConfig cfg;
    cfg.n_patients = 400;
    cfg.frac_minors = 0.15;
    cfg.frac_esrd = 0.25;
    cfg.seed = 13;
    const SynthOutput out = generate(cfg);
    RejectReport rejects;
    const PatientStore store = parse_output(out, rejects);
    PipelineConfig pcfg;
    const LabelMap labels = label_all(store, pcfg);
    const CohortView view = select_cohort(store, labels, pcfg);
    CHECK(view.excluded_under_18 > 0);
    CHECK(view.excluded_post_esrd > 0);
    CHECK(view.eligible.size() > 100);
}

TEST_CASE("zeroed coefficients plant a constant risk") {
    SynthConfig cfg;
    cfg.n_patients = 500;
    cfg.coef_prior_aki = cfg.coef_age = cfg.coef_max_un = cfg.coef_loop = 0.0;
    cfg.noise_scale = 0.0;
    cfg.seed = 17;
    const SynthOutput out = generate(cfg);
    CHECK(std::abs(out.achieved_prevalence - cfg.prevalence) <= 0.01);
    for (const auto& t : out.truth) {
        CHECK(t.risk == doctest::Approx(sigmoid(out.intercept)).epsilon(1e-12));
    }
}

TEST_CASE("invalid configurations are rejected up front") {
    SynthConfig cfg;
    cfg.n_patients = 0;
    CHECK_THROWS_AS(generate(cfg), ConfigError);
    cfg.n_patients = 10;
    cfg.prevalence = 1.5;
    CHECK_THROWS_AS(generate(cfg), ConfigError);
    cfg.prevalence = 0.062;
    cfg.mean_stays = 0.5;
    CHECK_THROWS_AS(generate(cfg), ConfigError);
    cfg.mean_stays = 3.6;
    cfg.frac_code_and_scr = 0.8;
    cfg.frac_code_only = 0.5;
    CHECK_THROWS_AS(generate(cfg), ConfigError);
}

TEST_CASE("write_synth produces the four table files") {
    SynthConfig cfg;
    cfg.n_patients = 60;  // enough eligible stays to hit the target prevalence
    cfg.seed = 19;
    const SynthOutput out = generate(cfg);
    const std::string dir = "test_synth_dir";
    write_synth(out, dir);
    for (const char* name : {"admin.csv", "labs.csv", "pharmacy.csv", "truth.csv"}) {
        std::ifstream f(dir + "/" + name);
        REQUIRE(f.good());
        std::string header;
        std::getline(f, header);
        CHECK_FALSE(header.empty());
    }
    std::filesystem::remove_all(dir);
}
