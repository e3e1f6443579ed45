#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace aki {

struct SynthConfig {
    std::size_t n_patients = 1000;
    double mean_stays = 3.6;           // geometric, support >= 1
    std::size_t max_stays = 20;
    double prevalence = 0.062;         // over stays with at least one prior stay

    // planted log-odds contributions
    double coef_prior_aki = 0.9;       // per prior AKI stay
    double coef_age = 0.5;             // per decade above 60
    double coef_max_un = 0.8;          // per 20 units of prior-stay max urea nitrogen above 30
    double coef_loop = 0.5;            // per prior loop-diuretic order
    double noise_scale = 0.5;

    // case mechanism mix; remainder is creatinine-only
    double frac_code_and_scr = 0.55;
    double frac_code_only = 0.25;

    double frac_minors = 0.02;         // under-18 patients (cohort exclusion path)
    double frac_esrd = 0.02;           // patients developing end-stage renal disease

    std::uint64_t seed = 1;
};

struct TruthRow {
    std::string admit_id;
    std::string patient_id;
    double risk = 0.0;  // planted probability; 0 risk recorded for first stays too
    int label = 0;
};

struct SynthOutput {
    std::string admin_csv, lab_csv, pharmacy_csv;
    std::vector<TruthRow> truth;
    double intercept = 0.0;             // calibrated to hit the target prevalence
    double achieved_prevalence = 0.0;   // over sample-eligible stays
};

SynthOutput generate(const SynthConfig& cfg);

// writes admin.csv, labs.csv, pharmacy.csv, truth.csv under dir
void write_synth(const SynthOutput& out, const std::string& dir);

}  // namespace aki
