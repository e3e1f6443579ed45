#pragma once

#include <map>
#include <string>
#include <vector>

#include "aki/ehr.hpp"

namespace aki {

struct LabelRecord {
    std::string admit_id;
    bool by_code = false;
    bool by_scr = false;
    bool aki() const { return by_code || by_scr; }
};

using LabelMap = std::map<std::string, LabelRecord>;

struct CohortView {
    // patient id -> ordered eligible admit ids (only patients with >= 2 stays)
    std::map<std::string, std::vector<std::string>> eligible;
    std::size_t excluded_under_18 = 0;
    std::size_t excluded_post_esrd = 0;
    std::size_t excluded_single_stay_patients = 0;
};

struct TrainingSample {
    std::string patient_id;
    std::string target_admit_id;
    std::vector<std::string> prior_admit_ids;
    bool label = false;
    double weight = 1.0;
};

struct Crosstab {
    std::size_t code_and_scr = 0;
    std::size_t code_only = 0;
    std::size_t scr_only = 0;
    std::size_t neither = 0;
    std::size_t total() const { return code_and_scr + code_only + scr_only + neither; }
    std::size_t code_margin() const { return code_and_scr + code_only; }
    std::size_t scr_margin() const { return code_and_scr + scr_only; }
};

bool aki_by_code(const Hospitalization& h, const PipelineConfig& cfg);

// KDIGO creatinine rule over one stay's (time, value) series, times in hours:
// a pair (t0,v0), (t1,v1) with t0 < t1 qualifies when v1 - v0 >= 0.3 within
// 48 h or v1 >= 1.5 * v0 within 168 h, boundaries inclusive.
bool aki_by_scr(const std::vector<std::pair<double, double>>& series);

std::vector<std::pair<double, double>> scr_series(const Hospitalization& h,
                                                  const PipelineConfig& cfg);

LabelMap label_all(const PatientStore& store, const PipelineConfig& cfg);

CohortView select_cohort(const PatientStore& store, const LabelMap& labels,
                         const PipelineConfig& cfg);

std::vector<TrainingSample> build_samples(const CohortView& cohort, const LabelMap& labels);

Crosstab diagnosis_crosstab(const LabelMap& labels);

}  // namespace aki
