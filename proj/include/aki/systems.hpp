#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aki/config.hpp"
#include "aki/featurize.hpp"
#include "aki/learners.hpp"

namespace aki {

enum class Weighting { none, patient, one_per_patient };

// A fully resolved training recipe; every published system name maps to one.
struct SystemSpec {
    std::string name;
    LearnerKind learner = LearnerKind::gbt;
    double C = 2e-3;
    bool anscombe_counts = false;
    Weighting weighting = Weighting::none;
    bool stability = false;
    StabilityConfig stability_cfg;
    FeatureMode mode = FeatureMode::all;
    bool permute_labels = false;  // negative control

    static SystemSpec resolve(const std::string& name);
    static const std::vector<std::string>& names();
};

// Trains one system on the fit rows and Platt-calibrates it on the
// calibration rows. The caller handles label permutation for controls.
TrainedModel fit_pipeline(const SystemSpec& spec, const PipelineConfig& cfg,
                          const FeatureMatrix& m, std::vector<std::size_t> fit_rows,
                          const std::vector<std::size_t>& cal_rows, std::uint64_t seed);

}  // namespace aki
