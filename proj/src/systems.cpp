#include "aki/systems.hpp"

#include <algorithm>

#include "aki/common.hpp"
#include "aki/rng.hpp"

namespace aki {

const std::vector<std::string>& SystemSpec::names() {
    static const std::vector<std::string> all = {
        "GBC",  "LR1",  "ALR1",  "HPLR1", "RLR1", "RHPLR1", "WGBC", "WLR1", "WHPLR1",
        "SGBC", "SLR1", "SHPLR1", "RGBC",  "MGBC", "MLR1",   "CLR",  "NGBC",
    };
    return all;
}

SystemSpec SystemSpec::resolve(const std::string& name) {
    SystemSpec s;
    s.name = name;
    if (name == "GBC") {
        s.learner = LearnerKind::gbt;
    } else if (name == "LR1") {
        s.learner = LearnerKind::l1_logistic;
        s.C = 2e-3;
    } else if (name == "ALR1") {
        s.learner = LearnerKind::l1_logistic;
        s.C = 2e-3;
        s.anscombe_counts = true;
    } else if (name == "HPLR1") {
        s.learner = LearnerKind::l1_logistic;
        s.C = 2e-4;
    } else if (name == "RLR1") {
        s.learner = LearnerKind::l1_logistic;
        s.stability = true;
        s.stability_cfg.C1 = 0.5;
        s.stability_cfg.C2 = 1.0;
        s.C = s.stability_cfg.C2;
    } else if (name == "RHPLR1") {
        s.learner = LearnerKind::l1_logistic;
        s.stability = true;
        s.stability_cfg.C1 = 0.2;
        s.stability_cfg.C2 = 1.0;
        s.C = s.stability_cfg.C2;
    } else if (name == "WGBC") {
        s.learner = LearnerKind::gbt;
        s.weighting = Weighting::patient;
    } else if (name == "WLR1") {
        s.learner = LearnerKind::l1_logistic;
        s.C = 2e-3;
        s.weighting = Weighting::patient;
    } else if (name == "WHPLR1") {
        s.learner = LearnerKind::l1_logistic;
        s.C = 2e-4;
        s.weighting = Weighting::patient;
    } else if (name == "SGBC") {
        s.learner = LearnerKind::gbt;
        s.weighting = Weighting::one_per_patient;
    } else if (name == "SLR1") {
        s.learner = LearnerKind::l1_logistic;
        s.C = 2e-3;
        s.weighting = Weighting::one_per_patient;
    } else if (name == "SHPLR1") {
        s.learner = LearnerKind::l1_logistic;
        s.C = 2e-4;
        s.weighting = Weighting::one_per_patient;
    } else if (name == "RGBC") {
        s.learner = LearnerKind::gbt;
        s.mode = FeatureMode::recent;
    } else if (name == "MGBC") {
        s.learner = LearnerKind::gbt;
        s.mode = FeatureMode::medications;
    } else if (name == "MLR1") {
        s.learner = LearnerKind::l1_logistic;
        s.C = 2e-3;
        s.mode = FeatureMode::medications;
    } else if (name == "CLR") {
        s.learner = LearnerKind::ridge_clinical;
        s.C = 1000.0;
        s.mode = FeatureMode::clinical;
    } else if (name == "NGBC") {
        s.learner = LearnerKind::gbt;
        s.permute_labels = true;
    } else {
        throw ConfigError("unknown system: " + name);
    }
    return s;
}

namespace {

std::vector<std::string> mode_feature_names(const SystemSpec& spec, const PipelineConfig& cfg,
                                            const FeatureMatrix& m) {
    switch (spec.mode) {
        case FeatureMode::all:
        case FeatureMode::recent:
            return m.dict.names;
        case FeatureMode::medications: {
            std::vector<std::string> out;
            for (const auto& name : m.dict.names) {
                if (is_medication_feature(name)) out.push_back(name);
            }
            if (out.empty()) {
                throw ConfigError("no medication features present in the matrix");
            }
            return out;
        }
        case FeatureMode::clinical: {
            std::vector<std::string> out;
            for (const auto& [name, kind] : clinical_features(cfg)) {
                if (!m.dict.index.count(name)) {
                    throw ConfigError("clinical feature missing from matrix: " + name +
                                      " (featurize with --mode clinical)");
                }
                out.push_back(name);
            }
            return out;
        }
    }
    throw ConfigError("bad feature mode");
}

}  // namespace

TrainedModel fit_pipeline(const SystemSpec& spec, const PipelineConfig& cfg,
                          const FeatureMatrix& m, std::vector<std::size_t> fit_rows,
                          const std::vector<std::size_t>& cal_rows, std::uint64_t seed) {
    TrainedModel model;
    model.kind = spec.learner;
    model.feature_names = mode_feature_names(spec, cfg, m);
    model.scaled = spec.learner != LearnerKind::gbt;

    std::vector<std::size_t> cols;
    cols.reserve(model.feature_names.size());
    for (const auto& name : model.feature_names) cols.push_back(m.dict.index.at(name));

    model.anscombe_mask.assign(cols.size(), 0);
    if (spec.anscombe_counts) {
        for (std::size_t j = 0; j < cols.size(); ++j) {
            model.anscombe_mask[j] = m.dict.kinds[cols[j]] == FeatureKind::count;
        }
    }

    std::vector<double> weights;
    if (spec.weighting == Weighting::one_per_patient) {
        std::vector<std::string> pids;
        pids.reserve(fit_rows.size());
        for (std::size_t i : fit_rows) pids.push_back(m.patient_ids[i]);
        const auto keep = sample_one_per_patient(pids, derive_seed(seed, {0x0e1a}));
        std::vector<std::size_t> reduced;
        reduced.reserve(keep.size());
        for (std::size_t k : keep) reduced.push_back(fit_rows[k]);
        fit_rows = std::move(reduced);
    } else if (spec.weighting == Weighting::patient) {
        std::vector<std::string> pids;
        pids.reserve(fit_rows.size());
        for (std::size_t i : fit_rows) pids.push_back(m.patient_ids[i]);
        weights = patient_weights(pids);
    }

    Rows X(fit_rows.size());
    std::vector<int> y(fit_rows.size());
    for (std::size_t k = 0; k < fit_rows.size(); ++k) {
        const std::size_t i = fit_rows[k];
        std::vector<double> row(cols.size());
        for (std::size_t j = 0; j < cols.size(); ++j) {
            double x = m.rows[i][cols[j]];
            if (model.anscombe_mask[j] && !is_missing(x)) x = anscombe(x);
            row[j] = x;
        }
        X[k] = std::move(row);
        y[k] = m.labels[i];
    }

    model.imputer = MostFrequentImputer::fit(X, &model.feature_names);
    model.imputer.apply(X);
    if (model.scaled) {
        model.scaler = StandardScaler::fit(X);
        model.scaler.apply(X);
    }

    if (spec.stability) {
        StabilityConfig scfg = spec.stability_cfg;
        scfg.seed = derive_seed(seed, {0x5e1ec7});
        model.stability = stability_select(X, y, weights, scfg);
        model.has_stability = true;
        model.stability_feature_names = model.feature_names;

        const auto& sel = model.stability.selected;
        std::vector<std::string> names;
        std::vector<std::uint8_t> mask;
        std::vector<double> fill, mean, sd;
        for (std::size_t j : sel) {
            names.push_back(model.feature_names[j]);
            mask.push_back(model.anscombe_mask[j]);
            fill.push_back(model.imputer.fill[j]);
            if (model.scaled) {
                mean.push_back(model.scaler.mean[j]);
                sd.push_back(model.scaler.sd[j]);
            }
        }
        for (auto& row : X) {
            std::vector<double> r;
            r.reserve(sel.size());
            for (std::size_t j : sel) r.push_back(row[j]);
            row = std::move(r);
        }
        model.feature_names = std::move(names);
        model.anscombe_mask = std::move(mask);
        model.imputer.fill = std::move(fill);
        model.scaler.mean = std::move(mean);
        model.scaler.sd = std::move(sd);
    }

    switch (spec.learner) {
        case LearnerKind::l1_logistic: {
            L1LogisticConfig lcfg;
            lcfg.C = spec.C;
            model.linear = fit_l1_logistic(X, y, weights, lcfg);
            break;
        }
        case LearnerKind::ridge_clinical:
            model.linear = fit_ridge_logistic(X, y, weights, spec.C, true);
            break;
        case LearnerKind::gbt:
            model.gbc = fit_gbc(X, y, weights, GbcConfig{});
            break;
    }

    if (!cal_rows.empty()) {
        const std::vector<double> scores = model.raw_scores(m, cal_rows);
        std::vector<int> cal_y;
        cal_y.reserve(cal_rows.size());
        for (std::size_t i : cal_rows) cal_y.push_back(m.labels[i]);
        model.calibrator = PlattCalibrator::fit(scores, cal_y);
        model.calibrated = true;
    }
    return model;
}

}  // namespace aki
