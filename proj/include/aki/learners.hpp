#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aki/featurize.hpp"

namespace aki {

using Rows = std::vector<std::vector<double>>;

struct MostFrequentImputer {
    std::vector<double> fill;
    // names, when given, make the fully-missing-feature error actionable
    static MostFrequentImputer fit(const Rows& X, const std::vector<std::string>* names = nullptr);
    void apply(Rows& X) const;
    void apply(std::vector<double>& row) const;
};

struct StandardScaler {
    std::vector<double> mean, sd;  // sd == 0 features pass through centered only
    static StandardScaler fit(const Rows& X);
    void apply(Rows& X) const;
    void apply(std::vector<double>& row) const;
};

struct LinearModel {
    std::vector<double> coef;
    double intercept = 0.0;
    double decision(const std::vector<double>& row) const;
};

struct L1LogisticConfig {
    double C = 2e-3;  // inverse penalty weight; penalty is (1/C) * ||beta||_1
    bool balanced = true;
    double tol = 1e-6;      // max coordinate update per sweep
    double kkt_tol = 1e-5;  // subgradient residual at the reported optimum
    int max_sweeps = 1000;
    // per-feature multiplier on the penalty (stability selection); empty = 1
    std::vector<double> penalty_scale;
};

struct L1FitInfo {
    bool converged = true;
    int sweeps = 0;
    double kkt_residual = 0.0;
};

LinearModel fit_l1_logistic(const Rows& X, const std::vector<int>& y,
                            const std::vector<double>& weights, const L1LogisticConfig& cfg,
                            L1FitInfo* info = nullptr);

// Near-unpenalized ridge logistic (the clinical baseline); Newton's method.
LinearModel fit_ridge_logistic(const Rows& X, const std::vector<int>& y,
                               const std::vector<double>& weights, double C, bool balanced);

struct TreeNode {
    int feature = -1;  // -1 = leaf
    double threshold = 0.0;
    double value = 0.0;  // leaf value
    double gain = 0.0;   // weighted SSE decrease at this split
    int left = -1, right = -1;
};

struct Tree {
    std::vector<TreeNode> nodes;
    double predict(const std::vector<double>& row) const;
};

struct GbcConfig {
    int n_estimators = 100;
    double learning_rate = 0.1;
    int max_depth = 2;
    int min_samples_split = 150;
    int min_samples_leaf = 100;
};

struct GbcModel {
    GbcConfig config;
    double init_score = 0.0;  // prior log-odds
    std::vector<Tree> trees;
    std::vector<double> train_deviance;  // per stage, after the stage was added
    double decision(const std::vector<double>& row) const;  // log-odds
    double predict_proba(const std::vector<double>& row) const;
};

GbcModel fit_gbc(const Rows& X, const std::vector<int>& y, const std::vector<double>& weights,
                 const GbcConfig& cfg);

// Normalized total impurity decrease per feature; sums to 1 when any split exists.
std::vector<double> gini_importance(const GbcModel& model, std::size_t n_features);

struct PlattCalibrator {
    double a = 1.0, b = 0.0;
    double operator()(double score) const;
    // Regularized ML fit with Platt's smoothed targets.
    static PlattCalibrator fit(const std::vector<double>& scores, const std::vector<int>& labels);
};

struct StabilityConfig {
    double C1 = 0.5;
    double C2 = 1.0;
    double fraction = 0.75;
    int resamples = 50;
    double threshold = 0.25;
    double weaken_lo = 0.5, weaken_hi = 1.0;  // per-feature penalty weakening range
    bool balanced = true;
    std::uint64_t seed = 0;
};

struct StabilityReport {
    std::vector<double> frequency;  // per feature, multiples of 1/resamples
    double threshold = 0.0;
    std::vector<std::size_t> selected;
};

StabilityReport stability_select(const Rows& X, const std::vector<int>& y,
                                 const std::vector<double>& weights, const StabilityConfig& cfg);

// weight = 1 / (number of samples from that patient); per-patient sum is 1
std::vector<double> patient_weights(const std::vector<std::string>& patient_ids);

// uniformly one sample index per patient, deterministic per seed
std::vector<std::size_t> sample_one_per_patient(const std::vector<std::string>& patient_ids,
                                                std::uint64_t seed);

enum class LearnerKind { l1_logistic, gbt, ridge_clinical };

// Fitted pipeline: anscombe? -> impute -> scale? -> score -> calibrate?.
struct TrainedModel {
    LearnerKind kind = LearnerKind::l1_logistic;
    std::vector<std::string> feature_names;        // model feature space
    std::vector<std::uint8_t> anscombe_mask;       // per model feature
    MostFrequentImputer imputer;
    bool scaled = false;
    StandardScaler scaler;
    LinearModel linear;
    GbcModel gbc;
    bool calibrated = false;
    PlattCalibrator calibrator;
    bool has_stability = false;
    StabilityReport stability;
    std::vector<std::string> stability_feature_names;  // pre-selection space

    double raw_score(const std::vector<double>& model_row) const;
    double predict_row(const std::vector<double>& model_row) const;

    // Extracts the named columns from a matrix row and applies
    // anscombe/impute/scale; `cols` comes from the matrix dictionary.
    std::vector<double> transform(const FeatureMatrix& m, std::size_t row,
                                  const std::vector<std::size_t>& cols) const;

    // Maps matrix columns by feature name, then transforms and scores.
    std::vector<double> predict(const FeatureMatrix& m, const std::vector<std::size_t>& rows) const;
    std::vector<double> raw_scores(const FeatureMatrix& m,
                                   const std::vector<std::size_t>& rows) const;

    void save(const std::string& path) const;
    static TrainedModel load(const std::string& path);
};

}  // namespace aki
