#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "aki/featurize.hpp"
#include "aki/labeling.hpp"
#include "aki/metrics.hpp"
#include "aki/systems.hpp"

namespace aki {

struct FoldPlan {
    int iteration = 0;
    int fold = 0;
    std::vector<std::size_t> fit_rows, cal_rows, test_rows;
};

struct MetricRecord {
    std::string system;
    int iteration = 0;
    int fold = 0;
    double roc_auc = 0, pr_auc = 0, brier = 0, log_loss = 0;
    bool defined = true;  // false for single-class or failed folds
    std::string note;
};

struct EvalReport {
    std::string system;
    int iterations = 0;
    int folds = 0;
    std::vector<MetricRecord> records;
    std::size_t undefined_folds = 0;

    // predictions[iteration][sample]; every sample scored once per iteration
    std::vector<std::vector<double>> predictions;
    std::vector<double> mean_prediction;  // per sample, over iterations
    std::vector<double> prediction_sd;    // per sample, over iterations

    CalibrationCurve pooled_curve;

    // fold-averaged diagnostics, aligned with diag_feature_names
    std::vector<std::string> diag_feature_names;
    std::vector<double> mean_gini;                 // tree systems
    std::vector<double> mean_stability_frequency;  // stability systems
};

// Deterministic near-equal partition of the unique patient ids.
std::vector<std::vector<std::string>> grouped_kfold(const std::vector<std::string>& patient_ids,
                                                    int k, std::uint64_t seed);

std::vector<FoldPlan> make_fold_plans(const FeatureMatrix& m, int iterations, int k,
                                      std::uint64_t seed, double fit_fraction = 0.75);

EvalReport run_cv(const SystemSpec& spec, const PipelineConfig& cfg, const FeatureMatrix& m,
                  int iterations, int k, std::uint64_t seed);

struct MetricSummary {
    double micro_mean = 0, micro_sd = 0;
    double macro_mean = 0, macro_sd = 0;
    std::size_t n_defined = 0, n_undefined = 0;
};

// selector picks one metric out of a record
MetricSummary micro_macro(const std::vector<MetricRecord>& records,
                          double (*selector)(const MetricRecord&));

struct RopeDecision {
    double p_higher = 0, p_rope = 0, p_lower = 0;
    double rope_half_width = 0;
};

RopeDecision correlated_ttest(const std::vector<double>& differences, double rope_width,
                              double test_fraction);

std::pair<double, double> bootstrap_ci(const std::vector<double>& values, int iterations,
                                       double level, std::uint64_t seed);

struct PatientLevel {
    std::vector<std::string> patient_ids;
    std::vector<double> mean_predicted;
    std::vector<double> observed;
    CalibrationCurve curve;  // restricted to patients with observed risk 0 or 1
};

PatientLevel patient_level(const std::vector<double>& mean_prediction,
                           const std::vector<int>& labels,
                           const std::vector<std::string>& patient_ids);

// L1-penalized least squares, coordinate descent, unpenalized intercept;
// objective (1/2n)*sum (y - b0 - x.b)^2 + alpha*||b||_1.
struct LassoFit {
    std::vector<double> coef;
    double intercept = 0.0;
};
LassoFit fit_lasso(const Rows& X, const std::vector<double>& y, double alpha,
                   int max_sweeps = 2000, double tol = 1e-9);

enum class ErrorFeatureSet { diagnoses, race, gender, age };
ErrorFeatureSet parse_error_feature_set(const std::string& s);
std::string to_string(ErrorFeatureSet s);

struct ErrorCoefficient {
    std::string feature;
    double mean = 0.0;
    double ci_lo = 0.0, ci_hi = 0.0;
    std::size_t nonzero_fits = 0;  // of the iterations*k fits
};

struct ErrorAnalysisReport {
    std::string stratum;  // "cases" or "controls"
    ErrorFeatureSet feature_set = ErrorFeatureSet::diagnoses;
    double alpha = 0.0;
    std::vector<ErrorCoefficient> coefficients;  // only features nonzero somewhere
};

ErrorAnalysisReport error_analysis(const FeatureMatrix& m, const std::vector<double>& abs_error,
                                   bool cases, ErrorFeatureSet set, double alpha, int iterations,
                                   int k, std::uint64_t seed);

struct UtilizationBin {
    std::size_t hospitalizations = 0;  // per-patient stay count key
    int label = 0;                     // stratified by outcome
    std::size_t n = 0;
    double mean_abs_error = 0.0;
    double mean_prediction_sd = 0.0;
};

std::vector<UtilizationBin> utilization_analysis(const EvalReport& report,
                                                 const FeatureMatrix& m);

struct LooDistance {
    std::string patient_id;
    std::size_t n_samples = 0;
    double l1_distance = 0.0;
};

std::vector<LooDistance> loo_patient_perturbation(const FeatureMatrix& m,
                                                  const PipelineConfig& cfg, double C = 2e-4);

std::vector<int> permute_labels(const std::vector<int>& labels, std::uint64_t seed);

struct ErrorHistogram {
    std::string group;  // "code_and_scr", "code_only", "scr_only"
    std::vector<std::size_t> bins;  // 1000 over [0,1]
    double mean = 0.0;
    std::size_t n = 0;
};

std::vector<ErrorHistogram> error_by_diagnosis_method(const std::vector<double>& abs_error,
                                                      const std::vector<std::string>& sample_ids,
                                                      const LabelMap& labels);

// report files: <prefix>.records.csv, <prefix>.summary.json,
// <prefix>.calibration.csv, <prefix>.predictions.csv and, when present,
// <prefix>.importance.csv / <prefix>.stability.csv
void write_eval_report(const EvalReport& report, const FeatureMatrix& m,
                       const std::string& prefix);
std::vector<MetricRecord> read_metric_records(const std::string& path);

}  // namespace aki
