#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "aki/ehr.hpp"
#include "aki/labeling.hpp"

namespace aki {

// Count-like features default to 0 when absent; continuous statistics default
// to missing (NaN), never zero.
enum class FeatureKind { continuous, count };

struct FeatureDict {
    std::vector<std::string> names;
    std::vector<FeatureKind> kinds;
    std::unordered_map<std::string, std::size_t> index;

    std::size_t add(const std::string& name, FeatureKind kind) {
        auto it = index.find(name);
        if (it != index.end()) return it->second;
        const std::size_t id = names.size();
        names.push_back(name);
        kinds.push_back(kind);
        index.emplace(name, id);
        return id;
    }
    std::size_t size() const { return names.size(); }
    double default_value(std::size_t j) const;
};

struct FeatureMatrix {
    FeatureDict dict;
    std::vector<std::vector<double>> rows;  // sample-aligned, NaN = missing
    std::vector<std::string> sample_ids;    // target admit ids
    std::vector<std::string> patient_ids;
    std::vector<int> labels;
    std::vector<std::size_t> n_priors;  // per-patient prior-stay count of each sample

    std::size_t n_samples() const { return rows.size(); }
    std::size_t n_features() const { return dict.size(); }
};

// One hospitalization reduced by the within-stay aggregator F.
struct StayRow {
    // F.family -> value for continuous labs ("max.CREATININE"); present only
    // when the stay has readings; variance is population variance, 0 for a
    // single reading.
    std::map<std::string, double> lab_stats;
    // family -> within-stay count; "count.dx.584", "count.abn.high CREATININE",
    // "los", later "nonpresent.dx"
    std::map<std::string, double> counts;
    double age = 0.0;
    std::string race, gender, marital_status;
    std::vector<std::string> insurances;
};

struct FeatureVector {
    std::map<std::string, double> values;
    std::map<std::string, FeatureKind> kinds;
};

enum class FeatureMode { all, medications, clinical, recent };

FeatureMode parse_feature_mode(const std::string& s);
std::string to_string(FeatureMode m);

StayRow aggregate_within(const Hospitalization& h, const PipelineConfig& cfg);

// G over the ordered per-stay rows; "first"/"last" chronological, statistics
// skip missing per-stay entries.
FeatureVector aggregate_across(const std::vector<const StayRow*>& rows);

// Non-present counts: maxima are fitted once, then applied as a transform.
struct NonpresentMax {
    double dx = 0.0, cpt_px = 0.0, drg = 0.0;
};
NonpresentMax fit_nonpresent(const std::vector<const StayRow*>& rows);
void add_nonpresent_counts(StayRow& row, const NonpresentMax& maxima);

double anscombe(double x);

bool is_medication_feature(const std::string& name);
std::vector<std::pair<std::string, FeatureKind>> clinical_features(const PipelineConfig& cfg);

FeatureVector subset_features(const FeatureVector& vec, FeatureMode mode,
                              const PipelineConfig& cfg);

std::vector<std::string> sparsity_filter(const FeatureMatrix& m, std::size_t min_support);
FeatureMatrix keep_features(const FeatureMatrix& m, const std::vector<std::string>& names);

// Anscombe transform of every count column (the ALR1 variant).
void apply_anscombe(FeatureMatrix& m);

class Featurizer {
  public:
    Featurizer(const PipelineConfig& cfg, FeatureMode mode) : cfg_(cfg), mode_(mode) {}

    FeatureMatrix build(const PatientStore& store,
                        const std::vector<TrainingSample>& samples) const;

  private:
    const PipelineConfig& cfg_;
    FeatureMode mode_;
};

void write_matrix(const FeatureMatrix& m, const std::string& prefix);
FeatureMatrix read_matrix(const std::string& prefix);

}  // namespace aki
