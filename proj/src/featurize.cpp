#include "aki/featurize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "aki/common.hpp"
#include "aki/csv.hpp"
#include "aki/parallel.hpp"

namespace aki {

double FeatureDict::default_value(std::size_t j) const {
    return kinds[j] == FeatureKind::count ? 0.0 : kMissing;
}

FeatureMode parse_feature_mode(const std::string& s) {
    if (s == "all") return FeatureMode::all;
    if (s == "medications") return FeatureMode::medications;
    if (s == "clinical") return FeatureMode::clinical;
    if (s == "recent") return FeatureMode::recent;
    throw ConfigError("unknown feature mode: " + s + " (expected all|medications|clinical|recent)");
}

std::string to_string(FeatureMode m) {
    switch (m) {
        case FeatureMode::all: return "all";
        case FeatureMode::medications: return "medications";
        case FeatureMode::clinical: return "clinical";
        default: return "recent";
    }
}

namespace {

struct Stats {
    double min = 0, max = 0, mean = 0, var = 0, sum = 0;
};

Stats compute_stats(const std::vector<double>& v) {
    Stats s;
    s.min = v[0];
    s.max = v[0];
    for (double x : v) {
        s.min = std::min(s.min, x);
        s.max = std::max(s.max, x);
        s.sum += x;
    }
    s.mean = s.sum / static_cast<double>(v.size());
    double ss = 0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.var = ss / static_cast<double>(v.size());  // population variance
    return s;
}

const char* kGNames[5] = {"min", "mean", "max", "sum", "var"};

double g_stat(const Stats& s, int g) {
    switch (g) {
        case 0: return s.min;
        case 1: return s.mean;
        case 2: return s.max;
        case 3: return s.sum;
        default: return s.var;
    }
}

std::string code_family(CodeSystem sys) {
    switch (sys) {
        case CodeSystem::icd9_dx: return "dx";
        case CodeSystem::icd9_px: return "px";
        case CodeSystem::cpt4: return "cpt";
        default: return "drg";
    }
}

}  // namespace

StayRow aggregate_within(const Hospitalization& h, const PipelineConfig& cfg) {
    (void)cfg;
    StayRow row;
    row.age = h.age_at_admission;
    row.race = h.race;
    row.gender = h.gender;
    row.marital_status = h.marital_status;
    row.insurances = h.insurances;

    std::map<std::string, std::vector<double>> by_test;
    for (const auto& lab : h.labs) {
        if (!is_missing(lab.value)) by_test[lab.test_name].push_back(lab.value);
        if (lab.flag != AbnormalFlag::none) {
            row.counts["count.abn." + to_string(lab.flag) + " " + lab.test_name] += 1.0;
        }
    }
    for (const auto& [test, values] : by_test) {
        const Stats s = compute_stats(values);
        row.lab_stats["min." + test] = s.min;
        row.lab_stats["max." + test] = s.max;
        row.lab_stats["mean." + test] = s.mean;
        row.lab_stats["var." + test] = s.var;
        row.lab_stats["sum." + test] = s.sum;
    }

    for (const auto& med : h.meds) {
        row.counts["count.med." + med.description] += 1.0;
        if (!med.pharm_class.empty()) row.counts["count.pclass." + med.pharm_class] += 1.0;
        if (!med.pharm_subclass.empty()) row.counts["count.psub." + med.pharm_subclass] += 1.0;
        if (!med.therapeutic_class.empty()) {
            row.counts["count.tclass." + med.therapeutic_class] += 1.0;
        }
    }
    for (const auto& code : h.codes) {
        row.counts["count." + code_family(code.system) + "." + code.precision_key] += 1.0;
    }
    for (const auto& loc : h.locations) row.counts["count.loc." + loc] += 1.0;
    if (!h.discharge_disposition.empty()) {
        row.counts["count.disp." + h.discharge_disposition] += 1.0;
    }
    row.counts["count.admitday." + h.admit_day] += 1.0;
    row.counts["count.dischargeday." + h.discharge_day] += 1.0;
    row.counts["los"] = h.length_of_stay_days();
    return row;
}

FeatureVector aggregate_across(const std::vector<const StayRow*>& rows) {
    if (rows.empty()) throw InputError("aggregate_across: empty hospitalization list");
    FeatureVector out;
    auto put = [&out](const std::string& name, double value, FeatureKind kind) {
        out.values[name] = value;
        out.kinds[name] = kind;
    };

    double age = rows[0]->age;
    for (const auto* r : rows) age = std::max(age, r->age);
    put("max.age", age, FeatureKind::continuous);
    put("first.race." + rows.front()->race, 1.0, FeatureKind::count);
    const StayRow& last = *rows.back();
    put("last.gender." + last.gender, 1.0, FeatureKind::count);
    put("last.marital." + last.marital_status, 1.0, FeatureKind::count);
    for (const auto& ins : last.insurances) {
        put("last.insurance." + ins, 1.0, FeatureKind::count);
    }

    std::map<std::string, char> count_keys;
    for (const auto* r : rows) {
        for (const auto& [k, v] : r->counts) count_keys[k] = 0;
    }
    std::vector<double> seq;
    for (const auto& [key, unused] : count_keys) {
        seq.clear();
        for (const auto* r : rows) {
            auto it = r->counts.find(key);
            seq.push_back(it == r->counts.end() ? 0.0 : it->second);
        }
        const Stats s = compute_stats(seq);
        if (key.rfind("count.abn.", 0) == 0) {
            for (int g = 0; g < 5; ++g) {
                put(std::string(kGNames[g]) + "." + key, g_stat(s, g), FeatureKind::count);
            }
        } else {
            put("sum." + key, s.sum, FeatureKind::count);
        }
    }

    std::map<std::string, char> stat_keys;
    for (const auto* r : rows) {
        for (const auto& [k, v] : r->lab_stats) stat_keys[k] = 0;
    }
    for (const auto& [key, unused] : stat_keys) {
        seq.clear();
        for (const auto* r : rows) {
            auto it = r->lab_stats.find(key);
            if (it != r->lab_stats.end()) seq.push_back(it->second);  // skip missing stays
        }
        if (seq.empty()) continue;
        const Stats s = compute_stats(seq);
        for (int g = 0; g < 5; ++g) {
            put(std::string(kGNames[g]) + "." + key, g_stat(s, g), FeatureKind::continuous);
        }
    }
    return out;
}

namespace {

double family_list_length(const StayRow& row, const std::string& prefix) {
    double n = 0;
    for (auto it = row.counts.lower_bound(prefix); it != row.counts.end(); ++it) {
        if (it->first.rfind(prefix, 0) != 0) break;
        n += it->second;
    }
    return n;
}

}  // namespace

NonpresentMax fit_nonpresent(const std::vector<const StayRow*>& rows) {
    NonpresentMax m;
    for (const auto* r : rows) {
        m.dx = std::max(m.dx, family_list_length(*r, "count.dx."));
        m.cpt_px = std::max(m.cpt_px, family_list_length(*r, "count.cpt."));
        m.drg = std::max(m.drg, family_list_length(*r, "count.drg."));
    }
    return m;
}

void add_nonpresent_counts(StayRow& row, const NonpresentMax& maxima) {
    row.counts["nonpresent.dx"] = maxima.dx - family_list_length(row, "count.dx.");
    row.counts["nonpresent.cpt_px"] = maxima.cpt_px - family_list_length(row, "count.cpt.");
    row.counts["nonpresent.drg"] = maxima.drg - family_list_length(row, "count.drg.");
}

double anscombe(double x) {
    if (x < 0.0) throw InputError("anscombe: negative input");
    return 2.0 * std::sqrt(x + 3.0 / 8.0);
}

bool is_medication_feature(const std::string& name) {
    return name.find("count.med.") != std::string::npos ||
           name.find("count.pclass.") != std::string::npos ||
           name.find("count.psub.") != std::string::npos ||
           name.find("count.tclass.") != std::string::npos;
}

std::vector<std::pair<std::string, FeatureKind>> clinical_features(const PipelineConfig& cfg) {
    return {
        {"max.age", FeatureKind::continuous},
        {"sum.count.dx." + cfg.clinical_aki_key, FeatureKind::count},
        {"sum.count.dx." + cfg.clinical_ckd_key, FeatureKind::count},
        {"sum.count.dx." + cfg.clinical_diabetes_key, FeatureKind::count},
        {"sum.count.dx." + cfg.clinical_heart_failure_key, FeatureKind::count},
    };
}

FeatureVector subset_features(const FeatureVector& vec, FeatureMode mode,
                              const PipelineConfig& cfg) {
    switch (mode) {
        case FeatureMode::all:
        case FeatureMode::recent:
            return vec;
        case FeatureMode::medications: {
            FeatureVector out;
            for (const auto& [name, value] : vec.values) {
                if (is_medication_feature(name)) {
                    out.values[name] = value;
                    out.kinds[name] = vec.kinds.at(name);
                }
            }
            return out;
        }
        case FeatureMode::clinical: {
            FeatureVector out;
            for (const auto& [name, kind] : clinical_features(cfg)) {
                auto it = vec.values.find(name);
                out.values[name] = it != vec.values.end()
                                       ? it->second
                                       : (kind == FeatureKind::count ? 0.0 : kMissing);
                out.kinds[name] = kind;
            }
            return out;
        }
    }
    throw ConfigError("unknown feature mode");
}

namespace {

// Recent mode: G is the identity over the single most recent prior stay.
FeatureVector recent_vector(const StayRow& row) {
    FeatureVector out;
    auto put = [&out](const std::string& name, double value, FeatureKind kind) {
        out.values[name] = value;
        out.kinds[name] = kind;
    };
    put("recent.age", row.age, FeatureKind::continuous);
    put("recent.race." + row.race, 1.0, FeatureKind::count);
    put("recent.gender." + row.gender, 1.0, FeatureKind::count);
    put("recent.marital." + row.marital_status, 1.0, FeatureKind::count);
    for (const auto& ins : row.insurances) put("recent.insurance." + ins, 1.0, FeatureKind::count);
    for (const auto& [k, v] : row.counts) put("recent." + k, v, FeatureKind::count);
    for (const auto& [k, v] : row.lab_stats) put("recent." + k, v, FeatureKind::continuous);
    return out;
}

}  // namespace

FeatureMatrix Featurizer::build(const PatientStore& store,
                                const std::vector<TrainingSample>& samples) const {
    // Every prior stay referenced by any sample, reduced once.
    std::map<std::string, StayRow> stay_rows;
    for (const auto& s : samples) {
        if (s.prior_admit_ids.empty()) throw InputError("sample with no prior hospitalizations");
        for (const auto& id : s.prior_admit_ids) {
            if (!store.find(id)) throw InputError("sample references unknown admit id: " + id);
            stay_rows.emplace(id, StayRow{});
        }
    }
    std::vector<std::pair<const std::string*, StayRow*>> work;
    work.reserve(stay_rows.size());
    for (auto& [id, row] : stay_rows) work.emplace_back(&id, &row);
    parallel_for(work.size(), [&](std::size_t i) {
        *work[i].second = aggregate_within(*store.find(*work[i].first), cfg_);
    });

    std::vector<const StayRow*> all_rows;
    all_rows.reserve(stay_rows.size());
    for (const auto& [id, row] : stay_rows) all_rows.push_back(&row);
    const NonpresentMax maxima = fit_nonpresent(all_rows);
    for (auto& [id, row] : stay_rows) add_nonpresent_counts(row, maxima);

    std::vector<FeatureVector> vectors(samples.size());
    parallel_for(samples.size(), [&](std::size_t i) {
        const auto& s = samples[i];
        std::vector<const StayRow*> rows;
        rows.reserve(s.prior_admit_ids.size());
        for (const auto& id : s.prior_admit_ids) rows.push_back(&stay_rows.at(id));
        if (mode_ == FeatureMode::recent) {
            vectors[i] = recent_vector(*rows.back());
        } else {
            vectors[i] = subset_features(aggregate_across(rows), mode_, cfg_);
        }
    });

    FeatureMatrix m;
    if (mode_ == FeatureMode::clinical) {
        for (const auto& [name, kind] : clinical_features(cfg_)) m.dict.add(name, kind);
    }
    for (const auto& vec : vectors) {
        for (const auto& [name, value] : vec.values) m.dict.add(name, vec.kinds.at(name));
    }
    m.rows.resize(samples.size());
    parallel_for(samples.size(), [&](std::size_t i) {
        std::vector<double>& row = m.rows[i];
        row.resize(m.dict.size());
        for (std::size_t j = 0; j < m.dict.size(); ++j) row[j] = m.dict.default_value(j);
        for (const auto& [name, value] : vectors[i].values) {
            row[m.dict.index.at(name)] = value;
        }
    });
    for (const auto& s : samples) {
        m.sample_ids.push_back(s.target_admit_id);
        m.patient_ids.push_back(s.patient_id);
        m.labels.push_back(s.label ? 1 : 0);
        m.n_priors.push_back(s.prior_admit_ids.size());
    }
    return m;
}

std::vector<std::string> sparsity_filter(const FeatureMatrix& m, std::size_t min_support) {
    std::vector<std::size_t> support(m.n_features(), 0);
    for (const auto& row : m.rows) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (is_missing(row[j])) continue;
            if (m.dict.kinds[j] == FeatureKind::count && row[j] == 0.0) continue;
            ++support[j];
        }
    }
    std::vector<std::string> retained;
    for (std::size_t j = 0; j < m.n_features(); ++j) {
        if (support[j] >= min_support) retained.push_back(m.dict.names[j]);
    }
    return retained;
}

FeatureMatrix keep_features(const FeatureMatrix& m, const std::vector<std::string>& names) {
    FeatureMatrix out;
    out.sample_ids = m.sample_ids;
    out.patient_ids = m.patient_ids;
    out.labels = m.labels;
    out.n_priors = m.n_priors;
    std::vector<std::size_t> cols;
    for (const auto& name : names) {
        auto it = m.dict.index.find(name);
        if (it == m.dict.index.end()) throw ConfigError("unknown feature: " + name);
        cols.push_back(it->second);
        out.dict.add(name, m.dict.kinds[it->second]);
    }
    out.rows.resize(m.rows.size());
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
        out.rows[i].reserve(cols.size());
        for (std::size_t c : cols) out.rows[i].push_back(m.rows[i][c]);
    }
    return out;
}

void apply_anscombe(FeatureMatrix& m) {
    for (auto& row : m.rows) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (m.dict.kinds[j] == FeatureKind::count && !is_missing(row[j])) {
                row[j] = anscombe(row[j]);
            }
        }
    }
}

void write_matrix(const FeatureMatrix& m, const std::string& prefix) {
    {
        std::ofstream dict(prefix + ".dict.csv");
        write_row(dict, {"index", "name", "kind"});
        for (std::size_t j = 0; j < m.dict.size(); ++j) {
            write_row(dict, {std::to_string(j), m.dict.names[j],
                             m.dict.kinds[j] == FeatureKind::count ? "count" : "continuous"});
        }
    }
    {
        std::ofstream samples(prefix + ".samples.csv");
        write_row(samples, {"index", "target_admit_id", "patient_id", "label", "n_priors"});
        for (std::size_t i = 0; i < m.n_samples(); ++i) {
            write_row(samples, {std::to_string(i), m.sample_ids[i], m.patient_ids[i],
                                std::to_string(m.labels[i]), std::to_string(m.n_priors[i])});
        }
    }
    {
        std::ofstream feats(prefix + ".features.csv");
        write_row(feats, {"sample_index", "feature_name", "value"});
        for (std::size_t i = 0; i < m.n_samples(); ++i) {
            for (std::size_t j = 0; j < m.n_features(); ++j) {
                const double v = m.rows[i][j];
                if (is_missing(v)) continue;
                if (m.dict.kinds[j] == FeatureKind::count && v == 0.0) continue;
                write_row(feats, {std::to_string(i), m.dict.names[j], fmt_double(v)});
            }
        }
    }
}

FeatureMatrix read_matrix(const std::string& prefix) {
    FeatureMatrix m;
    {
        std::ifstream in(prefix + ".dict.csv");
        if (!in) throw ConfigError("cannot open feature dictionary: " + prefix + ".dict.csv");
        DelimitedReader r(in);
        std::vector<std::string> f;
        std::size_t line;
        while (r.next(f, line)) {
            m.dict.add(f[1], f[2] == "count" ? FeatureKind::count : FeatureKind::continuous);
        }
    }
    {
        std::ifstream in(prefix + ".samples.csv");
        if (!in) throw ConfigError("cannot open samples file: " + prefix + ".samples.csv");
        DelimitedReader r(in);
        std::vector<std::string> f;
        std::size_t line;
        while (r.next(f, line)) {
            m.sample_ids.push_back(f[1]);
            m.patient_ids.push_back(f[2]);
            m.labels.push_back(std::stoi(f[3]));
            m.n_priors.push_back(std::stoul(f[4]));
        }
    }
    m.rows.resize(m.sample_ids.size());
    for (std::size_t i = 0; i < m.n_samples(); ++i) {
        m.rows[i].resize(m.dict.size());
        for (std::size_t j = 0; j < m.dict.size(); ++j) m.rows[i][j] = m.dict.default_value(j);
    }
    {
        std::ifstream in(prefix + ".features.csv");
        if (!in) throw ConfigError("cannot open feature triplets: " + prefix + ".features.csv");
        DelimitedReader r(in);
        std::vector<std::string> f;
        std::size_t line;
        while (r.next(f, line)) {
            const std::size_t i = std::stoul(f[0]);
            auto it = m.dict.index.find(f[1]);
            if (it == m.dict.index.end()) throw InputError("triplet names unknown feature: " + f[1]);
            m.rows.at(i)[it->second] = std::stod(f[2]);
        }
    }
    return m;
}

}  // namespace aki
