#include "aki/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "aki/common.hpp"
#include "aki/csv.hpp"
#include "aki/parallel.hpp"
#include "aki/rng.hpp"

namespace aki {

std::vector<std::vector<std::string>> grouped_kfold(const std::vector<std::string>& patient_ids,
                                                    int k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("grouped k-fold: k must be >= 2");
    std::vector<std::string> unique = patient_ids;
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    if (unique.size() < static_cast<std::size_t>(k)) {
        throw InputError("grouped k-fold: fewer patients than folds");
    }
    Rng rng(seed);
    rng.shuffle(unique);
    std::vector<std::vector<std::string>> folds(k);
    for (std::size_t i = 0; i < unique.size(); ++i) {
        folds[i % k].push_back(std::move(unique[i]));
    }
    return folds;
}

std::vector<FoldPlan> make_fold_plans(const FeatureMatrix& m, int iterations, int k,
                                      std::uint64_t seed, double fit_fraction) {
    if (iterations < 1) throw ConfigError("cv: iterations must be >= 1");
    if (fit_fraction <= 0.0 || fit_fraction >= 1.0) {
        throw ConfigError("cv: fit fraction must be in (0,1)");
    }
    std::vector<FoldPlan> plans;
    plans.reserve(static_cast<std::size_t>(iterations) * k);
    for (int it = 0; it < iterations; ++it) {
        const auto folds =
            grouped_kfold(m.patient_ids, k, derive_seed(seed, {0xf01d, static_cast<std::uint64_t>(it)}));
        for (int f = 0; f < k; ++f) {
            std::set<std::string> test_patients(folds[f].begin(), folds[f].end());
            FoldPlan plan;
            plan.iteration = it;
            plan.fold = f;
            std::vector<std::size_t> train;
            for (std::size_t i = 0; i < m.n_samples(); ++i) {
                (test_patients.count(m.patient_ids[i]) ? plan.test_rows : train).push_back(i);
            }
            Rng rng(derive_seed(seed, {0x5b11, static_cast<std::uint64_t>(it),
                                       static_cast<std::uint64_t>(f)}));
            rng.shuffle(train);
            const std::size_t nfit = std::min(
                train.size() - 1,
                static_cast<std::size_t>(std::llround(fit_fraction * train.size())));
            plan.fit_rows.assign(train.begin(), train.begin() + nfit);
            plan.cal_rows.assign(train.begin() + nfit, train.end());
            std::sort(plan.fit_rows.begin(), plan.fit_rows.end());
            std::sort(plan.cal_rows.begin(), plan.cal_rows.end());
            plans.push_back(std::move(plan));
        }
    }
    return plans;
}

namespace {

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double population_sd(const std::vector<double>& v, double mean) {
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

EvalReport run_cv(const SystemSpec& spec, const PipelineConfig& cfg, const FeatureMatrix& m,
                  int iterations, int k, std::uint64_t seed) {
    EvalReport report;
    report.system = spec.name;
    report.iterations = iterations;
    report.folds = k;

    std::vector<int> labels = m.labels;
    if (spec.permute_labels) {
        labels = permute_labels(labels, derive_seed(seed, {0x9e97}));
    }
    FeatureMatrix work = m;
    work.labels = labels;

    const auto plans = make_fold_plans(work, iterations, k, seed);
    const std::size_t n = work.n_samples();
    report.predictions.assign(iterations, std::vector<double>(n, kMissing));
    report.records.resize(plans.size());

    std::vector<std::vector<double>> fold_gini(plans.size());
    std::vector<std::vector<double>> fold_freq(plans.size());
    std::vector<std::string> diag_names;

    parallel_for(plans.size(), [&](std::size_t u) {
        const FoldPlan& plan = plans[u];
        MetricRecord rec;
        rec.system = spec.name;
        rec.iteration = plan.iteration;
        rec.fold = plan.fold;
        try {
            const std::uint64_t fold_seed =
                derive_seed(seed, {0xf17, static_cast<std::uint64_t>(plan.iteration),
                                   static_cast<std::uint64_t>(plan.fold)});
            const TrainedModel model =
                fit_pipeline(spec, cfg, work, plan.fit_rows, plan.cal_rows, fold_seed);
            const std::vector<double> probs = model.predict(work, plan.test_rows);
            std::vector<int> y;
            y.reserve(plan.test_rows.size());
            for (std::size_t i : plan.test_rows) y.push_back(work.labels[i]);
            for (std::size_t t = 0; t < plan.test_rows.size(); ++t) {
                report.predictions[plan.iteration][plan.test_rows[t]] = probs[t];
            }
            rec.roc_auc = roc_auc(y, probs);
            rec.pr_auc = pr_auc(y, probs);
            rec.brier = brier(y, probs);
            rec.log_loss = log_loss(y, probs);
            if (is_missing(rec.roc_auc) || is_missing(rec.pr_auc)) {
                rec.defined = false;
                rec.note = "single-class test fold";
            }
            if (model.kind == LearnerKind::gbt) {
                fold_gini[u] = gini_importance(model.gbc, model.feature_names.size());
            }
            if (model.has_stability) fold_freq[u] = model.stability.frequency;
        } catch (const std::exception& e) {
            rec.defined = false;
            rec.roc_auc = rec.pr_auc = rec.brier = rec.log_loss = kMissing;
            rec.note = e.what();
        }
        report.records[u] = std::move(rec);
    });

    for (const auto& rec : report.records) {
        if (!rec.defined) ++report.undefined_folds;
    }

    // fold-averaged diagnostics; the model feature space (the mode subset of
    // the dictionary) is identical across folds
    if (spec.learner == LearnerKind::gbt || spec.stability) {
        if (spec.mode == FeatureMode::medications) {
            for (const auto& name : work.dict.names) {
                if (is_medication_feature(name)) diag_names.push_back(name);
            }
        } else if (spec.mode == FeatureMode::clinical) {
            for (const auto& [name, kind] : clinical_features(cfg)) diag_names.push_back(name);
        } else {
            diag_names = work.dict.names;
        }
    }
    auto average_folds = [&](const std::vector<std::vector<double>>& per_fold) {
        std::vector<double> sum;
        std::size_t cnt = 0;
        for (const auto& v : per_fold) {
            if (v.empty()) continue;
            if (sum.empty()) sum.assign(v.size(), 0.0);
            for (std::size_t j = 0; j < v.size(); ++j) sum[j] += v[j];
            ++cnt;
        }
        if (cnt) {
            for (double& x : sum) x /= static_cast<double>(cnt);
        }
        return sum;
    };
    report.diag_feature_names = diag_names;
    report.mean_gini = average_folds(fold_gini);
    report.mean_stability_frequency = average_folds(fold_freq);

    report.mean_prediction.assign(n, 0.0);
    report.prediction_sd.assign(n, 0.0);
    std::vector<double> pooled_probs;
    std::vector<int> pooled_labels;
    pooled_probs.reserve(static_cast<std::size_t>(iterations) * n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> per_iter;
        for (int it = 0; it < iterations; ++it) {
            const double p = report.predictions[it][i];
            if (!is_missing(p)) {
                per_iter.push_back(p);
                pooled_probs.push_back(p);
                pooled_labels.push_back(work.labels[i]);
            }
        }
        if (per_iter.empty()) {
            report.mean_prediction[i] = kMissing;
            report.prediction_sd[i] = kMissing;
        } else {
            report.mean_prediction[i] = mean_of(per_iter);
            report.prediction_sd[i] = population_sd(per_iter, report.mean_prediction[i]);
        }
    }
    if (!pooled_probs.empty()) {
        report.pooled_curve = calibration_curve(pooled_labels, pooled_probs);
    }
    return report;
}

MetricSummary micro_macro(const std::vector<MetricRecord>& records,
                          double (*selector)(const MetricRecord&)) {
    MetricSummary s;
    std::vector<double> micro;
    std::map<int, std::vector<double>> per_iteration;
    for (const auto& r : records) {
        const double v = selector(r);
        if (!r.defined || is_missing(v)) {
            ++s.n_undefined;
            continue;
        }
        micro.push_back(v);
        per_iteration[r.iteration].push_back(v);
    }
    s.n_defined = micro.size();
    if (micro.empty()) {
        s.micro_mean = s.micro_sd = s.macro_mean = s.macro_sd = kMissing;
        return s;
    }
    s.micro_mean = mean_of(micro);
    s.micro_sd = population_sd(micro, s.micro_mean);
    std::vector<double> iter_means;
    for (const auto& [it, vals] : per_iteration) iter_means.push_back(mean_of(vals));
    s.macro_mean = mean_of(iter_means);
    s.macro_sd = population_sd(iter_means, s.macro_mean);
    return s;
}

RopeDecision correlated_ttest(const std::vector<double>& differences, double rope_width,
                              double test_fraction) {
    const std::size_t n = differences.size();
    if (n < 2) throw InputError("correlated t-test: need at least 2 differences");
    if (test_fraction <= 0.0 || test_fraction >= 1.0) {
        throw ConfigError("correlated t-test: test fraction must be in (0,1)");
    }
    if (rope_width < 0.0) throw ConfigError("correlated t-test: rope width must be >= 0");

    RopeDecision d;
    d.rope_half_width = 0.5 * rope_width;
    const double mean = mean_of(differences);
    double s2 = 0.0;
    for (double x : differences) s2 += (x - mean) * (x - mean);
    s2 /= static_cast<double>(n - 1);

    if (s2 <= 0.0) {
        if (mean > d.rope_half_width) {
            d.p_higher = 1.0;
        } else if (mean < -d.rope_half_width) {
            d.p_lower = 1.0;
        } else {
            d.p_rope = 1.0;
        }
        return d;
    }

    const double scale =
        std::sqrt((1.0 / static_cast<double>(n) + test_fraction / (1.0 - test_fraction)) * s2);
    const boost::math::students_t dist(static_cast<double>(n - 1));
    const double lo = boost::math::cdf(dist, (-d.rope_half_width - mean) / scale);
    const double hi = boost::math::cdf(dist, (d.rope_half_width - mean) / scale);
    d.p_lower = lo;
    d.p_rope = hi - lo;
    d.p_higher = 1.0 - hi;
    return d;
}

std::pair<double, double> bootstrap_ci(const std::vector<double>& values, int iterations,
                                       double level, std::uint64_t seed) {
    if (values.size() < 2) throw InputError("bootstrap: need at least 2 values");
    if (level <= 0.0 || level >= 1.0) throw ConfigError("bootstrap: level must be in (0,1)");
    Rng rng(seed);
    std::vector<double> means(iterations);
    const std::size_t n = values.size();
    for (int b = 0; b < iterations; ++b) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += values[rng.index(n)];
        means[b] = s / static_cast<double>(n);
    }
    std::sort(means.begin(), means.end());
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(means.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(lo);
        if (lo + 1 >= means.size()) return means.back();
        return means[lo] * (1.0 - frac) + means[lo + 1] * frac;
    };
    const double a = (1.0 - level) / 2.0;
    return {quantile(a), quantile(1.0 - a)};
}

PatientLevel patient_level(const std::vector<double>& mean_prediction,
                           const std::vector<int>& labels,
                           const std::vector<std::string>& patient_ids) {
    std::map<std::string, std::pair<std::vector<double>, std::vector<int>>> groups;
    for (std::size_t i = 0; i < patient_ids.size(); ++i) {
        groups[patient_ids[i]].first.push_back(mean_prediction[i]);
        groups[patient_ids[i]].second.push_back(labels[i]);
    }
    PatientLevel out;
    std::vector<double> curve_pred;
    std::vector<int> curve_obs;
    for (const auto& [pid, data] : groups) {
        const double pred = mean_of(data.first);
        double obs = 0.0;
        for (int y : data.second) obs += y;
        obs /= static_cast<double>(data.second.size());
        out.patient_ids.push_back(pid);
        out.mean_predicted.push_back(pred);
        out.observed.push_back(obs);
        if (obs == 0.0 || obs == 1.0) {
            curve_pred.push_back(pred);
            curve_obs.push_back(obs == 1.0 ? 1 : 0);
        }
    }
    if (!curve_pred.empty()) out.curve = calibration_curve(curve_obs, curve_pred);
    return out;
}

LassoFit fit_lasso(const Rows& X, const std::vector<double>& y, double alpha, int max_sweeps,
                   double tol) {
    if (alpha < 0.0) throw ConfigError("lasso: alpha must be >= 0");
    const std::size_t n = X.size();
    const std::size_t p = n ? X[0].size() : 0;
    if (n == 0) throw InputError("lasso: empty input");
    const double dn = static_cast<double>(n);

    LassoFit fit;
    fit.coef.assign(p, 0.0);
    fit.intercept = mean_of(y);
    std::vector<double> resid(n);
    for (std::size_t i = 0; i < n; ++i) resid[i] = y[i] - fit.intercept;

    std::vector<double> col_sq(p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t i = 0; i < n; ++i) col_sq[j] += X[i][j] * X[i][j];
        col_sq[j] /= dn;
    }

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double max_delta = 0.0;
        {
            double g = 0.0;
            for (double r : resid) g += r;
            g /= dn;
            fit.intercept += g;
            for (double& r : resid) r -= g;
            max_delta = std::max(max_delta, std::abs(g));
        }
        for (std::size_t j = 0; j < p; ++j) {
            if (col_sq[j] == 0.0) continue;
            double rho = 0.0;
            for (std::size_t i = 0; i < n; ++i) rho += X[i][j] * resid[i];
            rho = rho / dn + col_sq[j] * fit.coef[j];
            double next;
            if (rho > alpha) {
                next = (rho - alpha) / col_sq[j];
            } else if (rho < -alpha) {
                next = (rho + alpha) / col_sq[j];
            } else {
                next = 0.0;
            }
            const double d = next - fit.coef[j];
            if (d == 0.0) continue;
            fit.coef[j] = next;
            for (std::size_t i = 0; i < n; ++i) resid[i] -= d * X[i][j];
            max_delta = std::max(max_delta, std::abs(d));
        }
        if (max_delta < tol) break;
    }
    return fit;
}

ErrorFeatureSet parse_error_feature_set(const std::string& s) {
    if (s == "diagnoses") return ErrorFeatureSet::diagnoses;
    if (s == "race") return ErrorFeatureSet::race;
    if (s == "gender") return ErrorFeatureSet::gender;
    if (s == "age") return ErrorFeatureSet::age;
    throw ConfigError("unknown error feature set: " + s +
                      " (expected diagnoses|race|gender|age)");
}

std::string to_string(ErrorFeatureSet s) {
    switch (s) {
        case ErrorFeatureSet::diagnoses: return "diagnoses";
        case ErrorFeatureSet::race: return "race";
        case ErrorFeatureSet::gender: return "gender";
        default: return "age";
    }
}

namespace {

std::vector<std::size_t> error_feature_columns(const FeatureMatrix& m, ErrorFeatureSet set) {
    std::vector<std::size_t> cols;
    for (std::size_t j = 0; j < m.dict.size(); ++j) {
        const std::string& name = m.dict.names[j];
        const bool take = set == ErrorFeatureSet::diagnoses
                              ? name.find("count.dx.") != std::string::npos
                          : set == ErrorFeatureSet::race   ? name.rfind("first.race.", 0) == 0
                          : set == ErrorFeatureSet::gender ? name.rfind("last.gender.", 0) == 0
                                                           : name == "max.age";
        if (take) cols.push_back(j);
    }
    if (cols.empty()) throw ConfigError("no features in the matrix for the requested set");
    return cols;
}

}  // namespace

ErrorAnalysisReport error_analysis(const FeatureMatrix& m, const std::vector<double>& abs_error,
                                   bool cases, ErrorFeatureSet set, double alpha, int iterations,
                                   int k, std::uint64_t seed) {
    if (abs_error.size() != m.n_samples()) {
        throw InputError("error analysis: error vector does not match the matrix");
    }
    for (double e : abs_error) {
        if (!is_missing(e) && (e < 0.0 || e > 1.0)) {
            throw InputError("error analysis: absolute errors must lie in [0,1]");
        }
    }
    const auto cols = error_feature_columns(m, set);

    std::vector<std::size_t> stratum_rows;
    for (std::size_t i = 0; i < m.n_samples(); ++i) {
        if (m.labels[i] == (cases ? 1 : 0) && !is_missing(abs_error[i])) {
            stratum_rows.push_back(i);
        }
    }
    if (stratum_rows.size() < 2) throw InputError("error analysis: stratum too small");

    Rows X(stratum_rows.size());
    std::vector<double> y(stratum_rows.size());
    std::vector<std::string> pids(stratum_rows.size());
    for (std::size_t r = 0; r < stratum_rows.size(); ++r) {
        const std::size_t i = stratum_rows[r];
        X[r].resize(cols.size());
        for (std::size_t j = 0; j < cols.size(); ++j) {
            const double v = m.rows[i][cols[j]];
            X[r][j] = is_missing(v) ? m.dict.default_value(cols[j]) : v;
        }
        y[r] = abs_error[i];
        pids[r] = m.patient_ids[i];
    }
    MostFrequentImputer imp = MostFrequentImputer::fit(X);
    imp.apply(X);

    const std::size_t total_fits = static_cast<std::size_t>(iterations) * k;
    std::vector<std::vector<double>> fold_coefs(total_fits);
    parallel_for(total_fits, [&](std::size_t u) {
        const int it = static_cast<int>(u) / k;
        const int f = static_cast<int>(u) % k;
        const auto folds =
            grouped_kfold(pids, k, derive_seed(seed, {0xe44, static_cast<std::uint64_t>(it)}));
        std::set<std::string> test(folds[f].begin(), folds[f].end());
        Rows Xt;
        std::vector<double> yt;
        for (std::size_t r = 0; r < X.size(); ++r) {
            if (!test.count(pids[r])) {
                Xt.push_back(X[r]);
                yt.push_back(y[r]);
            }
        }
        fold_coefs[u] = fit_lasso(Xt, yt, alpha).coef;
    });

    ErrorAnalysisReport report;
    report.stratum = cases ? "cases" : "controls";
    report.feature_set = set;
    report.alpha = alpha;
    for (std::size_t j = 0; j < cols.size(); ++j) {
        std::vector<double> vals;
        std::size_t nonzero = 0;
        for (const auto& c : fold_coefs) {
            vals.push_back(c[j]);
            if (c[j] != 0.0) ++nonzero;
        }
        if (nonzero == 0) continue;
        ErrorCoefficient ec;
        ec.feature = m.dict.names[cols[j]];
        ec.mean = mean_of(vals);
        std::tie(ec.ci_lo, ec.ci_hi) =
            bootstrap_ci(vals, 10000, 0.95, derive_seed(seed, {0xc1, j}));
        ec.nonzero_fits = nonzero;
        report.coefficients.push_back(std::move(ec));
    }
    std::sort(report.coefficients.begin(), report.coefficients.end(),
              [](const ErrorCoefficient& a, const ErrorCoefficient& b) {
                  return std::abs(a.mean) > std::abs(b.mean);
              });
    return report;
}

std::vector<UtilizationBin> utilization_analysis(const EvalReport& report,
                                                 const FeatureMatrix& m) {
    std::map<std::string, std::size_t> samples_per_patient;
    for (const auto& pid : m.patient_ids) ++samples_per_patient[pid];

    struct Acc {
        std::size_t n = 0;
        double err = 0.0, sd = 0.0;
    };
    std::map<std::pair<std::size_t, int>, Acc> acc;
    for (std::size_t i = 0; i < m.n_samples(); ++i) {
        if (is_missing(report.mean_prediction[i])) continue;
        // a patient with s samples has s+1 hospitalizations
        const std::size_t stays = samples_per_patient.at(m.patient_ids[i]) + 1;
        Acc& a = acc[{stays, m.labels[i]}];
        ++a.n;
        a.err += std::abs(report.mean_prediction[i] - m.labels[i]);
        a.sd += report.prediction_sd[i];
    }
    std::vector<UtilizationBin> bins;
    for (const auto& [key, a] : acc) {
        UtilizationBin b;
        b.hospitalizations = key.first;
        b.label = key.second;
        b.n = a.n;
        b.mean_abs_error = a.err / static_cast<double>(a.n);
        b.mean_prediction_sd = a.sd / static_cast<double>(a.n);
        bins.push_back(b);
    }
    return bins;
}

std::vector<LooDistance> loo_patient_perturbation(const FeatureMatrix& m,
                                                  const PipelineConfig& cfg, double C) {
    (void)cfg;
    const std::size_t n = m.n_samples();
    Rows X(n);
    for (std::size_t i = 0; i < n; ++i) {
        X[i].resize(m.dict.size());
        for (std::size_t j = 0; j < m.dict.size(); ++j) {
            const double v = m.rows[i][j];
            X[i][j] = is_missing(v) ? kMissing : v;
        }
    }
    MostFrequentImputer imp = MostFrequentImputer::fit(X, &m.dict.names);
    imp.apply(X);
    StandardScaler sc = StandardScaler::fit(X);
    sc.apply(X);

    L1LogisticConfig lcfg;
    lcfg.C = C;
    const LinearModel full = fit_l1_logistic(X, m.labels, {}, lcfg);

    std::vector<std::string> unique = m.patient_ids;
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

    std::vector<LooDistance> out(unique.size());
    parallel_for(unique.size(), [&](std::size_t u) {
        const std::string& pid = unique[u];
        Rows Xs;
        std::vector<int> ys;
        std::size_t removed = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (m.patient_ids[i] == pid) {
                ++removed;
            } else {
                Xs.push_back(X[i]);
                ys.push_back(m.labels[i]);
            }
        }
        const LinearModel reduced = fit_l1_logistic(Xs, ys, {}, lcfg);
        double dist = 0.0;
        for (std::size_t j = 0; j < full.coef.size(); ++j) {
            dist += std::abs(full.coef[j] - reduced.coef[j]);
        }
        out[u] = LooDistance{pid, removed, dist};
    });
    return out;
}

std::vector<int> permute_labels(const std::vector<int>& labels, std::uint64_t seed) {
    std::vector<int> out = labels;
    Rng rng(seed);
    rng.shuffle(out);
    return out;
}

std::vector<ErrorHistogram> error_by_diagnosis_method(const std::vector<double>& abs_error,
                                                      const std::vector<std::string>& sample_ids,
                                                      const LabelMap& labels) {
    if (abs_error.size() != sample_ids.size()) {
        throw InputError("error histogram: error vector does not match the sample list");
    }
    constexpr int kBins = 1000;
    std::vector<ErrorHistogram> out(3);
    out[0].group = "code_and_scr";
    out[1].group = "code_only";
    out[2].group = "scr_only";
    for (auto& h : out) h.bins.assign(kBins, 0);

    for (std::size_t i = 0; i < sample_ids.size(); ++i) {
        auto it = labels.find(sample_ids[i]);
        if (it == labels.end()) throw InputError("error histogram: no label for " + sample_ids[i]);
        const LabelRecord& rec = it->second;
        if (!rec.aki() || is_missing(abs_error[i])) continue;
        ErrorHistogram& h = rec.by_code && rec.by_scr ? out[0] : rec.by_code ? out[1] : out[2];
        int b = static_cast<int>(abs_error[i] * kBins);
        b = std::clamp(b, 0, kBins - 1);
        ++h.bins[b];
        h.mean += abs_error[i];
        ++h.n;
    }
    for (auto& h : out) {
        if (h.n) h.mean /= static_cast<double>(h.n);
    }
    return out;
}

namespace {

double sel_roc(const MetricRecord& r) { return r.roc_auc; }
double sel_pr(const MetricRecord& r) { return r.pr_auc; }
double sel_brier(const MetricRecord& r) { return r.brier; }
double sel_logloss(const MetricRecord& r) { return r.log_loss; }

nlohmann::json summary_json(const MetricSummary& s) {
    return nlohmann::json{{"micro_mean", s.micro_mean}, {"micro_sd", s.micro_sd},
                          {"macro_mean", s.macro_mean}, {"macro_sd", s.macro_sd},
                          {"n_defined", s.n_defined},   {"n_undefined", s.n_undefined}};
}

}  // namespace

void write_eval_report(const EvalReport& report, const FeatureMatrix& m,
                       const std::string& prefix) {
    {
        std::ofstream out(prefix + ".records.csv");
        if (!out) throw InputError("cannot write " + prefix + ".records.csv");
        write_row(out, {"system", "iteration", "fold", "roc_auc", "pr_auc", "brier", "log_loss",
                        "defined", "note"});
        for (const auto& r : report.records) {
            write_row(out, {r.system, std::to_string(r.iteration), std::to_string(r.fold),
                            fmt_double(r.roc_auc), fmt_double(r.pr_auc), fmt_double(r.brier),
                            fmt_double(r.log_loss), r.defined ? "1" : "0", r.note});
        }
    }
    {
        std::ofstream out(prefix + ".calibration.csv");
        if (!out) throw InputError("cannot write " + prefix + ".calibration.csv");
        write_row(out, {"bin_lo", "bin_hi", "count", "mean_pred", "frac_pos"});
        const CalibrationCurve& c = report.pooled_curve;
        for (std::size_t b = 0; b < c.bin_lo.size(); ++b) {
            write_row(out, {fmt_double(c.bin_lo[b]), fmt_double(c.bin_hi[b]),
                            std::to_string(c.count[b]), fmt_double(c.mean_pred[b]),
                            fmt_double(c.frac_pos[b])});
        }
    }
    {
        std::ofstream out(prefix + ".predictions.csv");
        if (!out) throw InputError("cannot write " + prefix + ".predictions.csv");
        write_row(out, {"target_admit_id", "patient_id", "label", "mean_prediction",
                        "prediction_sd"});
        for (std::size_t i = 0; i < m.n_samples(); ++i) {
            write_row(out, {m.sample_ids[i], m.patient_ids[i], std::to_string(m.labels[i]),
                            fmt_double(report.mean_prediction[i]),
                            fmt_double(report.prediction_sd[i])});
        }
    }
    if (!report.mean_gini.empty()) {
        std::ofstream out(prefix + ".importance.csv");
        if (!out) throw InputError("cannot write " + prefix + ".importance.csv");
        write_row(out, {"feature", "gini_importance"});
        for (std::size_t j = 0; j < report.mean_gini.size(); ++j) {
            write_row(out, {report.diag_feature_names[j], fmt_double(report.mean_gini[j])});
        }
    }
    if (!report.mean_stability_frequency.empty()) {
        std::ofstream out(prefix + ".stability.csv");
        if (!out) throw InputError("cannot write " + prefix + ".stability.csv");
        write_row(out, {"feature", "selection_frequency"});
        for (std::size_t j = 0; j < report.mean_stability_frequency.size(); ++j) {
            write_row(out, {report.diag_feature_names[j],
                            fmt_double(report.mean_stability_frequency[j])});
        }
    }
    {
        nlohmann::json j;
        j["system"] = report.system;
        j["iterations"] = report.iterations;
        j["folds"] = report.folds;
        j["undefined_folds"] = report.undefined_folds;
        j["metrics"] = {
            {"roc_auc", summary_json(micro_macro(report.records, sel_roc))},
            {"pr_auc", summary_json(micro_macro(report.records, sel_pr))},
            {"brier", summary_json(micro_macro(report.records, sel_brier))},
            {"log_loss", summary_json(micro_macro(report.records, sel_logloss))},
        };
        std::ofstream out(prefix + ".summary.json");
        if (!out) throw InputError("cannot write " + prefix + ".summary.json");
        out << j.dump(1) << "\n";
    }
}

std::vector<MetricRecord> read_metric_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read " + path);
    DelimitedReader reader(in, ',');
    const std::size_t c_system = reader.column("system");
    const std::size_t c_it = reader.column("iteration");
    const std::size_t c_fold = reader.column("fold");
    const std::size_t c_roc = reader.column("roc_auc");
    const std::size_t c_pr = reader.column("pr_auc");
    const std::size_t c_brier = reader.column("brier");
    const std::size_t c_ll = reader.column("log_loss");
    const std::size_t c_def = reader.column("defined");

    std::vector<MetricRecord> out;
    std::vector<std::string> fields;
    std::size_t line = 0;
    while (reader.next(fields, line)) {
        MetricRecord r;
        r.system = fields[c_system];
        r.iteration = std::stoi(fields[c_it]);
        r.fold = std::stoi(fields[c_fold]);
        r.roc_auc = std::stod(fields[c_roc]);
        r.pr_auc = std::stod(fields[c_pr]);
        r.brier = std::stod(fields[c_brier]);
        r.log_loss = std::stod(fields[c_ll]);
        r.defined = fields[c_def] == "1";
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace aki
