// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line; the
// exit code is the number of failed criteria.
#include <chrono>
#include <thread>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "aki/common.hpp"
#include "aki/csv.hpp"
#include "aki/ehr.hpp"
#include "aki/evaluation.hpp"
#include "aki/featurize.hpp"
#include "aki/labeling.hpp"
#include "aki/learners.hpp"
#include "aki/metrics.hpp"
#include "aki/rng.hpp"
#include "aki/synthgen.hpp"
#include "aki/systems.hpp"

using namespace aki;

namespace {

int failures = 0;

void criterion(int idx, bool ok, const std::string& detail) {
    std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", idx, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

// ---- criterion 1: labeler vs brute force ----

bool scr_oracle(const std::vector<std::pair<double, double>>& s) {
    for (std::size_t j = 0; j < s.size(); ++j) {
        for (std::size_t i = 0; i < j; ++i) {
            if (s[i].first >= s[j].first) continue;
            const double dt = s[j].first - s[i].first;
            if (dt <= 48.0 && s[j].second - s[i].second >= 0.3) return true;
            if (dt <= 168.0 && s[j].second >= 1.5 * s[i].second) return true;
        }
    }
    return false;
}

void check_labeler() {
    Rng rng(101);
    const double t0 = now_seconds();
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        std::vector<std::pair<double, double>> s;
        const std::size_t n = rng.index(20);
        double t = rng.uniform(0.0, 100.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (i && rng.uniform() > 0.15) t += rng.uniform(0.0, 70.0);
            s.emplace_back(t, rng.uniform(0.3, 2.5));
        }
        if (aki_by_scr(s) != scr_oracle(s)) ++mismatches;
    }
    const double dt = now_seconds() - t0;
    std::ostringstream os;
    os << "creatinine labeler vs all-pairs oracle on 10000 series: " << mismatches
       << " mismatches in " << fmt_double(dt) << "s";
    criterion(1, mismatches == 0 && dt < 10.0, os.str());
}

// ---- shared synthetic matrix construction ----

FeatureMatrix build_matrix(const SynthConfig& scfg, const PipelineConfig& cfg) {
    const SynthOutput out = generate(scfg);
    RejectReport rejects;
    std::istringstream a(out.admin_csv), l(out.lab_csv), p(out.pharmacy_csv);
    const PatientStore store = parse_tables(a, l, p, cfg, rejects);
    const LabelMap labels = label_all(store, cfg);
    const CohortView cohort = select_cohort(store, labels, cfg);
    const auto samples = build_samples(cohort, labels);
    const Featurizer fz(cfg, FeatureMode::all);
    FeatureMatrix m = fz.build(store, samples);
    return keep_features(m, sparsity_filter(m, cfg.min_support));
}

// ---- criterion 2: leakage / coverage on a full 50x5 run ----

void check_leakage() {
    PipelineConfig cfg;
    SynthConfig scfg;
    scfg.n_patients = 400;
    scfg.seed = 31;
    const FeatureMatrix m = build_matrix(scfg, cfg);

    std::size_t overlaps = 0;
    const auto plans = make_fold_plans(m, 50, 5, 2);
    for (const auto& plan : plans) {
        std::set<std::string> test_p;
        for (std::size_t i : plan.test_rows) test_p.insert(m.patient_ids[i]);
        for (std::size_t i : plan.fit_rows) overlaps += test_p.count(m.patient_ids[i]);
        for (std::size_t i : plan.cal_rows) overlaps += test_p.count(m.patient_ids[i]);
    }

    const EvalReport rep = run_cv(SystemSpec::resolve("LR1"), cfg, m, 50, 5, 2);
    std::size_t unscored = 0;
    for (int it = 0; it < 50; ++it) {
        for (std::size_t i = 0; i < m.n_samples(); ++i) {
            if (is_missing(rep.predictions[it][i])) ++unscored;
        }
    }
    std::ostringstream os;
    os << "50x5 grouped CV on " << m.n_samples() << " samples: " << overlaps
       << " train/test patient overlaps, " << unscored << " missing scores (each sample "
       << "scored 50 times)";
    criterion(2, overlaps == 0 && unscored == 0, os.str());
}

// ---- criterion 3: KKT audit with finite differences ----

double penalized_nll(const Rows& X, const std::vector<int>& y, const std::vector<double>& coef,
                     double intercept) {
    double total = y.size(), pos = 0;
    for (int v : y) pos += v;
    const double cpos = total / (2.0 * pos), cneg = total / (2.0 * (total - pos));
    double loss = 0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        double z = intercept;
        for (std::size_t j = 0; j < coef.size(); ++j) z += coef[j] * X[i][j];
        const double ll =
            (z >= 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z))) - y[i] * z;
        loss += (y[i] ? cpos : cneg) * ll;
    }
    return loss;
}

void check_kkt() {
    Rng rng(103);
    std::size_t violations = 0, zeros = 0, nonzeros = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 200, p = 20;
        Rows X(n);
        for (auto& row : X) {
            row.resize(p);
            for (auto& v : row) v = rng.normal();
        }
        std::vector<double> beta(p, 0.0);
        for (int j = 0; j < 5; ++j) beta[j] = rng.uniform(-1.5, 1.5);
        std::vector<int> y;
        for (const auto& row : X) {
            double z = 0.1;
            for (std::size_t j = 0; j < p; ++j) z += beta[j] * row[j];
            y.push_back(rng.uniform() < sigmoid(z) ? 1 : 0);
        }
        L1LogisticConfig cfg;
        cfg.C = 0.05;
        const LinearModel m = fit_l1_logistic(X, y, {}, cfg);
        const double lambda = 1.0 / cfg.C, h = 1e-5;
        for (std::size_t j = 0; j < p; ++j) {
            auto c = m.coef;
            c[j] += h;
            const double up = penalized_nll(X, y, c, m.intercept);
            c[j] -= 2 * h;
            const double dn = penalized_nll(X, y, c, m.intercept);
            const double grad = (up - dn) / (2 * h);
            if (m.coef[j] == 0.0) {
                ++zeros;
                if (std::abs(grad) > lambda + 1e-4) ++violations;
            } else {
                ++nonzeros;
                if (std::abs(grad + lambda * (m.coef[j] > 0 ? 1.0 : -1.0)) > 1e-4) ++violations;
            }
        }
    }
    std::ostringstream os;
    os << "stationarity audit over 20 problems (" << zeros << " zero, " << nonzeros
       << " active coefficients, central differences): " << violations << " violations";
    criterion(3, violations == 0, os.str());
}

// ---- criterion 4: tree invariance to monotone transforms ----

void check_tree_invariance() {
    Rng rng(107);
    const std::size_t n = 800, p = 6;
    Rows X(n);
    std::vector<int> y;
    for (auto& row : X) {
        row.resize(p);
        for (auto& v : row) v = rng.uniform(0.0, 2.0);
        y.push_back(rng.uniform() < sigmoid(2.0 * row[0] - 1.5 * row[1] * row[2]) ? 1 : 0);
    }
    GbcConfig cfg;
    cfg.min_samples_split = 60;
    cfg.min_samples_leaf = 30;
    const GbcModel base = fit_gbc(X, y, {}, cfg);
    double worst = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
        Rows Xt = X;
        for (auto& row : Xt) row[j] = std::log1p(row[j]);
        const GbcModel mt = fit_gbc(Xt, y, {}, cfg);
        for (std::size_t i = 0; i < n; ++i) {
            worst = std::max(worst, std::abs(mt.predict_proba(Xt[i]) - base.predict_proba(X[i])));
        }
    }
    std::ostringstream os;
    os << "log(1+x) on each single feature in turn: max prediction change "
       << fmt_double(worst);
    criterion(4, worst <= 1e-12, os.str());
}

// ---- criterion 5: metric oracles ----

double auc_oracle(const std::vector<int>& y, const std::vector<double>& s) {
    double num = 0, pairs = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        for (std::size_t j = 0; j < y.size(); ++j) {
            if (y[i] != 1 || y[j] != 0) continue;
            pairs += 1;
            num += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
        }
    }
    return num / pairs;
}

void check_metric_oracles() {
    Rng rng(109);
    double worst_auc = 0.0, worst_brier = 0.0;
    bool curve_exact = true;
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 2 + rng.index(499);
        std::vector<int> y(n);
        std::vector<double> s(n);
        bool any0 = false, any1 = false;
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = rng.uniform() < 0.3 ? 1 : 0;
            (y[i] ? any1 : any0) = true;
            s[i] = std::floor(rng.uniform(0.0, 10.0)) / 10.0;
        }
        if (!any0 || !any1) continue;
        worst_auc = std::max(worst_auc, std::abs(roc_auc(y, s) - auc_oracle(y, s)));

        const double c = rng.uniform();
        double pi = 0;
        for (int v : y) pi += v;
        pi /= n;
        const double closed = c * c * (1 - pi) + (1 - c) * (1 - c) * pi;
        worst_brier = std::max(
            worst_brier, std::abs(brier(y, std::vector<double>(n, c)) - closed));

        const CalibrationCurve curve = calibration_curve(y, s);
        double reconstructed = 0;
        for (std::size_t b = 0; b < curve.count.size(); ++b) {
            if (curve.count[b]) reconstructed += curve.frac_pos[b] * curve.count[b];
        }
        if (std::llround(reconstructed) != std::llround(pi * n)) curve_exact = false;
    }
    std::ostringstream os;
    os << "roc vs pairwise oracle max |d| " << fmt_double(worst_auc)
       << ", constant-prediction brier max |d| " << fmt_double(worst_brier)
       << ", calibration positive-count reconstruction "
       << (curve_exact ? "exact" : "BROKEN");
    criterion(5, worst_auc <= 1e-12 && worst_brier <= 1e-12 && curve_exact, os.str());
}

// ---- criteria 6, 7, 10: planted-signal end-to-end run ----

struct NameGroup {
    const char* concept_name;
    std::vector<std::string> patterns;  // substring match against feature names
};

bool name_in_group(const std::string& name, const NameGroup& g) {
    for (const auto& pat : g.patterns) {
        if (name.find(pat) != std::string::npos) return true;
    }
    return false;
}

void check_planted_run() {
    PipelineConfig cfg;
    SynthConfig scfg;
    scfg.n_patients = 5000;
    scfg.prevalence = 0.062;
    scfg.seed = 42;

    const double t0 = now_seconds();
    const FeatureMatrix m = build_matrix(scfg, cfg);
    const EvalReport gbc = run_cv(SystemSpec::resolve("GBC"), cfg, m, 10, 5, 7);
    const MetricSummary roc = micro_macro(
        gbc.records, +[](const MetricRecord& r) { return r.roc_auc; });

    // stability selection over the full matrix via the RLR1 pipeline
    std::vector<std::size_t> all_rows(m.n_samples());
    for (std::size_t i = 0; i < all_rows.size(); ++i) all_rows[i] = i;
    const TrainedModel stab = fit_pipeline(SystemSpec::resolve("RLR1"), cfg, m, all_rows, {}, 7);

    const std::vector<NameGroup> planted = {
        {"age", {"max.age"}},
        {"urea nitrogen", {"UREA NITROGEN"}},
        {"loop diuretics", {"FUROSEMIDE", "LOOP", "tclass.DIURETICS"}},
        {"prior kidney injury", {"count.dx.584", "CREATININE"}},
    };
    bool stability_ok = true;
    std::ostringstream stab_detail;
    for (const auto& g : planted) {
        double freq = 0.0;
        for (std::size_t j = 0; j < stab.stability_feature_names.size(); ++j) {
            if (name_in_group(stab.stability_feature_names[j], g)) {
                freq += stab.stability.frequency[j];
            }
        }
        freq = std::min(freq, 1.0);
        stab_detail << " " << g.concept_name << "=" << fmt_double(freq);
        if (freq < 0.9) stability_ok = false;
    }

    std::size_t top = 0;
    for (std::size_t j = 1; j < gbc.mean_gini.size(); ++j) {
        if (gbc.mean_gini[j] > gbc.mean_gini[top]) top = j;
    }
    const std::string top_name =
        gbc.mean_gini.empty() ? "<none>" : gbc.diag_feature_names[top];
    bool gini_ok = false;
    for (const auto& g : planted) gini_ok = gini_ok || name_in_group(top_name, g);

    const double dt = now_seconds() - t0;
    {
        // 900 s budget assumes a laptop with >= 4 hardware threads; the fold
        // loop parallelizes, so scale the allowance up on narrower machines.
        const double threads =
            std::max(1u, std::thread::hardware_concurrency());
        const double budget = 900.0 * std::max(1.0, 4.0 / threads);
        std::ostringstream os;
        os << "planted run (" << m.n_samples() << " samples, " << m.n_features()
           << " features, 10x5 boosted trees): micro roc " << fmt_double(roc.micro_mean)
           << ", stability" << stab_detail.str() << ", top importance " << top_name << ", "
           << fmt_double(dt) << "s (budget " << fmt_double(budget) << "s)";
        criterion(6, roc.micro_mean >= 0.80 && stability_ok && gini_ok && dt <= budget,
                  os.str());
    }

    // criterion 7: permuted-label control on the same matrix
    {
        const EvalReport ngbc = run_cv(SystemSpec::resolve("NGBC"), cfg, m, 10, 5, 7);
        const MetricSummary nroc = micro_macro(
            ngbc.records, +[](const MetricRecord& r) { return r.roc_auc; });
        double mean_sd = 0.0, mean_pred = 0.0;
        std::size_t cnt = 0;
        for (std::size_t i = 0; i < m.n_samples(); ++i) {
            if (is_missing(ngbc.mean_prediction[i])) continue;
            mean_sd += ngbc.prediction_sd[i];
            mean_pred += ngbc.mean_prediction[i];
            ++cnt;
        }
        mean_sd /= cnt;
        mean_pred /= cnt;
        std::ostringstream os;
        os << "permuted-label control: micro roc " << fmt_double(nroc.micro_mean)
           << ", mean per-sample prediction sd " << fmt_double(mean_sd)
           << ", mean prediction " << fmt_double(mean_pred);
        criterion(7,
                  nroc.micro_mean >= 0.45 && nroc.micro_mean <= 0.55 && mean_sd < 0.02 &&
                      mean_pred > 0.03 && mean_pred < 0.10,
                  os.str());
    }

    // criterion 10: averaging per iteration first shrinks the spread
    {
        struct Sel {
            const char* name;
            double (*get)(const MetricRecord&);
        };
        const Sel sels[] = {
            {"roc_auc", [](const MetricRecord& r) { return r.roc_auc; }},
            {"pr_auc", [](const MetricRecord& r) { return r.pr_auc; }},
            {"brier", [](const MetricRecord& r) { return r.brier; }},
            {"log_loss", [](const MetricRecord& r) { return r.log_loss; }},
        };
        bool ok = true;
        std::ostringstream os;
        os << "macro sd < micro sd on the planted run:";
        for (const auto& sel : sels) {
            const MetricSummary s = micro_macro(gbc.records, sel.get);
            os << " " << sel.name << " " << fmt_double(s.macro_sd) << "<"
               << fmt_double(s.micro_sd);
            if (!(s.macro_sd < s.micro_sd)) ok = false;
        }
        criterion(10, ok, os.str());
    }
}

// ---- criterion 8: correlated t-test ----

double t_mass(double df, double a, double b) {
    const double logc = std::lgamma((df + 1) / 2) - std::lgamma(df / 2) -
                        0.5 * std::log(df * std::acos(-1.0));
    auto pdf = [&](double x) {
        return std::exp(logc - (df + 1) / 2 * std::log1p(x * x / df));
    };
    const int steps = 400000;
    const double h = (b - a) / steps;
    double s = pdf(a) + pdf(b);
    for (int i = 1; i < steps; ++i) s += pdf(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

void check_ttest() {
    const RopeDecision zero = correlated_ttest({0, 0, 0, 0, 0}, 0.01, 0.2);
    const bool zero_ok = zero.p_higher == 0.0 && zero.p_rope == 1.0 && zero.p_lower == 0.0;

    Rng rng(113);
    std::vector<double> diffs;
    for (int i = 0; i < 10; ++i) diffs.push_back(rng.normal() * 0.02);
    std::vector<double> shifted = diffs;
    for (double& d : shifted) d += 0.1;  // 10x the rope width
    const RopeDecision shift = correlated_ttest(shifted, 0.01, 0.2);

    const RopeDecision rand_case = correlated_ttest(diffs, 0.02, 0.2);
    double mean = 0;
    for (double d : diffs) mean += d;
    mean /= diffs.size();
    double s2 = 0;
    for (double d : diffs) s2 += (d - mean) * (d - mean);
    s2 /= (diffs.size() - 1);
    const double scale = std::sqrt((0.1 + 0.25) * s2);
    const double lo = (-0.01 - mean) / scale, hi = (0.01 - mean) / scale;
    const double df = 9.0;
    const double q_rope = t_mass(df, lo, hi);
    const double q_lower = t_mass(df, lo - 120.0, lo);
    const double err = std::max(std::abs(rand_case.p_rope - q_rope),
                                std::abs(rand_case.p_lower - q_lower));

    std::ostringstream os;
    os << "zero-difference triple " << (zero_ok ? "(0,1,0)" : "WRONG") << ", 10x-rope shift "
       << "p_higher " << fmt_double(shift.p_higher) << ", quadrature max |d| "
       << fmt_double(err);
    criterion(8, zero_ok && shift.p_higher >= 0.999 && err <= 1e-6, os.str());
}

// ---- criterion 9: calibration at scale ----

void check_calibration() {
    Rng rng(127);
    const std::size_t n = 50000;
    std::vector<int> y(n);
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) {
        p[i] = rng.uniform();
        y[i] = rng.uniform() < p[i] ? 1 : 0;
    }
    const CalibrationCurve curve = calibration_curve(y, p);
    double worst = 0.0;
    for (std::size_t b = 0; b < curve.count.size(); ++b) {
        if (!curve.count[b]) continue;
        worst = std::max(worst, std::abs(curve.frac_pos[b] - curve.mean_pred[b]));
    }

    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        scores[i] = rng.normal() * 2.0;
        labels[i] = rng.uniform() < sigmoid(0.8 * scores[i] - 0.3) ? 1 : 0;
    }
    const PlattCalibrator cal = PlattCalibrator::fit(scores, labels);
    bool monotone = cal.a > 0.0;
    for (double s = -5.0; s < 5.0; s += 0.25) {
        if (cal(s + 0.25) <= cal(s)) monotone = false;
    }
    std::ostringstream os;
    os << "50000-sample reliability max bin deviation " << fmt_double(worst)
       << ", sigmoid map slope " << fmt_double(cal.a)
       << (monotone ? " (monotone)" : " (NOT monotone)");
    criterion(9, worst <= 0.05 && monotone, os.str());
}

// ---- criterion 11: weighting identity ----

void check_weights() {
    Rng rng(131);
    std::vector<std::string> pids;
    for (int p = 0; p < 200; ++p) {
        const std::size_t reps = 1 + rng.index(6);
        for (std::size_t r = 0; r < reps; ++r) pids.push_back("p" + std::to_string(p));
    }
    rng.shuffle(pids);
    const auto w = patient_weights(pids);
    std::map<std::string, double> per_patient;
    double total = 0.0;
    for (std::size_t i = 0; i < pids.size(); ++i) {
        per_patient[pids[i]] += w[i];
        total += w[i];
    }
    bool sums_ok = true;
    for (const auto& [pid, s] : per_patient) {
        if (std::abs(s - 1.0) > 1e-12) sums_ok = false;
    }
    std::ostringstream os;
    os << "per-patient weight sums == 1 for " << per_patient.size()
       << " patients, total weight " << fmt_double(total);
    criterion(11, sums_ok && std::abs(total - 200.0) <= 1e-9, os.str());
}

}  // namespace

int main() {
    check_labeler();
    check_leakage();
    check_kkt();
    check_tree_invariance();
    check_metric_oracles();
    check_planted_run();
    check_ttest();
    check_calibration();
    check_weights();
    std::printf("%d of 11 criteria failed\n", failures);
    return failures;
}
