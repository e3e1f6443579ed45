#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "aki/common.hpp"
#include "aki/csv.hpp"
#include "aki/ehr.hpp"
#include "aki/evaluation.hpp"
#include "aki/featurize.hpp"
#include "aki/labeling.hpp"
#include "aki/parallel.hpp"
#include "aki/rng.hpp"
#include "aki/synthgen.hpp"
#include "aki/systems.hpp"

namespace {

using namespace aki;
using nlohmann::json;

constexpr int kExitError = 1;
constexpr int kExitUnknownSystem = 2;
constexpr int kExitMissingInput = 3;

struct Global {
    std::uint64_t seed = 1;
    int iterations = 50;
    int folds = 5;
    std::string config_path;
    int threads = 0;
};

PipelineConfig load_config(const Global& g) {
    if (g.config_path.empty()) return PipelineConfig{};
    if (!std::filesystem::exists(g.config_path)) {
        throw InputError("missing input artifact: " + g.config_path);
    }
    return PipelineConfig::load(g.config_path);
}

void require_inputs(const std::vector<std::string>& paths) {
    for (const auto& p : paths) {
        if (!std::filesystem::exists(p)) {
            throw InputError("missing input artifact: " + p);
        }
    }
}

PatientStore load_store(const std::string& admin, const std::string& labs,
                        const std::string& pharmacy, const PipelineConfig& cfg,
                        RejectReport& rejects) {
    require_inputs({admin, labs, pharmacy});
    return parse_table_files(admin, labs, pharmacy, cfg, rejects);
}

SystemSpec resolve_system_or_exit(const std::string& name) {
    const auto& names = SystemSpec::names();
    if (std::find(names.begin(), names.end(), name) == names.end()) {
        std::cerr << "error: unknown system '" << name << "'; valid systems:";
        for (const auto& n : names) std::cerr << " " << n;
        std::cerr << "\n";
        std::exit(kExitUnknownSystem);
    }
    return SystemSpec::resolve(name);
}

void write_labels(const LabelMap& labels, const CohortView& cohort, const std::string& prefix) {
    {
        std::ofstream out(prefix + ".labels.csv");
        if (!out) throw InputError("cannot write " + prefix + ".labels.csv");
        write_row(out, {"admit_id", "by_code", "by_scr", "label"});
        for (const auto& [id, rec] : labels) {
            write_row(out, {id, rec.by_code ? "1" : "0", rec.by_scr ? "1" : "0",
                            rec.aki() ? "1" : "0"});
        }
    }
    {
        std::ofstream out(prefix + ".cohort.csv");
        if (!out) throw InputError("cannot write " + prefix + ".cohort.csv");
        write_row(out, {"patient_id", "admit_ids"});
        for (const auto& [pid, admits] : cohort.eligible) {
            std::string joined;
            for (std::size_t i = 0; i < admits.size(); ++i) {
                if (i) joined += '|';
                joined += admits[i];
            }
            write_row(out, {pid, joined});
        }
    }
    {
        const Crosstab ct = diagnosis_crosstab(labels);
        json j;
        j["code_and_scr"] = ct.code_and_scr;
        j["code_only"] = ct.code_only;
        j["scr_only"] = ct.scr_only;
        j["neither"] = ct.neither;
        j["total"] = ct.total();
        j["excluded_under_18"] = cohort.excluded_under_18;
        j["excluded_post_esrd"] = cohort.excluded_post_esrd;
        j["excluded_single_stay_patients"] = cohort.excluded_single_stay_patients;
        j["eligible_patients"] = cohort.eligible.size();
        std::ofstream out(prefix + ".crosstab.json");
        if (!out) throw InputError("cannot write " + prefix + ".crosstab.json");
        out << j.dump(1) << "\n";
    }
}

LabelMap read_labels(const std::string& path) {
    require_inputs({path});
    std::ifstream in(path);
    DelimitedReader reader(in, ',');
    const std::size_t c_id = reader.column("admit_id");
    const std::size_t c_code = reader.column("by_code");
    const std::size_t c_scr = reader.column("by_scr");
    LabelMap out;
    std::vector<std::string> f;
    std::size_t line = 0;
    while (reader.next(f, line)) {
        LabelRecord rec;
        rec.admit_id = f[c_id];
        rec.by_code = f[c_code] == "1";
        rec.by_scr = f[c_scr] == "1";
        out.emplace(rec.admit_id, rec);
    }
    return out;
}

std::vector<TrainingSample> read_cohort_samples(const std::string& path, const LabelMap& labels) {
    require_inputs({path});
    std::ifstream in(path);
    DelimitedReader reader(in, ',');
    const std::size_t c_pid = reader.column("patient_id");
    const std::size_t c_admits = reader.column("admit_ids");
    CohortView cohort;
    std::vector<std::string> f;
    std::size_t line = 0;
    while (reader.next(f, line)) {
        std::vector<std::string> admits;
        std::string cur;
        for (char c : f[c_admits]) {
            if (c == '|') {
                admits.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        if (!cur.empty()) admits.push_back(cur);
        cohort.eligible[f[c_pid]] = std::move(admits);
    }
    return build_samples(cohort, labels);
}

std::vector<double> read_abs_errors(const std::string& predictions_path, const FeatureMatrix& m) {
    require_inputs({predictions_path});
    std::ifstream in(predictions_path);
    DelimitedReader reader(in, ',');
    const std::size_t c_id = reader.column("target_admit_id");
    const std::size_t c_label = reader.column("label");
    const std::size_t c_pred = reader.column("mean_prediction");
    std::map<std::string, double> err;
    std::vector<std::string> f;
    std::size_t line = 0;
    while (reader.next(f, line)) {
        const double p = std::stod(f[c_pred]);
        const int y = std::stoi(f[c_label]);
        err[f[c_id]] = std::isnan(p) ? kMissing : std::abs(p - y);
    }
    std::vector<double> out(m.n_samples(), kMissing);
    for (std::size_t i = 0; i < m.n_samples(); ++i) {
        auto it = err.find(m.sample_ids[i]);
        if (it == err.end()) {
            throw InputError("predictions file has no row for sample " + m.sample_ids[i]);
        }
        out[i] = it->second;
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acute kidney injury re-admission prediction pipeline"};
    app.require_subcommand(1);
    Global g;
    app.add_option("--seed", g.seed, "master random seed")->capture_default_str();
    app.add_option("--iterations", g.iterations, "cross-validation iterations")
        ->capture_default_str();
    app.add_option("--folds", g.folds, "cross-validation folds")->capture_default_str();
    app.add_option("--config", g.config_path, "pipeline config JSON")
        ->envname("AKI_CONFIG");
    app.add_option("--threads", g.threads, "worker threads (0 = all cores, 1 = serial)")
        ->capture_default_str();

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic source dataset");
    SynthConfig scfg;
    std::string synth_out = "synth";
    synth->add_option("--out", synth_out, "output directory")->capture_default_str();
    synth->add_option("--n-patients", scfg.n_patients)->capture_default_str();
    synth->add_option("--prevalence", scfg.prevalence)->capture_default_str();
    synth->add_option("--mean-stays", scfg.mean_stays)->capture_default_str();
    synth->add_option("--coef-prior-aki", scfg.coef_prior_aki)->capture_default_str();
    synth->add_option("--coef-age", scfg.coef_age)->capture_default_str();
    synth->add_option("--coef-max-un", scfg.coef_max_un)->capture_default_str();
    synth->add_option("--coef-loop", scfg.coef_loop)->capture_default_str();
    synth->add_option("--noise", scfg.noise_scale)->capture_default_str();

    // shared table options
    std::string admin_path, labs_path, pharmacy_path;
    auto add_tables = [&](CLI::App* cmd) {
        cmd->add_option("--admin", admin_path, "admissions table")->required();
        cmd->add_option("--labs", labs_path, "lab table")->required();
        cmd->add_option("--pharmacy", pharmacy_path, "pharmacy table")->required();
    };

    auto* ingest = app.add_subcommand("ingest", "parse and validate the source tables");
    std::string ingest_out = "ingest";
    add_tables(ingest);
    ingest->add_option("--out", ingest_out, "output prefix")->capture_default_str();

    auto* label = app.add_subcommand("label", "label stays and select the cohort");
    std::string label_out = "label";
    add_tables(label);
    label->add_option("--out", label_out, "output prefix")->capture_default_str();

    auto* feat = app.add_subcommand("featurize", "build the feature matrix");
    std::string feat_labels, feat_cohort, feat_out = "matrix", feat_mode = "all";
    long feat_min_support = -1;
    add_tables(feat);
    feat->add_option("--labels", feat_labels, "labels csv from the label stage")->required();
    feat->add_option("--cohort", feat_cohort, "cohort csv from the label stage")->required();
    feat->add_option("--mode", feat_mode, "all|medications|clinical|recent")
        ->capture_default_str();
    feat->add_option("--min-support", feat_min_support,
                     "sparsity threshold (-1 = config value)");
    feat->add_option("--out", feat_out, "matrix prefix")->capture_default_str();

    auto* train = app.add_subcommand("train", "fit one system on the full matrix");
    std::string train_matrix, train_system, train_out = "model.json";
    double train_cal = 0.25;
    train->add_option("--matrix", train_matrix, "matrix prefix")->required();
    train->add_option("--system", train_system, "system name")->required();
    train->add_option("--cal-fraction", train_cal, "calibration holdout fraction")
        ->capture_default_str();
    train->add_option("--out", train_out, "model file")->capture_default_str();

    auto* eval = app.add_subcommand("evaluate", "iterated grouped cross-validation");
    std::string eval_matrix, eval_system, eval_out = "eval";
    eval->add_option("--matrix", eval_matrix, "matrix prefix")->required();
    eval->add_option("--system", eval_system, "system name")->required();
    eval->add_option("--out", eval_out, "report prefix")->capture_default_str();

    auto* compare = app.add_subcommand("compare", "Bayesian correlated t-test between systems");
    std::vector<std::string> compare_records;
    std::string compare_out;
    double rope_auc = 0.01, rope_brier = 0.001;
    compare->add_option("records", compare_records, "two or more .records.csv files")
        ->expected(2, -1);
    compare->add_option("--out", compare_out, "output csv (default stdout)");
    compare->add_option("--rope", rope_auc, "ROPE width for roc/pr/log-loss")
        ->capture_default_str();
    compare->add_option("--rope-brier", rope_brier, "ROPE width for the Brier score")
        ->capture_default_str();

    auto* err = app.add_subcommand("error-analysis", "regress absolute error on feature groups");
    std::string err_matrix, err_pred, err_labels, err_out = "error";
    std::string err_stratum = "cases", err_features = "diagnoses";
    double err_alpha = -1.0;
    bool err_loo = false;
    err->add_option("--matrix", err_matrix, "matrix prefix")->required();
    err->add_option("--predictions", err_pred, "predictions csv from evaluate")->required();
    err->add_option("--labels", err_labels, "labels csv (enables the per-mechanism histogram)");
    err->add_option("--stratum", err_stratum, "cases|controls")->capture_default_str();
    err->add_option("--features", err_features, "diagnoses|race|gender|age")
        ->capture_default_str();
    err->add_option("--alpha", err_alpha, "lasso penalty (-1 = stratum default)")
        ->capture_default_str();
    err->add_flag("--loo", err_loo, "also run the leave-one-patient-out perturbation");
    err->add_option("--out", err_out, "output prefix")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        thread_count() = g.threads;
        const PipelineConfig cfg = load_config(g);

        if (*synth) {
            scfg.seed = g.seed;
            const SynthOutput out = generate(scfg);
            write_synth(out, synth_out);
            std::cout << "synth: " << scfg.n_patients << " patients, prevalence "
                      << fmt_double(out.achieved_prevalence) << ", intercept "
                      << fmt_double(out.intercept) << "\n";
            return 0;
        }

        if (*ingest) {
            RejectReport rejects;
            const PatientStore store =
                load_store(admin_path, labs_path, pharmacy_path, cfg, rejects);
            {
                std::ofstream out(ingest_out + ".rejects.csv");
                if (!out) throw InputError("cannot write " + ingest_out + ".rejects.csv");
                write_row(out, {"table", "line", "reason"});
                for (const auto& item : rejects.items) {
                    write_row(out, {item.table, std::to_string(item.line), item.reason});
                }
            }
            json j;
            j["patients"] = store.patients.size();
            j["hospitalizations"] = store.hospitalization_count();
            j["rejected_admin"] = rejects.count("admin");
            j["rejected_lab"] = rejects.count("lab");
            j["rejected_pharmacy"] = rejects.count("pharmacy");
            std::ofstream out(ingest_out + ".summary.json");
            if (!out) throw InputError("cannot write " + ingest_out + ".summary.json");
            out << j.dump(1) << "\n";
            std::cout << "ingest: " << store.patients.size() << " patients, "
                      << store.hospitalization_count() << " hospitalizations, "
                      << rejects.items.size() << " rejected rows\n";
            return 0;
        }

        if (*label) {
            RejectReport rejects;
            const PatientStore store =
                load_store(admin_path, labs_path, pharmacy_path, cfg, rejects);
            const LabelMap labels = label_all(store, cfg);
            const CohortView cohort = select_cohort(store, labels, cfg);
            write_labels(labels, cohort, label_out);
            const Crosstab ct = diagnosis_crosstab(labels);
            std::cout << "label: " << ct.total() << " stays, " << ct.code_margin()
                      << " code cases, " << ct.scr_margin() << " creatinine cases, "
                      << cohort.eligible.size() << " eligible patients\n";
            return 0;
        }

        if (*feat) {
            RejectReport rejects;
            const PatientStore store =
                load_store(admin_path, labs_path, pharmacy_path, cfg, rejects);
            const LabelMap labels = read_labels(feat_labels);
            const auto samples = read_cohort_samples(feat_cohort, labels);
            if (samples.empty()) throw InputError("cohort produced no training samples");
            const FeatureMode mode = parse_feature_mode(feat_mode);
            const Featurizer fz(cfg, mode);
            FeatureMatrix m = fz.build(store, samples);
            const std::size_t support =
                feat_min_support < 0 ? cfg.min_support : static_cast<std::size_t>(feat_min_support);
            const std::size_t before = m.n_features();
            m = keep_features(m, sparsity_filter(m, support));
            write_matrix(m, feat_out);
            std::cout << "featurize: " << m.n_samples() << " samples, " << m.n_features()
                      << " features (" << before << " before the support filter)\n";
            return 0;
        }

        if (*train) {
            const SystemSpec spec = resolve_system_or_exit(train_system);
            require_inputs({train_matrix + ".dict.csv"});
            FeatureMatrix m = read_matrix(train_matrix);
            if (spec.permute_labels) {
                m.labels = permute_labels(m.labels, derive_seed(g.seed, {0x9e97}));
            }
            std::vector<std::size_t> rows(m.n_samples());
            for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
            Rng rng(derive_seed(g.seed, {0x7a11}));
            rng.shuffle(rows);
            const std::size_t nfit = rows.size() -
                static_cast<std::size_t>(std::llround(train_cal * rows.size()));
            std::vector<std::size_t> fit(rows.begin(), rows.begin() + nfit);
            std::vector<std::size_t> cal(rows.begin() + nfit, rows.end());
            std::sort(fit.begin(), fit.end());
            std::sort(cal.begin(), cal.end());
            const TrainedModel model = fit_pipeline(spec, cfg, m, fit, cal, g.seed);
            model.save(train_out);
            std::cout << "train: " << spec.name << " on " << fit.size() << " samples, "
                      << model.feature_names.size() << " features -> " << train_out << "\n";
            return 0;
        }

        if (*eval) {
            const SystemSpec spec = resolve_system_or_exit(eval_system);
            require_inputs({eval_matrix + ".dict.csv"});
            const FeatureMatrix m = read_matrix(eval_matrix);
            const EvalReport report = run_cv(spec, cfg, m, g.iterations, g.folds, g.seed);
            write_eval_report(report, m, eval_out);
            {
                std::ofstream out(eval_out + ".utilization.csv");
                if (!out) throw InputError("cannot write " + eval_out + ".utilization.csv");
                write_row(out, {"hospitalizations", "label", "n", "mean_abs_error",
                                "mean_prediction_sd"});
                for (const auto& b : utilization_analysis(report, m)) {
                    write_row(out, {std::to_string(b.hospitalizations), std::to_string(b.label),
                                    std::to_string(b.n), fmt_double(b.mean_abs_error),
                                    fmt_double(b.mean_prediction_sd)});
                }
            }
            {
                const PatientLevel pl =
                    patient_level(report.mean_prediction, m.labels, m.patient_ids);
                std::ofstream out(eval_out + ".patient_calibration.csv");
                if (!out) throw InputError("cannot write " + eval_out + ".patient_calibration.csv");
                write_row(out, {"bin_lo", "bin_hi", "count", "mean_pred", "frac_pos"});
                for (std::size_t b = 0; b < pl.curve.bin_lo.size(); ++b) {
                    write_row(out, {fmt_double(pl.curve.bin_lo[b]), fmt_double(pl.curve.bin_hi[b]),
                                    std::to_string(pl.curve.count[b]),
                                    fmt_double(pl.curve.mean_pred[b]),
                                    fmt_double(pl.curve.frac_pos[b])});
                }
            }
            const MetricSummary roc = micro_macro(
                report.records, +[](const MetricRecord& r) { return r.roc_auc; });
            std::cout << "evaluate: " << spec.name << " roc_auc micro "
                      << fmt_double(roc.micro_mean) << " +- " << fmt_double(roc.micro_sd)
                      << ", macro " << fmt_double(roc.macro_mean) << " +- "
                      << fmt_double(roc.macro_sd) << " (" << report.undefined_folds
                      << " undefined folds)\n";
            return 0;
        }

        if (*compare) {
            require_inputs(compare_records);
            std::vector<std::vector<MetricRecord>> all;
            for (const auto& path : compare_records) all.push_back(read_metric_records(path));
            std::ostream* os = &std::cout;
            std::ofstream file;
            if (!compare_out.empty()) {
                file.open(compare_out);
                if (!file) throw InputError("cannot write " + compare_out);
                os = &file;
            }
            write_row(*os, {"system_a", "system_b", "metric", "rope_width", "p_higher", "p_rope",
                            "p_lower"});
            struct MetricDef {
                const char* name;
                double (*get)(const MetricRecord&);
                bool higher_better;
            };
            const MetricDef defs[] = {
                {"roc_auc", [](const MetricRecord& r) { return r.roc_auc; }, true},
                {"pr_auc", [](const MetricRecord& r) { return r.pr_auc; }, true},
                {"brier", [](const MetricRecord& r) { return r.brier; }, false},
                {"log_loss", [](const MetricRecord& r) { return r.log_loss; }, false},
            };
            const double rho = 1.0 / static_cast<double>(g.folds);
            for (std::size_t a = 0; a < all.size(); ++a) {
                for (std::size_t b = a + 1; b < all.size(); ++b) {
                    if (all[a].size() != all[b].size()) {
                        throw InputError("record files have different fold counts");
                    }
                    for (const auto& def : defs) {
                        std::vector<double> diffs;
                        for (std::size_t i = 0; i < all[a].size(); ++i) {
                            if (!all[a][i].defined || !all[b][i].defined) continue;
                            // orient so positive means "a scores better"
                            const double d = def.get(all[a][i]) - def.get(all[b][i]);
                            diffs.push_back(def.higher_better ? d : -d);
                        }
                        if (diffs.size() < 2) continue;
                        const double width = std::string(def.name) == "brier" ? rope_brier
                                                                              : rope_auc;
                        const RopeDecision rd = correlated_ttest(diffs, width, rho);
                        write_row(*os, {all[a].front().system, all[b].front().system, def.name,
                                        fmt_double(width), fmt_double(rd.p_higher),
                                        fmt_double(rd.p_rope), fmt_double(rd.p_lower)});
                    }
                }
            }
            return 0;
        }

        if (*err) {
            require_inputs({err_matrix + ".dict.csv"});
            const FeatureMatrix m = read_matrix(err_matrix);
            const std::vector<double> abs_error = read_abs_errors(err_pred, m);
            if (err_stratum != "cases" && err_stratum != "controls") {
                throw ConfigError("stratum must be cases or controls");
            }
            const bool cases = err_stratum == "cases";
            const ErrorFeatureSet set = parse_error_feature_set(err_features);
            double alpha = err_alpha;
            if (alpha < 0.0) {
                alpha = set == ErrorFeatureSet::diagnoses ? (cases ? 0.015 : 1e-5) : 0.0;
            }
            const ErrorAnalysisReport report =
                error_analysis(m, abs_error, cases, set, alpha, g.iterations, g.folds, g.seed);
            {
                std::ofstream out(err_out + ".coefficients.csv");
                if (!out) throw InputError("cannot write " + err_out + ".coefficients.csv");
                write_row(out, {"stratum", "feature_set", "alpha", "feature", "mean", "ci_lo",
                                "ci_hi", "nonzero_fits"});
                for (const auto& c : report.coefficients) {
                    write_row(out, {report.stratum, to_string(report.feature_set),
                                    fmt_double(report.alpha), c.feature, fmt_double(c.mean),
                                    fmt_double(c.ci_lo), fmt_double(c.ci_hi),
                                    std::to_string(c.nonzero_fits)});
                }
            }
            if (!err_labels.empty()) {
                const LabelMap labels = read_labels(err_labels);
                std::ofstream out(err_out + ".by_method.csv");
                if (!out) throw InputError("cannot write " + err_out + ".by_method.csv");
                write_row(out, {"group", "n", "mean", "bin", "count"});
                for (const auto& h : error_by_diagnosis_method(abs_error, m.sample_ids, labels)) {
                    for (std::size_t b = 0; b < h.bins.size(); ++b) {
                        if (h.bins[b] == 0) continue;
                        write_row(out, {h.group, std::to_string(h.n), fmt_double(h.mean),
                                        std::to_string(b), std::to_string(h.bins[b])});
                    }
                }
            }
            if (err_loo) {
                std::ofstream out(err_out + ".loo.csv");
                if (!out) throw InputError("cannot write " + err_out + ".loo.csv");
                write_row(out, {"patient_id", "n_samples", "l1_distance"});
                for (const auto& d : loo_patient_perturbation(m, cfg)) {
                    write_row(out, {d.patient_id, std::to_string(d.n_samples),
                                    fmt_double(d.l1_distance)});
                }
            }
            std::cout << "error-analysis: " << report.coefficients.size()
                      << " nonzero coefficients (" << report.stratum << ", "
                      << to_string(report.feature_set) << ")\n";
            return 0;
        }
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        const std::string msg = e.what();
        return msg.rfind("missing input artifact", 0) == 0 ? kExitMissingInput : kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return 0;
}
