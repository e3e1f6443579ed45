#include "aki/labeling.hpp"

#include <algorithm>
#include <deque>

#include "aki/common.hpp"

namespace aki {

bool aki_by_code(const Hospitalization& h, const PipelineConfig& cfg) {
    for (const auto& c : h.codes) {
        if (c.system != CodeSystem::icd9_dx) continue;
        // matched at full code precision, not the truncated key
        if (std::find(cfg.aki_dx_codes.begin(), cfg.aki_dx_codes.end(), c.code) !=
            cfg.aki_dx_codes.end()) {
            return true;
        }
    }
    return false;
}

namespace {

// Sliding minimum over baselines with t0 in [t1 - window, t1).  The minimum
// suffices as candidate baseline since both deltas are monotone in v0.
bool window_scan(const std::vector<std::pair<double, double>>& series, double window,
                 bool absolute_rule) {
    std::deque<std::size_t> q;  // candidate indices, values increasing front to back
    std::size_t hi = 0, lo = 0;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto [t1, v1] = series[i];
        while (hi < i && series[hi].first < t1) {  // strictly earlier readings only
            while (!q.empty() && series[q.back()].second >= series[hi].second) q.pop_back();
            q.push_back(hi);
            ++hi;
        }
        while (lo < hi && series[lo].first < t1 - window) ++lo;
        while (!q.empty() && q.front() < lo) q.pop_front();
        if (!q.empty()) {
            const double v0 = series[q.front()].second;
            if (absolute_rule ? (v1 - v0 >= 0.3) : (v1 >= 1.5 * v0)) return true;
        }
    }
    return false;
}

}  // namespace

bool aki_by_scr(const std::vector<std::pair<double, double>>& series) {
    for (std::size_t i = 1; i < series.size(); ++i) {
        if (series[i].first < series[i - 1].first) {
            throw InputError("aki_by_scr: series times are not non-decreasing");
        }
    }
    return window_scan(series, 48.0, true) || window_scan(series, 168.0, false);
}

std::vector<std::pair<double, double>> scr_series(const Hospitalization& h,
                                                  const PipelineConfig& cfg) {
    std::vector<std::pair<double, double>> out;
    for (const auto& lab : h.labs) {
        if (lab.test_name == cfg.scr_test_name && !is_missing(lab.value)) {
            out.emplace_back(lab.time, lab.value);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

LabelMap label_all(const PatientStore& store, const PipelineConfig& cfg) {
    LabelMap labels;
    for (const auto& [pid, hs] : store.patients) {
        for (const auto& h : hs) {
            LabelRecord rec;
            rec.admit_id = h.admit_id;
            rec.by_code = aki_by_code(h, cfg);
            rec.by_scr = aki_by_scr(scr_series(h, cfg));
            labels.emplace(h.admit_id, std::move(rec));
        }
    }
    return labels;
}

namespace {

bool has_esrd_code(const Hospitalization& h, const PipelineConfig& cfg) {
    for (const auto& c : h.codes) {
        if (c.system == CodeSystem::icd9_dx && c.code == cfg.esrd_dx_code) return true;
    }
    return false;
}

bool has_transplant_px(const Hospitalization& h, const PipelineConfig& cfg) {
    for (const auto& c : h.codes) {
        if (c.system == CodeSystem::icd9_px &&
            c.code.rfind(cfg.renal_transplant_px_prefix, 0) == 0) {
            return true;
        }
    }
    return false;
}

}  // namespace

CohortView select_cohort(const PatientStore& store, const LabelMap& labels,
                         const PipelineConfig& cfg) {
    (void)labels;  // labels are computed first per the pipeline contract
    CohortView view;
    for (const auto& [pid, hs] : store.patients) {
        std::vector<std::string> kept;
        bool esrd_seen = false;
        bool transplant_after_esrd = false;
        for (const auto& h : hs) {
            if (h.age_at_admission < 18.0) {
                ++view.excluded_under_18;
                continue;
            }
            if (esrd_seen && !transplant_after_esrd) {
                ++view.excluded_post_esrd;
            } else {
                kept.push_back(h.admit_id);
            }
            if (esrd_seen && has_transplant_px(h, cfg)) transplant_after_esrd = true;
            if (has_esrd_code(h, cfg)) {
                esrd_seen = true;
                if (has_transplant_px(h, cfg)) transplant_after_esrd = true;
            }
        }
        if (kept.size() >= 2) {
            view.eligible.emplace(pid, std::move(kept));
        } else {
            ++view.excluded_single_stay_patients;
        }
    }
    return view;
}

std::vector<TrainingSample> build_samples(const CohortView& cohort, const LabelMap& labels) {
    std::vector<TrainingSample> samples;
    for (const auto& [pid, admits] : cohort.eligible) {
        for (std::size_t k = 1; k < admits.size(); ++k) {
            TrainingSample s;
            s.patient_id = pid;
            s.target_admit_id = admits[k];
            s.prior_admit_ids.assign(admits.begin(), admits.begin() + k);
            s.label = labels.at(admits[k]).aki();
            samples.push_back(std::move(s));
        }
    }
    return samples;
}

Crosstab diagnosis_crosstab(const LabelMap& labels) {
    Crosstab t;
    for (const auto& [id, rec] : labels) {
        if (rec.by_code && rec.by_scr) ++t.code_and_scr;
        else if (rec.by_code) ++t.code_only;
        else if (rec.by_scr) ++t.scr_only;
        else ++t.neither;
    }
    return t;
}

}  // namespace aki
