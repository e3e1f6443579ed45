#include "aki/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "aki/common.hpp"
#include "aki/csv.hpp"
#include "aki/parallel.hpp"
#include "aki/rng.hpp"

namespace aki {

namespace {

const char* kRaces[] = {"White", "Black", "Asian", "Hispanic", "Other"};
const double kRaceP[] = {0.55, 0.2, 0.1, 0.1, 0.05};
const char* kMarital[] = {"Single", "Married", "Divorced", "Widowed"};
const char* kInsurance[] = {"Medicare", "Medicaid", "Private"};
const char* kLocations[] = {"ER", "ICU", "WARD", "OR"};
const char* kDispositions[] = {"Home", "SNF", "Rehab", "Home"};

struct Med {
    const char* description;
    const char* pclass;
    const char* psub;
    const char* tclass;
};
const Med kLoopMed = {"FUROSEMIDE 40 MG TAB", "LOOP DIURETICS", "LOOP", "DIURETICS"};
const Med kOtherMeds[] = {
    {"METFORMIN 500 MG TAB", "BIGUANIDES", "BIGUANIDE", "ANTIDIABETICS"},
    {"LISINOPRIL 10 MG TAB", "ACE INHIBITORS", "ACE", "ANTIHYPERTENSIVES"},
    {"ASPIRIN 81 MG TAB", "SALICYLATES", "NSAID", "ANALGESICS"},
    {"ATORVASTATIN 20 MG TAB", "STATINS", "HMG COA", "ANTILIPEMICS"},
    {"PANTOPRAZOLE 40 MG TAB", "PPI", "PPI", "GI AGENTS"},
    {"HEPARIN 5000 UNIT/ML INJ", "ANTICOAGULANTS", "HEPARINS", "BLOOD MODIFIERS"},
};

const char* kChronicDx[] = {"585.3", "250.00", "428.0", "401.9", "272.4"};
const char* kAcuteDx[] = {"486",   "599.0", "276.1", "780.60", "786.05", "414.01",
                          "427.31", "038.9", "518.81", "285.9",  "305.1",  "311"};
const char* kPx[] = {"99.04", "38.93", "96.71", "96.04"};
const char* kCpt[] = {"99213", "99232", "71020", "36415", "93010"};
const char* kDrg[] = {"291", "292", "871", "470", "194"};

template <typename T, std::size_t N>
const T& pick(Rng& rng, const T (&arr)[N]) {
    return arr[rng.index(N)];
}

struct StaySkel {
    double admit = 0, discharge = 0;
    double age = 0;
    double un_center = 0;   // urea nitrogen level for the stay
    int loop_count = 0;
    double creat_base = 0;
    double u_label = 0;     // label threshold draw
    double noise = 0;
    int mechanism = 0;      // 0 = code+scr, 1 = code only, 2 = scr only
    int label = 0;
};

struct PatientSkel {
    std::string id;
    bool minor = false;
    int esrd_stay = -1;  // stay index acquiring the 585.9 code, -1 = never
    std::string race, gender, marital;
    std::vector<std::string> insurances;
    std::vector<StaySkel> stays;
};

PatientSkel make_skeleton(const SynthConfig& cfg, std::size_t p) {
    Rng rng(derive_seed(cfg.seed, {0x5ce1, p}));
    PatientSkel pt;
    {
        std::ostringstream id;
        id << "P" << p;
        pt.id = id.str();
    }
    pt.minor = rng.uniform() < cfg.frac_minors;
    const double r = rng.uniform();
    double acc = 0.0;
    pt.race = kRaces[0];
    for (std::size_t i = 0; i < 5; ++i) {
        acc += kRaceP[i];
        if (r < acc) {
            pt.race = kRaces[i];
            break;
        }
    }
    pt.gender = rng.uniform() < 0.5 ? "F" : "M";
    pt.marital = pick(rng, kMarital);
    pt.insurances.push_back(pick(rng, kInsurance));
    if (rng.uniform() < 0.3) pt.insurances.push_back(pick(rng, kInsurance));

    std::size_t n_stays = 1;
    const double pgeo = 1.0 / cfg.mean_stays;
    while (n_stays < cfg.max_stays && rng.uniform() > pgeo) ++n_stays;
    if (rng.uniform() < cfg.frac_esrd && n_stays >= 3) {
        pt.esrd_stay = static_cast<int>(rng.index(n_stays - 1)) + 1;
    }

    const double age0 = pt.minor ? rng.uniform(5.0, 17.0) : rng.uniform(25.0, 85.0);
    const double un_prop = rng.normal();
    const double loop_prob = rng.uniform(0.05, 0.6);
    const double creat_base = rng.uniform(0.6, 1.1);

    double t = rng.uniform(0.0, 1000.0);
    for (std::size_t s = 0; s < n_stays; ++s) {
        StaySkel st;
        st.admit = t;
        st.discharge = t + rng.uniform(24.0, 240.0);
        t = st.discharge + rng.uniform(100.0, 2000.0);
        st.age = age0 + 0.3 * static_cast<double>(s);
        st.un_center = std::max(5.0, 28.0 + 8.0 * un_prop + rng.normal() * 4.0);
        for (int d = 0; d < 3; ++d) st.loop_count += rng.uniform() < loop_prob;
        st.creat_base = creat_base;
        st.u_label = rng.uniform();
        st.noise = rng.normal();
        const double mech = rng.uniform();
        st.mechanism = mech < cfg.frac_code_and_scr ? 0
                       : mech < cfg.frac_code_and_scr + cfg.frac_code_only ? 1
                                                                           : 2;
        pt.stays.push_back(st);
    }
    return pt;
}

// deterministic sequential labels for a given intercept; returns the achieved
// prevalence over stays with at least one prior stay
double assign_labels(std::vector<PatientSkel>& patients, const SynthConfig& cfg,
                     double intercept) {
    std::size_t eligible = 0, positive = 0;
    for (auto& pt : patients) {
        int prior_aki = 0;
        double prior_max_un = kMissing;
        int prior_loop = 0;
        for (std::size_t s = 0; s < pt.stays.size(); ++s) {
            StaySkel& st = pt.stays[s];
            double z = intercept;
            z += cfg.coef_prior_aki * prior_aki;
            z += cfg.coef_age * (st.age - 60.0) / 10.0;
            if (!is_missing(prior_max_un)) z += cfg.coef_max_un * (prior_max_un - 30.0) / 20.0;
            z += cfg.coef_loop * prior_loop;
            z += cfg.noise_scale * st.noise;
            st.label = st.u_label < sigmoid(z) ? 1 : 0;
            if (s > 0) {
                ++eligible;
                positive += st.label;
            }
            prior_aki += st.label;
            prior_max_un = is_missing(prior_max_un) ? st.un_center
                                                    : std::max(prior_max_un, st.un_center);
            prior_loop += st.loop_count;
        }
    }
    return eligible ? static_cast<double>(positive) / static_cast<double>(eligible) : 0.0;
}

std::string join(const std::vector<std::string>& parts) {
    std::string s;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) s += '|';
        s += parts[i];
    }
    return s;
}

struct PatientRows {
    std::vector<std::string> admin, labs, meds;
    std::vector<TruthRow> truth;
};

PatientRows materialize(const PatientSkel& pt, const SynthConfig& cfg, std::size_t p,
                        double intercept) {
    Rng rng(derive_seed(cfg.seed, {0xe7e27, p}));
    PatientRows out;

    int prior_aki = 0;
    double prior_max_un = kMissing;
    int prior_loop = 0;
    for (std::size_t s = 0; s < pt.stays.size(); ++s) {
        const StaySkel& st = pt.stays[s];
        std::ostringstream aid;
        aid << "A" << p << "_" << s;
        const std::string admit_id = aid.str();

        std::vector<std::string> dx;
        for (const char* c : kChronicDx) {
            if (rng.uniform() < 0.25) dx.push_back(c);
        }
        const int n_acute = 1 + static_cast<int>(rng.index(3));
        for (int i = 0; i < n_acute; ++i) dx.push_back(pick(rng, kAcuteDx));
        if (pt.esrd_stay >= 0 && static_cast<int>(s) >= pt.esrd_stay) dx.push_back("585.9");

        std::vector<std::string> px;
        if (rng.uniform() < 0.5) px.push_back(pick(rng, kPx));
        std::vector<std::string> cpt;
        cpt.push_back(pick(rng, kCpt));
        if (rng.uniform() < 0.4) cpt.push_back(pick(rng, kCpt));
        std::vector<std::string> drg = {pick(rng, kDrg)};

        // creatinine trajectory: flat for negatives, a KDIGO-qualifying rise
        // for creatinine-mechanism cases
        const double b = st.creat_base;
        std::vector<std::pair<double, double>> creat;
        const double span = st.discharge - st.admit;
        creat.emplace_back(st.admit + 0.05 * span, b + rng.uniform(-0.08, 0.08));
        creat.emplace_back(st.admit + 0.25 * span, b + rng.uniform(-0.08, 0.08));
        const bool scr_case = st.label && st.mechanism != 1;
        if (scr_case) {
            const double ta = st.admit + 0.4 * span;
            const double tb = std::min(ta + 24.0, st.discharge);
            creat.emplace_back(ta, b);
            creat.emplace_back(tb, b + 0.5 + rng.uniform(0.0, 0.3));
        } else {
            creat.emplace_back(st.admit + 0.6 * span, b + rng.uniform(-0.08, 0.08));
        }
        if (st.label && st.mechanism != 2) dx.push_back("584.9");

        std::ostringstream admin;
        write_row(admin,
                  {admit_id, pt.id, fmt_double(st.admit), fmt_double(st.discharge),
                   fmt_double(st.age), pt.race, pt.gender, pt.marital, join(pt.insurances),
                   join({pick(rng, kLocations), "WARD"}), pick(rng, kDispositions), join(dx),
                   join(px), join(cpt), join(drg)});
        out.admin.push_back(admin.str());

        std::ostringstream labs;
        for (const auto& [time, value] : creat) {
            write_row(labs, {admit_id, "CREATININE", fmt_double(time), fmt_double(value),
                             value > 1.3 ? "high" : ""});
        }
        const int n_un = 2 + static_cast<int>(rng.index(3));
        for (int i = 0; i < n_un; ++i) {
            const double time = st.admit + (0.1 + 0.8 * rng.uniform()) * span;
            const double value = std::max(3.0, st.un_center + rng.normal() * 3.0);
            write_row(labs, {admit_id, "UREA NITROGEN", fmt_double(time), fmt_double(value),
                             value > 40.0 ? "high" : (value < 7.0 ? "low" : "")});
        }
        if (rng.uniform() < 0.7) {
            const double time = st.admit + 0.3 * span;
            const double value = 70.0 + rng.normal() * 25.0;
            write_row(labs, {admit_id, "GLUCOSE", fmt_double(time), fmt_double(value),
                             value > 180.0 ? "high" : (value < 60.0 ? "low" : "")});
        }
        out.labs.push_back(labs.str());

        std::ostringstream meds;
        for (int i = 0; i < st.loop_count; ++i) {
            write_row(meds, {admit_id, kLoopMed.description, kLoopMed.pclass, kLoopMed.psub,
                             kLoopMed.tclass, fmt_double(st.admit + (i + 1) * 4.0)});
        }
        const int n_other = static_cast<int>(rng.index(4));
        for (int i = 0; i < n_other; ++i) {
            const Med& med = pick(rng, kOtherMeds);
            write_row(meds, {admit_id, med.description, med.pclass, med.psub, med.tclass,
                             fmt_double(st.admit + (0.1 + 0.8 * rng.uniform()) * span)});
        }
        out.meds.push_back(meds.str());

        double z = intercept;
        z += cfg.coef_prior_aki * prior_aki;
        z += cfg.coef_age * (st.age - 60.0) / 10.0;
        if (!is_missing(prior_max_un)) z += cfg.coef_max_un * (prior_max_un - 30.0) / 20.0;
        z += cfg.coef_loop * prior_loop;
        z += cfg.noise_scale * st.noise;
        out.truth.push_back(TruthRow{admit_id, pt.id, sigmoid(z), st.label});

        prior_aki += st.label;
        prior_max_un =
            is_missing(prior_max_un) ? st.un_center : std::max(prior_max_un, st.un_center);
        prior_loop += st.loop_count;
    }
    return out;
}

}  // namespace

SynthOutput generate(const SynthConfig& cfg) {
    if (cfg.n_patients == 0) throw ConfigError("synth: n_patients must be positive");
    if (cfg.prevalence <= 0.0 || cfg.prevalence >= 1.0) {
        throw ConfigError("synth: prevalence must be in (0,1)");
    }
    if (cfg.mean_stays < 1.0) throw ConfigError("synth: mean stays must be >= 1");
    if (cfg.frac_code_and_scr + cfg.frac_code_only > 1.0) {
        throw ConfigError("synth: mechanism fractions exceed 1");
    }

    std::vector<PatientSkel> patients(cfg.n_patients);
    parallel_for(cfg.n_patients, [&](std::size_t p) { patients[p] = make_skeleton(cfg, p); });

    double lo = -30.0, hi = 30.0;
    double intercept = 0.0, achieved = 0.0;
    for (int iter = 0; iter < 60; ++iter) {
        intercept = 0.5 * (lo + hi);
        achieved = assign_labels(patients, cfg, intercept);
        if (achieved < cfg.prevalence) {
            lo = intercept;
        } else {
            hi = intercept;
        }
    }
    achieved = assign_labels(patients, cfg, intercept);
    if (std::abs(achieved - cfg.prevalence) > std::max(0.01, 0.25 * cfg.prevalence)) {
        throw ConfigError("synth: target prevalence unreachable; intercept " +
                          fmt_double(intercept) + " achieves " + fmt_double(achieved));
    }

    std::vector<PatientRows> rows(cfg.n_patients);
    parallel_for(cfg.n_patients,
                 [&](std::size_t p) { rows[p] = materialize(patients[p], cfg, p, intercept); });

    SynthOutput out;
    out.intercept = intercept;
    out.achieved_prevalence = achieved;
    std::ostringstream admin, labs, meds;
    write_row(admin, {"admit_id", "patient_id", "admit_time", "discharge_time", "age", "race",
                      "gender", "marital_status", "insurances", "locations",
                      "discharge_disposition", "dx_codes", "px_codes", "cpt_codes", "drg_codes"});
    write_row(labs, {"admit_id", "test_name", "time", "value", "abnormal_flag"});
    write_row(meds, {"admit_id", "description", "pharm_class", "pharm_subclass",
                     "therapeutic_class", "time"});
    for (const auto& pr : rows) {
        for (const auto& s : pr.admin) admin << s;
        for (const auto& s : pr.labs) labs << s;
        for (const auto& s : pr.meds) meds << s;
        out.truth.insert(out.truth.end(), pr.truth.begin(), pr.truth.end());
    }
    out.admin_csv = admin.str();
    out.lab_csv = labs.str();
    out.pharmacy_csv = meds.str();
    return out;
}

void write_synth(const SynthOutput& out, const std::string& dir) {
    std::filesystem::create_directories(dir);
    auto dump = [&](const std::string& name, const std::string& content) {
        std::ofstream f(dir + "/" + name);
        if (!f) throw InputError("cannot write " + dir + "/" + name);
        f << content;
    };
    dump("admin.csv", out.admin_csv);
    dump("labs.csv", out.lab_csv);
    dump("pharmacy.csv", out.pharmacy_csv);
    std::ostringstream truth;
    write_row(truth, {"admit_id", "patient_id", "risk", "label"});
    for (const auto& t : out.truth) {
        write_row(truth, {t.admit_id, t.patient_id, fmt_double(t.risk), std::to_string(t.label)});
    }
    dump("truth.csv", truth.str());
}

}  // namespace aki
