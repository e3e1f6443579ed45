#include "aki/ehr.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "aki/common.hpp"
#include "aki/csv.hpp"

namespace aki {

std::string to_string(AbnormalFlag f) {
    switch (f) {
        case AbnormalFlag::high: return "high";
        case AbnormalFlag::low: return "low";
        case AbnormalFlag::abnormal: return "abnormal";
        default: return "";
    }
}

AbnormalFlag parse_abnormal_flag(const std::string& s) {
    std::string t;
    for (char c : s) t += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (t == "high" || t == "h") return AbnormalFlag::high;
    if (t == "low" || t == "l") return AbnormalFlag::low;
    if (t == "abnormal" || t == "a") return AbnormalFlag::abnormal;
    return AbnormalFlag::none;
}

std::size_t PatientStore::hospitalization_count() const {
    std::size_t n = 0;
    for (const auto& [id, hs] : patients) n += hs.size();
    return n;
}

const Hospitalization* PatientStore::find(const std::string& admit_id) const {
    auto it = admit_index.find(admit_id);
    if (it == admit_index.end()) return nullptr;
    return &patients.at(it->second.first)[it->second.second];
}

std::size_t RejectReport::count(const std::string& table) const {
    std::size_t n = 0;
    for (const auto& item : items) {
        if (item.table == table) ++n;
    }
    return n;
}

std::string truncate_code(const std::string& code, int precision) {
    if (code.empty()) throw InputError("truncate_code: empty code");
    if (precision < 1) throw InputError("truncate_code: precision must be >= 1");
    std::string out;
    int significant = 0;
    for (char c : code) {
        if (significant == precision) break;
        out += c;
        if (c != '.') ++significant;
    }
    return out;
}

namespace {

std::string upper(const std::string& s) {
    std::string t;
    for (char c : s) t += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return t;
}

bool is_number_token(const std::string& t) {
    if (t.empty()) return false;
    bool digit = false, dot = false;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const char c = t[i];
        if (std::isdigit(static_cast<unsigned char>(c))) {
            digit = true;
        } else if (c == '.' && !dot) {
            dot = true;
        } else if ((c == '-' || c == '/') && i > 0 && i + 1 < t.size()) {
            // range / ratio doses like 2-4 or 1/2
        } else {
            return false;
        }
    }
    return digit;
}

bool in_list(const std::vector<std::string>& list, const std::string& t) {
    return std::find(list.begin(), list.end(), t) != list.end();
}

// number glued to a unit, e.g. 40MG, 0.9%
bool is_number_unit_token(const std::string& t, const std::vector<std::string>& units) {
    std::size_t i = 0;
    while (i < t.size() &&
           (std::isdigit(static_cast<unsigned char>(t[i])) || t[i] == '.')) {
        ++i;
    }
    if (i == 0 || i == t.size()) return false;
    return in_list(units, t.substr(i));
}

std::vector<std::string> tokenize(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string t;
    while (is >> t) out.push_back(t);
    return out;
}

}  // namespace

std::string strip_dosage(const std::string& description, const PipelineConfig& cfg) {
    const std::string up = upper(description);
    std::vector<std::string> tokens = tokenize(up);
    while (tokens.size() > 1) {
        const std::string& t = tokens.back();
        if (is_number_token(t) || in_list(cfg.dosage_units, t) || in_list(cfg.dosage_forms, t) ||
            is_number_unit_token(t, cfg.dosage_units)) {
            tokens.pop_back();
        } else {
            break;
        }
    }
    std::string out;
    for (const auto& t : tokens) {
        if (!out.empty()) out += ' ';
        out += t;
    }
    return out.empty() ? up : out;
}

std::string weekday_name(double time_hours) {
    static const char* names[7] = {"MON", "TUE", "WED", "THU", "FRI", "SAT", "SUN"};
    long day = static_cast<long>(std::floor(time_hours / 24.0));
    long w = ((day % 7) + 7) % 7;
    return names[w];
}

namespace {

double parse_real(const std::string& s, const char* what) {
    if (s.empty()) return kMissing;
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw InputError(std::string("unparseable ") + what + ": '" + s + "'");
    }
    if (pos != s.size()) throw InputError(std::string("unparseable ") + what + ": '" + s + "'");
    return v;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == '|') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

struct AdminColumns {
    std::size_t admit_id, patient_id, admit_time, discharge_time, age, race, gender,
        marital_status, insurances, locations, discharge_disposition, dx_codes, px_codes,
        cpt_codes, drg_codes;
    std::optional<std::size_t> admit_day, discharge_day;
};

}  // namespace

PatientStore parse_tables(std::istream& admin, std::istream& lab, std::istream& pharmacy,
                          const PipelineConfig& cfg, RejectReport& rejects) {
    PatientStore store;

    DelimitedReader areader(admin, cfg.delimiter);
    AdminColumns ac{};
    ac.admit_id = areader.column(cfg.admin_column("admit_id"));
    ac.patient_id = areader.column(cfg.admin_column("patient_id"));
    ac.admit_time = areader.column(cfg.admin_column("admit_time"));
    ac.discharge_time = areader.column(cfg.admin_column("discharge_time"));
    ac.age = areader.column(cfg.admin_column("age"));
    ac.race = areader.column(cfg.admin_column("race"));
    ac.gender = areader.column(cfg.admin_column("gender"));
    ac.marital_status = areader.column(cfg.admin_column("marital_status"));
    ac.insurances = areader.column(cfg.admin_column("insurances"));
    ac.locations = areader.column(cfg.admin_column("locations"));
    ac.discharge_disposition = areader.column(cfg.admin_column("discharge_disposition"));
    ac.dx_codes = areader.column(cfg.admin_column("dx_codes"));
    ac.px_codes = areader.column(cfg.admin_column("px_codes"));
    ac.cpt_codes = areader.column(cfg.admin_column("cpt_codes"));
    ac.drg_codes = areader.column(cfg.admin_column("drg_codes"));
    if (areader.has_column(cfg.admin_column("admit_day"))) {
        ac.admit_day = areader.column(cfg.admin_column("admit_day"));
    }
    if (areader.has_column(cfg.admin_column("discharge_day"))) {
        ac.discharge_day = areader.column(cfg.admin_column("discharge_day"));
    }

    const std::size_t awidth = areader.header().size();
    std::vector<std::string> f;
    std::size_t line = 0;
    std::map<std::string, std::vector<Hospitalization>> by_patient;
    while (areader.next(f, line)) {
        if (f.size() != awidth) {
            rejects.items.push_back({"admin", line, "wrong field count"});
            continue;
        }
        try {
            Hospitalization h;
            h.admit_id = f[ac.admit_id];
            h.patient_id = f[ac.patient_id];
            if (h.admit_id.empty() || h.patient_id.empty()) {
                throw InputError("empty admit or patient id");
            }
            if (store.admit_index.count(h.admit_id)) {
                throw ConfigError("duplicate admit id: " + h.admit_id + " (line " +
                                  std::to_string(line) + ")");
            }
            h.admit_time = parse_real(f[ac.admit_time], "admit_time");
            h.discharge_time = parse_real(f[ac.discharge_time], "discharge_time");
            if (is_missing(h.admit_time) || is_missing(h.discharge_time)) {
                throw InputError("missing admit/discharge time");
            }
            if (h.discharge_time < h.admit_time) throw InputError("discharge before admit");
            h.age_at_admission = parse_real(f[ac.age], "age");
            h.race = f[ac.race];
            h.gender = f[ac.gender];
            h.marital_status = f[ac.marital_status];
            h.discharge_disposition = f[ac.discharge_disposition];
            h.insurances = split_list(f[ac.insurances]);
            h.locations = split_list(f[ac.locations]);
            h.admit_day = ac.admit_day ? f[*ac.admit_day] : weekday_name(h.admit_time);
            h.discharge_day =
                ac.discharge_day ? f[*ac.discharge_day] : weekday_name(h.discharge_time);
            auto add_codes = [&](std::size_t col, CodeSystem sys) {
                for (const auto& code : split_list(f[col])) {
                    h.codes.push_back({sys, code, truncate_code(code, cfg.code_precision)});
                }
            };
            add_codes(ac.dx_codes, CodeSystem::icd9_dx);
            add_codes(ac.px_codes, CodeSystem::icd9_px);
            add_codes(ac.cpt_codes, CodeSystem::cpt4);
            add_codes(ac.drg_codes, CodeSystem::drg);
            store.admit_index.emplace(h.admit_id, std::make_pair(h.patient_id, std::size_t{0}));
            by_patient[h.patient_id].push_back(std::move(h));
        } catch (const ConfigError&) {
            throw;
        } catch (const InputError& e) {
            rejects.items.push_back({"admin", line, e.what()});
        }
    }

    for (auto& [pid, hs] : by_patient) {
        std::sort(hs.begin(), hs.end(), [](const Hospitalization& a, const Hospitalization& b) {
            if (a.admit_time != b.admit_time) return a.admit_time < b.admit_time;
            return a.admit_id < b.admit_id;
        });
        for (std::size_t i = 0; i < hs.size(); ++i) {
            store.admit_index[hs[i].admit_id] = {pid, i};
        }
    }
    store.patients = std::move(by_patient);

    auto locate = [&](const std::string& admit_id) -> Hospitalization* {
        auto it = store.admit_index.find(admit_id);
        if (it == store.admit_index.end()) return nullptr;
        return &store.patients[it->second.first][it->second.second];
    };

    {
        DelimitedReader lreader(lab, cfg.delimiter);
        const std::size_t c_admit = lreader.column(cfg.lab_column("admit_id"));
        const std::size_t c_test = lreader.column(cfg.lab_column("test_name"));
        const std::size_t c_time = lreader.column(cfg.lab_column("time"));
        const std::size_t c_value = lreader.column(cfg.lab_column("value"));
        const std::size_t c_flag = lreader.column(cfg.lab_column("abnormal_flag"));
        const std::size_t width = lreader.header().size();
        while (lreader.next(f, line)) {
            if (f.size() != width) {
                rejects.items.push_back({"lab", line, "wrong field count"});
                continue;
            }
            try {
                Hospitalization* h = locate(f[c_admit]);
                if (!h) throw InputError("unknown admit id: " + f[c_admit]);
                LabEvent ev;
                ev.test_name = f[c_test];
                if (ev.test_name.empty()) throw InputError("empty test name");
                ev.time = parse_real(f[c_time], "time");
                if (is_missing(ev.time)) throw InputError("missing time");
                ev.value = parse_real(f[c_value], "value");
                ev.flag = parse_abnormal_flag(f[c_flag]);
                ev.time = std::clamp(ev.time, h->admit_time, h->discharge_time);
                h->labs.push_back(std::move(ev));
            } catch (const InputError& e) {
                rejects.items.push_back({"lab", line, e.what()});
            }
        }
    }

    {
        DelimitedReader preader(pharmacy, cfg.delimiter);
        const std::size_t c_admit = preader.column(cfg.pharmacy_column("admit_id"));
        const std::size_t c_desc = preader.column(cfg.pharmacy_column("description"));
        const std::size_t c_class = preader.column(cfg.pharmacy_column("pharm_class"));
        const std::size_t c_sub = preader.column(cfg.pharmacy_column("pharm_subclass"));
        const std::size_t c_ther = preader.column(cfg.pharmacy_column("therapeutic_class"));
        const std::size_t c_time = preader.column(cfg.pharmacy_column("time"));
        const std::size_t width = preader.header().size();
        while (preader.next(f, line)) {
            if (f.size() != width) {
                rejects.items.push_back({"pharmacy", line, "wrong field count"});
                continue;
            }
            try {
                Hospitalization* h = locate(f[c_admit]);
                if (!h) throw InputError("unknown admit id: " + f[c_admit]);
                MedEvent ev;
                ev.description = strip_dosage(f[c_desc], cfg);
                if (ev.description.empty()) throw InputError("empty medication description");
                ev.pharm_class = f[c_class];
                ev.pharm_subclass = f[c_sub];
                ev.therapeutic_class = f[c_ther];
                ev.time = parse_real(f[c_time], "time");
                if (is_missing(ev.time)) throw InputError("missing time");
                ev.time = std::clamp(ev.time, h->admit_time, h->discharge_time);
                h->meds.push_back(std::move(ev));
            } catch (const InputError& e) {
                rejects.items.push_back({"pharmacy", line, e.what()});
            }
        }
    }

    for (auto& [pid, hs] : store.patients) {
        for (auto& h : hs) {
            std::sort(h.labs.begin(), h.labs.end(),
                      [](const LabEvent& a, const LabEvent& b) { return a.time < b.time; });
            std::sort(h.meds.begin(), h.meds.end(),
                      [](const MedEvent& a, const MedEvent& b) { return a.time < b.time; });
        }
    }
    return store;
}

PatientStore parse_table_files(const std::string& admin_path, const std::string& lab_path,
                               const std::string& pharmacy_path, const PipelineConfig& cfg,
                               RejectReport& rejects) {
    std::ifstream a(admin_path), l(lab_path), p(pharmacy_path);
    if (!a) throw ConfigError("cannot open admin table: " + admin_path);
    if (!l) throw ConfigError("cannot open lab table: " + lab_path);
    if (!p) throw ConfigError("cannot open pharmacy table: " + pharmacy_path);
    return parse_tables(a, l, p, cfg, rejects);
}

}  // namespace aki
