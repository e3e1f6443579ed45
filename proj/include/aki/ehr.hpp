#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "aki/config.hpp"

namespace aki {

// Times are fractional hours from the dataset epoch; the 48 h / 7 d label
// windows are then integral.

enum class AbnormalFlag { none, high, low, abnormal };

std::string to_string(AbnormalFlag f);
AbnormalFlag parse_abnormal_flag(const std::string& s);

struct LabEvent {
    std::string test_name;
    double time = 0.0;
    double value = 0.0;  // NaN when unreported
    AbnormalFlag flag = AbnormalFlag::none;
};

struct MedEvent {
    std::string description;  // dosage-stripped
    std::string pharm_class;
    std::string pharm_subclass;
    std::string therapeutic_class;
    double time = 0.0;
};

enum class CodeSystem { icd9_dx, icd9_px, cpt4, drg };

struct CodedEvent {
    CodeSystem system = CodeSystem::icd9_dx;
    std::string code;
    std::string precision_key;  // truncate_code(code, configured precision)
};

struct Hospitalization {
    std::string admit_id;
    std::string patient_id;
    double admit_time = 0.0;
    double discharge_time = 0.0;
    double age_at_admission = 0.0;  // years
    std::string race, gender, marital_status, discharge_disposition;
    std::vector<std::string> insurances;
    std::vector<std::string> locations;
    std::string admit_day, discharge_day;  // weekday categorical
    std::vector<LabEvent> labs;
    std::vector<MedEvent> meds;
    std::vector<CodedEvent> codes;

    double length_of_stay_days() const { return (discharge_time - admit_time) / 24.0; }
};

// Completed stores are immutable and shared read-only across fold workers.
struct PatientStore {
    std::map<std::string, std::vector<Hospitalization>> patients;  // ordered by admit_time
    // admit_id -> (patient_id, index into that patient's list)
    std::unordered_map<std::string, std::pair<std::string, std::size_t>> admit_index;

    std::size_t hospitalization_count() const;
    const Hospitalization* find(const std::string& admit_id) const;
};

struct RejectReport {
    struct Item {
        std::string table;
        std::size_t line = 0;
        std::string reason;
    };
    std::vector<Item> items;
    std::size_t count(const std::string& table) const;
};

// First `precision` significant characters; the decimal point is kept in the
// output but does not count toward precision.
std::string truncate_code(const std::string& code, int precision);

std::string strip_dosage(const std::string& description, const PipelineConfig& cfg);

std::string weekday_name(double time_hours);

PatientStore parse_tables(std::istream& admin, std::istream& lab, std::istream& pharmacy,
                          const PipelineConfig& cfg, RejectReport& rejects);

PatientStore parse_table_files(const std::string& admin_path, const std::string& lab_path,
                               const std::string& pharmacy_path, const PipelineConfig& cfg,
                               RejectReport& rejects);

}  // namespace aki
