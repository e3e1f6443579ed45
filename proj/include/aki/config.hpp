#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace aki {

// Pipeline configuration.  Every knob has a usable default; a JSON config
// file can override any subset (see docs/config.md for the schema).
struct PipelineConfig {
    char delimiter = ',';
    int code_precision = 3;
    std::size_t min_support = 100;

    // Token grammar for dosage stripping (rules are data, not code).
    std::vector<std::string> dosage_units = {
        "MG", "MCG", "G", "GM", "KG", "ML", "L", "%", "UNITS", "UNIT", "MEQ",
        "MMOL", "ML/HR", "MG/ML", "MCG/ML", "MG/HR", "HR", "IU",
    };
    std::vector<std::string> dosage_forms = {
        "TABLET", "TABLETS", "TAB", "TABS", "CAPSULE", "CAPSULES", "CAP", "CAPS",
        "SOLUTION", "SOLN", "SUSPENSION", "INJECTION", "INJ", "SYRUP", "VIAL",
        "SYRINGE", "PATCH", "CREAM", "OINTMENT", "ORAL", "IV", "INFUSION",
    };

    std::string scr_test_name = "CREATININE";

    // Label / cohort code sets.
    std::vector<std::string> aki_dx_codes = {"584.5", "584.6", "584.7", "584.8", "584.9"};
    std::string esrd_dx_code = "585.9";
    std::string renal_transplant_px_prefix = "55.6";

    // Clinical-baseline diagnosis groups (matched at the truncated key).
    std::string clinical_aki_key = "584";
    std::string clinical_ckd_key = "585";
    std::string clinical_diabetes_key = "250";
    std::string clinical_heart_failure_key = "428";

    // Logical -> physical column names per table; identity by default.
    std::unordered_map<std::string, std::string> admin_columns;
    std::unordered_map<std::string, std::string> lab_columns;
    std::unordered_map<std::string, std::string> pharmacy_columns;

    std::string admin_column(const std::string& logical) const { return mapped(admin_columns, logical); }
    std::string lab_column(const std::string& logical) const { return mapped(lab_columns, logical); }
    std::string pharmacy_column(const std::string& logical) const { return mapped(pharmacy_columns, logical); }

    static PipelineConfig load(const std::string& path);

  private:
    static std::string mapped(const std::unordered_map<std::string, std::string>& m,
                              const std::string& logical) {
        auto it = m.find(logical);
        return it == m.end() ? logical : it->second;
    }
};

}  // namespace aki
