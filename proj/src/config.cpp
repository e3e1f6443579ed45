#include "aki/config.hpp"

#include <fstream>

#include <json.hpp>

#include "aki/common.hpp"

namespace aki {

PipelineConfig PipelineConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("bad config file " + path + ": " + e.what());
    }

    PipelineConfig cfg;
    if (j.contains("delimiter")) {
        const std::string d = j["delimiter"].get<std::string>();
        if (d.size() != 1) throw ConfigError("delimiter must be a single character");
        cfg.delimiter = d[0];
    }
    if (j.contains("code_precision")) {
        cfg.code_precision = j["code_precision"].get<int>();
        if (cfg.code_precision < 1) throw ConfigError("code_precision must be >= 1");
    }
    if (j.contains("min_support")) cfg.min_support = j["min_support"].get<std::size_t>();
    if (j.contains("dosage_units")) cfg.dosage_units = j["dosage_units"].get<std::vector<std::string>>();
    if (j.contains("dosage_forms")) cfg.dosage_forms = j["dosage_forms"].get<std::vector<std::string>>();
    if (j.contains("scr_test_name")) cfg.scr_test_name = j["scr_test_name"].get<std::string>();
    if (j.contains("aki_dx_codes")) cfg.aki_dx_codes = j["aki_dx_codes"].get<std::vector<std::string>>();
    if (j.contains("esrd_dx_code")) cfg.esrd_dx_code = j["esrd_dx_code"].get<std::string>();
    if (j.contains("renal_transplant_px_prefix")) {
        cfg.renal_transplant_px_prefix = j["renal_transplant_px_prefix"].get<std::string>();
    }
    auto load_columns = [&](const char* key, std::unordered_map<std::string, std::string>& out) {
        if (!j.contains("columns") || !j["columns"].contains(key)) return;
        for (const auto& [logical, physical] : j["columns"][key].items()) {
            out[logical] = physical.get<std::string>();
        }
    };
    load_columns("admin", cfg.admin_columns);
    load_columns("lab", cfg.lab_columns);
    load_columns("pharmacy", cfg.pharmacy_columns);
    return cfg;
}

}  // namespace aki
