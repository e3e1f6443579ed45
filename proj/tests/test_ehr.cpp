#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "aki/common.hpp"
#include "aki/ehr.hpp"

using namespace aki;

namespace {

const char* kAdminHeader =
    "admit_id,patient_id,admit_time,discharge_time,age,race,gender,marital_status,"
    "insurances,locations,discharge_disposition,dx_codes,px_codes,cpt_codes,drg_codes\n";
const char* kLabHeader = "admit_id,test_name,time,value,abnormal_flag\n";
const char* kMedHeader =
    "admit_id,description,pharm_class,pharm_subclass,therapeutic_class,time\n";

PatientStore parse(const std::string& admin_rows, const std::string& lab_rows,
                   const std::string& med_rows, RejectReport& rejects) {
    PipelineConfig cfg;
    std::istringstream a(kAdminHeader + admin_rows);
    std::istringstream l(kLabHeader + lab_rows);
    std::istringstream p(kMedHeader + med_rows);
    return parse_tables(a, l, p, cfg, rejects);
}

}  // namespace

TEST_CASE("code truncation counts significant characters, not the dot") {
    CHECK(truncate_code("585.9", 3) == "585");
    CHECK(truncate_code("584.5", 4) == "584.5");
    CHECK(truncate_code("584.51", 4) == "584.5");
    CHECK(truncate_code("V4511", 3) == "V45");
    CHECK(truncate_code("42", 3) == "42");
    CHECK(truncate_code("4.2.1", 2) == "4.2");
    CHECK_THROWS_AS(truncate_code("", 3), InputError);
    CHECK_THROWS_AS(truncate_code("584", 0), InputError);
}

TEST_CASE("dosage stripping removes trailing dose tokens, keeps the drug") {
    PipelineConfig cfg;
    CHECK(strip_dosage("Furosemide 40 MG Tab", cfg) == "FUROSEMIDE");
    CHECK(strip_dosage("HEPARIN 5000 UNITS", cfg) == "HEPARIN");
    CHECK(strip_dosage("insulin glargine 100 unit", cfg) == "INSULIN GLARGINE");
    CHECK(strip_dosage("ASPIRIN 81MG", cfg) == "ASPIRIN");
    CHECK(strip_dosage("MAGNESIUM SULFATE 2-4 G", cfg) == "MAGNESIUM SULFATE");
    // never strips down to an empty name
    CHECK(strip_dosage("40 MG", cfg) == "40");
    CHECK(strip_dosage("Vitamin B12", cfg) == "VITAMIN B12");
}

TEST_CASE("weekday names cycle with a 24h period") {
    CHECK(weekday_name(0.0) == "MON");
    CHECK(weekday_name(23.9) == "MON");
    CHECK(weekday_name(24.0) == "TUE");
    CHECK(weekday_name(24.0 * 6) == "SUN");
    CHECK(weekday_name(24.0 * 7) == "MON");
    CHECK(weekday_name(-24.0) == "SUN");
}

TEST_CASE("abnormal flag parsing is case-insensitive with short forms") {
    CHECK(parse_abnormal_flag("High") == AbnormalFlag::high);
    CHECK(parse_abnormal_flag("L") == AbnormalFlag::low);
    CHECK(parse_abnormal_flag("a") == AbnormalFlag::abnormal);
    CHECK(parse_abnormal_flag("") == AbnormalFlag::none);
    CHECK(parse_abnormal_flag("weird") == AbnormalFlag::none);
}

TEST_CASE("stays are grouped per patient and ordered by admit time") {
    RejectReport rejects;
    PatientStore store = parse(
        "A2,P1,200,250,60,White,F,Single,Medicare,ER,Home,584.9|250.00,,99213,291\n"
        "A1,P1,10,50,59,White,F,Single,Medicare,ER,Home,428.0,99.04,,470\n"
        "A3,P2,5,20,40,Black,M,Married,Private,ICU|WARD,SNF,,,,\n",
        "", "", rejects);
    CHECK(rejects.items.empty());
    REQUIRE(store.patients.count("P1"));
    const auto& p1 = store.patients.at("P1");
    REQUIRE(p1.size() == 2);
    CHECK(p1[0].admit_id == "A1");
    CHECK(p1[1].admit_id == "A2");
    CHECK(p1[1].codes.size() == 4);
    CHECK(p1[1].codes[0].precision_key == "584");
    CHECK(store.find("A3")->locations.size() == 2);
    CHECK(store.find("A1")->admit_day == weekday_name(10));
    CHECK(store.hospitalization_count() == 3);
}

TEST_CASE("malformed rows are rejected with line numbers, parsing continues") {
    RejectReport rejects;
    PatientStore store = parse(
        "A1,P1,10,50,59,White,F,Single,,,Home,,,,\n"
        "A2,P1,xx,70,60,White,F,Single,,,Home,,,,\n"
        "A3,P1,90,80,60,White,F,Single,,,Home,,,,\n",
        "A1,CREATININE,20,1.1,\n"
        "NOPE,CREATININE,20,1.1,\n"
        "A1,CREATININE,abc,1.1,\n",
        "A1,FUROSEMIDE 40 MG,LOOP,LOOP,DIURETICS,30\n"
        "NOPE,ASPIRIN,SAL,NSAID,ANALGESICS,30\n",
        rejects);
    CHECK(store.hospitalization_count() == 1);
    CHECK(rejects.count("admin") == 2);
    CHECK(rejects.count("lab") == 2);
    CHECK(rejects.count("pharmacy") == 1);
    CHECK(rejects.items[0].line == 3);
    CHECK(store.find("A1")->labs.size() == 1);
    CHECK(store.find("A1")->meds.size() == 1);
    CHECK(store.find("A1")->meds[0].description == "FUROSEMIDE");
}

TEST_CASE("duplicate admit ids are fatal") {
    RejectReport rejects;
    CHECK_THROWS_AS(parse("A1,P1,10,50,59,W,F,S,,,H,,,,\n"
                          "A1,P2,10,50,59,W,F,S,,,H,,,,\n",
                          "", "", rejects),
                    ConfigError);
}

TEST_CASE("event times are clamped into the stay window") {
    RejectReport rejects;
    PatientStore store = parse("A1,P1,100,200,59,W,F,S,,,H,,,,\n",
                               "A1,CREATININE,50,1.0,\n"
                               "A1,CREATININE,250,1.4,h\n",
                               "", rejects);
    const auto* h = store.find("A1");
    REQUIRE(h->labs.size() == 2);
    CHECK(h->labs[0].time == 100);
    CHECK(h->labs[1].time == 200);
    CHECK(h->labs[1].flag == AbnormalFlag::high);
}

TEST_CASE("lab values may be missing while the event is kept") {
    RejectReport rejects;
    PatientStore store = parse("A1,P1,0,100,59,W,F,S,,,H,,,,\n", "A1,CULTURE,10,,a\n", "",
                               rejects);
    REQUIRE(store.find("A1")->labs.size() == 1);
    CHECK(is_missing(store.find("A1")->labs[0].value));
    CHECK(store.find("A1")->labs[0].flag == AbnormalFlag::abnormal);
}
