// Compares the serial reference path (--threads 1) against the OpenMP path on
// the pipeline's hot loops and checks that both produce identical results.
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "aki/common.hpp"
#include "aki/evaluation.hpp"
#include "aki/featurize.hpp"
#include "aki/learners.hpp"
#include "aki/parallel.hpp"
#include "aki/rng.hpp"
#include "aki/systems.hpp"

namespace {

using namespace aki;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

FeatureMatrix make_matrix(std::size_t n, std::size_t p, std::uint64_t seed) {
    Rng rng(seed);
    FeatureMatrix m;
    for (std::size_t j = 0; j < p; ++j) {
        m.dict.add("f" + std::to_string(j), j % 3 ? FeatureKind::count : FeatureKind::continuous);
    }
    m.rows.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        m.rows[i].resize(p);
        for (std::size_t j = 0; j < p; ++j) {
            m.rows[i][j] = j % 3 ? static_cast<double>(rng.index(6)) : rng.normal();
        }
        const double z = 0.8 * m.rows[i][0] + 0.5 * m.rows[i][1] - 2.0;
        m.sample_ids.push_back("a" + std::to_string(i));
        m.patient_ids.push_back("p" + std::to_string(i / 3));
        m.labels.push_back(rng.uniform() < sigmoid(z) ? 1 : 0);
        m.n_priors.push_back(1);
    }
    return m;
}

}  // namespace

int main() {
    const FeatureMatrix m = make_matrix(4000, 60, 7);
    const PipelineConfig cfg;
    const SystemSpec spec = SystemSpec::resolve("GBC");

    std::vector<MetricRecord> serial_records;
    double serial_time = 0.0;
    for (int threads : {1, 0}) {
        thread_count() = threads;
        const auto t0 = Clock::now();
        const EvalReport report = run_cv(spec, cfg, m, 2, 5, 11);
        const double dt = seconds_since(t0);
        std::printf("threads=%d (%s): %.2fs for 10 GBC folds\n", threads,
                    threads == 1 ? "serial reference" : "openmp", dt);
        if (threads == 1) {
            serial_records = report.records;
            serial_time = dt;
        } else {
            for (std::size_t i = 0; i < report.records.size(); ++i) {
                if (report.records[i].roc_auc != serial_records[i].roc_auc ||
                    report.records[i].brier != serial_records[i].brier) {
                    std::printf("MISMATCH at fold %zu\n", i);
                    return 1;
                }
            }
            std::printf("results identical; speedup %.2fx\n", serial_time / dt);
        }
    }
    return 0;
}
