#include "aki/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "aki/common.hpp"

namespace aki {

namespace {

void check_sizes(const std::vector<int>& y, const std::vector<double>& p) {
    if (y.size() != p.size()) throw InputError("metric: label/score length mismatch");
    if (y.empty()) throw InputError("metric: empty input");
}

}  // namespace

double roc_auc(const std::vector<int>& y, const std::vector<double>& scores) {
    check_sizes(y, scores);
    const std::size_t n = y.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // midranks over tie groups
    double pos_rank_sum = 0.0;
    std::size_t npos = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t k = i;
        while (k < n && scores[order[k]] == scores[order[i]]) ++k;
        const double midrank = 0.5 * static_cast<double>(i + 1 + k);  // average of ranks i+1..k
        for (std::size_t q = i; q < k; ++q) {
            if (y[order[q]]) {
                pos_rank_sum += midrank;
                ++npos;
            }
        }
        i = k;
    }
    const std::size_t nneg = n - npos;
    if (npos == 0 || nneg == 0) return kMissing;
    return (pos_rank_sum - 0.5 * static_cast<double>(npos) * (npos + 1)) /
           (static_cast<double>(npos) * static_cast<double>(nneg));
}

double pr_auc(const std::vector<int>& y, const std::vector<double>& scores) {
    check_sizes(y, scores);
    const std::size_t n = y.size();
    std::size_t total_pos = 0;
    for (int v : y) total_pos += v != 0;
    if (total_pos == 0) return kMissing;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    // step interpolation: area += (recall step) * precision at the new point,
    // descending thresholds, ties handled as one block
    double area = 0.0;
    double prev_recall = 0.0;
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t k = i;
        while (k < n && scores[order[k]] == scores[order[i]]) ++k;
        for (std::size_t q = i; q < k; ++q) (y[order[q]] ? tp : fp)++;
        const double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = k;
    }
    return area;
}

double brier(const std::vector<int>& y, const std::vector<double>& probs) {
    check_sizes(y, probs);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = probs[i] - y[i];
        s += d * d;
    }
    return s / static_cast<double>(y.size());
}

double log_loss(const std::vector<int>& y, const std::vector<double>& probs) {
    check_sizes(y, probs);
    constexpr double eps = 1e-15;
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double p = std::clamp(probs[i], eps, 1.0 - eps);
        s -= y[i] ? std::log(p) : std::log1p(-p);
    }
    return s / static_cast<double>(y.size());
}

CalibrationCurve calibration_curve(const std::vector<int>& y, const std::vector<double>& probs,
                                   int bins) {
    check_sizes(y, probs);
    if (bins < 1) throw InputError("calibration curve: bins must be >= 1");
    CalibrationCurve c;
    c.bin_lo.resize(bins);
    c.bin_hi.resize(bins);
    c.count.assign(bins, 0);
    c.mean_pred.assign(bins, 0.0);
    c.frac_pos.assign(bins, 0.0);
    for (int b = 0; b < bins; ++b) {
        c.bin_lo[b] = static_cast<double>(b) / bins;
        c.bin_hi[b] = static_cast<double>(b + 1) / bins;
    }
    for (std::size_t i = 0; i < y.size(); ++i) {
        int b = static_cast<int>(probs[i] * bins);
        b = std::clamp(b, 0, bins - 1);  // 1.0 lands in the last bin
        ++c.count[b];
        c.mean_pred[b] += probs[i];
        c.frac_pos[b] += y[i];
    }
    for (int b = 0; b < bins; ++b) {
        if (c.count[b]) {
            c.mean_pred[b] /= static_cast<double>(c.count[b]);
            c.frac_pos[b] /= static_cast<double>(c.count[b]);
        } else {
            c.mean_pred[b] = kMissing;
            c.frac_pos[b] = kMissing;
        }
    }
    return c;
}

}  // namespace aki
