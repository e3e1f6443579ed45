#pragma once

#include <cstddef>
#include <vector>

namespace aki {

// Rank-based (Mann-Whitney) AUC; tied scores contribute 1/2. NaN when the
// labels are single-class.
double roc_auc(const std::vector<int>& y, const std::vector<double>& scores);

// Area under the precision-recall curve with step interpolation. NaN when no
// positives exist.
double pr_auc(const std::vector<int>& y, const std::vector<double>& scores);

double brier(const std::vector<int>& y, const std::vector<double>& probs);

// Probabilities clipped to [1e-15, 1 - 1e-15].
double log_loss(const std::vector<int>& y, const std::vector<double>& probs);

struct CalibrationCurve {
    std::vector<double> bin_lo, bin_hi;   // [0,0.1), ..., [0.9,1.0]
    std::vector<std::size_t> count;
    std::vector<double> mean_pred;        // NaN for empty bins
    std::vector<double> frac_pos;
};

CalibrationCurve calibration_curve(const std::vector<int>& y, const std::vector<double>& probs,
                                   int bins = 10);

}  // namespace aki
