#include "aki/learners.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "aki/common.hpp"
#include "aki/rng.hpp"

namespace aki {

MostFrequentImputer MostFrequentImputer::fit(const Rows& X, const std::vector<std::string>* names) {
    MostFrequentImputer imp;
    if (X.empty()) return imp;
    const std::size_t p = X[0].size();
    imp.fill.resize(p);
    std::vector<double> observed;
    for (std::size_t j = 0; j < p; ++j) {
        observed.clear();
        for (const auto& row : X) {
            if (!is_missing(row[j])) observed.push_back(row[j]);
        }
        if (observed.empty()) {
            const std::string which = names ? (*names)[j] : std::to_string(j);
            throw ConfigError("imputer: feature fully missing in training data: " + which);
        }
        std::sort(observed.begin(), observed.end());
        // mode; ties broken toward the smallest value
        double best = observed[0];
        std::size_t best_n = 0;
        std::size_t i = 0;
        while (i < observed.size()) {
            std::size_t k = i;
            while (k < observed.size() && observed[k] == observed[i]) ++k;
            if (k - i > best_n) {
                best_n = k - i;
                best = observed[i];
            }
            i = k;
        }
        imp.fill[j] = best;
    }
    return imp;
}

void MostFrequentImputer::apply(std::vector<double>& row) const {
    for (std::size_t j = 0; j < row.size(); ++j) {
        if (is_missing(row[j])) row[j] = fill[j];
    }
}

void MostFrequentImputer::apply(Rows& X) const {
    for (auto& row : X) apply(row);
}

StandardScaler StandardScaler::fit(const Rows& X) {
    StandardScaler sc;
    if (X.empty()) return sc;
    const std::size_t p = X[0].size();
    sc.mean.assign(p, 0.0);
    sc.sd.assign(p, 0.0);
    const double n = static_cast<double>(X.size());
    for (const auto& row : X) {
        for (std::size_t j = 0; j < p; ++j) sc.mean[j] += row[j];
    }
    for (std::size_t j = 0; j < p; ++j) sc.mean[j] /= n;
    for (const auto& row : X) {
        for (std::size_t j = 0; j < p; ++j) {
            const double d = row[j] - sc.mean[j];
            sc.sd[j] += d * d;
        }
    }
    for (std::size_t j = 0; j < p; ++j) sc.sd[j] = std::sqrt(sc.sd[j] / n);
    return sc;
}

void StandardScaler::apply(std::vector<double>& row) const {
    for (std::size_t j = 0; j < row.size(); ++j) {
        row[j] -= mean[j];
        if (sd[j] > 0.0) row[j] /= sd[j];
    }
}

void StandardScaler::apply(Rows& X) const {
    for (auto& row : X) apply(row);
}

double LinearModel::decision(const std::vector<double>& row) const {
    double z = intercept;
    for (std::size_t j = 0; j < coef.size(); ++j) z += coef[j] * row[j];
    return z;
}

double PlattCalibrator::operator()(double score) const { return sigmoid(a * score + b); }

PlattCalibrator PlattCalibrator::fit(const std::vector<double>& scores,
                                     const std::vector<int>& labels) {
    std::size_t npos = 0, nneg = 0;
    for (int y : labels) (y ? npos : nneg)++;
    if (npos == 0 || nneg == 0) {
        throw ConfigError(
            "platt: calibration set contains a single class; use a larger calibration split");
    }
    const double tpos = (static_cast<double>(npos) + 1.0) / (static_cast<double>(npos) + 2.0);
    const double tneg = 1.0 / (static_cast<double>(nneg) + 2.0);
    const std::size_t n = scores.size();

    auto nll = [&](double a, double b) {
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double t = labels[i] ? tpos : tneg;
            const double z = a * scores[i] + b;
            // -t*log(p) - (1-t)*log(1-p), written stably
            loss += (z >= 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z))) - t * z;
        }
        return loss;
    };

    double a = 0.0;
    double b = std::log((static_cast<double>(npos) + 1.0) / (static_cast<double>(nneg) + 1.0));
    double cur = nll(a, b);
    for (int iter = 0; iter < 200; ++iter) {
        double ga = 0, gb = 0, haa = 1e-12, hab = 0, hbb = 1e-12;
        for (std::size_t i = 0; i < n; ++i) {
            const double t = labels[i] ? tpos : tneg;
            const double p = sigmoid(a * scores[i] + b);
            const double d = p - t;
            const double w = std::max(p * (1.0 - p), 1e-12);
            ga += d * scores[i];
            gb += d;
            haa += w * scores[i] * scores[i];
            hab += w * scores[i];
            hbb += w;
        }
        const double det = haa * hbb - hab * hab;
        double da = -(hbb * ga - hab * gb) / det;
        double db = -(haa * gb - hab * ga) / det;
        double step = 1.0;
        double next = nll(a + da, b + db);
        int backtracks = 0;
        while (next > cur && backtracks < 40) {
            step *= 0.5;
            next = nll(a + step * da, b + step * db);
            ++backtracks;
        }
        a += step * da;
        b += step * db;
        const bool tiny = std::abs(step * da) < 1e-10 && std::abs(step * db) < 1e-10;
        cur = next;
        if (tiny) break;
    }
    return PlattCalibrator{a, b};
}

std::vector<double> patient_weights(const std::vector<std::string>& patient_ids) {
    std::map<std::string, std::size_t> counts;
    for (const auto& id : patient_ids) ++counts[id];
    std::vector<double> w;
    w.reserve(patient_ids.size());
    for (const auto& id : patient_ids) w.push_back(1.0 / static_cast<double>(counts.at(id)));
    return w;
}

std::vector<std::size_t> sample_one_per_patient(const std::vector<std::string>& patient_ids,
                                                std::uint64_t seed) {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < patient_ids.size(); ++i) groups[patient_ids[i]].push_back(i);
    Rng rng(seed);
    std::vector<std::size_t> chosen;
    chosen.reserve(groups.size());
    for (const auto& [id, idx] : groups) chosen.push_back(idx[rng.index(idx.size())]);
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

}  // namespace aki
