#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "aki/common.hpp"
#include "aki/learners.hpp"
#include "aki/parallel.hpp"

namespace aki {

namespace {

struct SplitCandidate {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;

    // deterministic preference: highest gain, then lowest feature index, then
    // lowest threshold
    bool better_than(const SplitCandidate& o) const {
        if (!o.found) return found;
        if (!found) return false;
        if (gain != o.gain) return gain > o.gain;
        if (feature != o.feature) return feature < o.feature;
        return threshold < o.threshold;
    }
};

struct NodeStats {
    double wsum = 0.0;    // sum of weights
    double rsum = 0.0;    // weighted residual sum
    double qsum = 0.0;    // weighted p(1-p) sum, for the Newton leaf value
    std::size_t count = 0;
};

SplitCandidate best_split(const Rows& X, const std::vector<double>& residual,
                          const std::vector<double>& w, const std::vector<std::size_t>& rows,
                          const GbcConfig& cfg) {
    const std::size_t p = X.empty() ? 0 : X[0].size();
    double wtot = 0.0, rtot = 0.0;
    for (std::size_t i : rows) {
        wtot += w[i];
        rtot += w[i] * residual[i];
    }

    std::vector<SplitCandidate> per_feature(p);
    parallel_for(p, [&](std::size_t j) {
        std::vector<std::pair<double, std::size_t>> order;
        order.reserve(rows.size());
        for (std::size_t i : rows) order.emplace_back(X[i][j], i);
        std::sort(order.begin(), order.end());

        SplitCandidate best;
        double wl = 0.0, rl = 0.0;
        for (std::size_t k = 0; k + 1 < order.size(); ++k) {
            const std::size_t i = order[k].second;
            wl += w[i];
            rl += w[i] * residual[i];
            if (order[k].first == order[k + 1].first) continue;
            const std::size_t left_n = k + 1;
            const std::size_t right_n = order.size() - left_n;
            if (left_n < static_cast<std::size_t>(cfg.min_samples_leaf) ||
                right_n < static_cast<std::size_t>(cfg.min_samples_leaf)) {
                continue;
            }
            const double wr = wtot - wl;
            if (wl <= 0.0 || wr <= 0.0) continue;
            const double ml = rl / wl;
            const double mr = (rtot - rl) / wr;
            const double gain = wl * wr / (wl + wr) * (ml - mr) * (ml - mr);
            if (gain <= 0.0) continue;
            SplitCandidate c;
            c.found = true;
            c.feature = static_cast<int>(j);
            c.threshold = 0.5 * (order[k].first + order[k + 1].first);
            c.gain = gain;
            if (c.better_than(best)) best = c;
        }
        per_feature[j] = best;
    });

    SplitCandidate best;
    for (const auto& c : per_feature) {
        if (c.better_than(best)) best = c;
    }
    return best;
}

// residual = y - p; leaf value is the Newton step sum(w*r) / sum(w*p*(1-p))
double leaf_value(const std::vector<double>& residual, const std::vector<double>& q,
                  const std::vector<double>& w, const std::vector<std::size_t>& rows) {
    double num = 0.0, den = 0.0;
    for (std::size_t i : rows) {
        num += w[i] * residual[i];
        den += w[i] * q[i];
    }
    if (den <= 1e-12) den = 1e-12;
    return std::clamp(num / den, -15.0, 15.0);
}

void grow(Tree& tree, int node, int depth, const Rows& X, const std::vector<double>& residual,
          const std::vector<double>& q, const std::vector<double>& w,
          const std::vector<std::size_t>& rows, const GbcConfig& cfg) {
    TreeNode& nd = tree.nodes[node];
    if (depth >= cfg.max_depth || rows.size() < static_cast<std::size_t>(cfg.min_samples_split)) {
        nd.value = leaf_value(residual, q, w, rows);
        return;
    }
    const SplitCandidate split = best_split(X, residual, w, rows, cfg);
    if (!split.found) {
        nd.value = leaf_value(residual, q, w, rows);
        return;
    }
    std::vector<std::size_t> left, right;
    for (std::size_t i : rows) {
        (X[i][split.feature] <= split.threshold ? left : right).push_back(i);
    }
    nd.feature = split.feature;
    nd.threshold = split.threshold;
    nd.gain = split.gain;
    const int l = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    const int r = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[node].left = l;
    tree.nodes[node].right = r;
    grow(tree, l, depth + 1, X, residual, q, w, left, cfg);
    grow(tree, r, depth + 1, X, residual, q, w, right, cfg);
}

}  // namespace

double Tree::predict(const std::vector<double>& row) const {
    int node = 0;
    while (nodes[node].feature >= 0) {
        node = row[nodes[node].feature] <= nodes[node].threshold ? nodes[node].left
                                                                 : nodes[node].right;
    }
    return nodes[node].value;
}

double GbcModel::decision(const std::vector<double>& row) const {
    double z = init_score;
    for (const auto& t : trees) z += config.learning_rate * t.predict(row);
    return z;
}

double GbcModel::predict_proba(const std::vector<double>& row) const {
    return sigmoid(decision(row));
}

GbcModel fit_gbc(const Rows& X, const std::vector<int>& y, const std::vector<double>& weights,
                 const GbcConfig& cfg) {
    const std::size_t n = X.size();
    if (n == 0) throw InputError("gbt: empty training set");
    std::vector<double> w(n, 1.0);
    if (!weights.empty()) w = weights;

    double wtot = 0.0, wpos = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (w[i] <= 0.0) throw InputError("sample weights must be positive");
        wtot += w[i];
        if (y[i]) wpos += w[i];
    }
    if (wpos <= 0.0 || wpos >= wtot) throw InputError("gbt: training set has a single class");

    GbcModel model;
    model.config = cfg;
    model.init_score = std::log(wpos / (wtot - wpos));
    model.trees.reserve(cfg.n_estimators);
    model.train_deviance.reserve(cfg.n_estimators);

    std::vector<double> z(n, model.init_score);
    std::vector<double> residual(n), q(n);
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;

    for (int stage = 0; stage < cfg.n_estimators; ++stage) {
        for (std::size_t i = 0; i < n; ++i) {
            const double p = sigmoid(z[i]);
            residual[i] = y[i] - p;
            q[i] = std::max(p * (1.0 - p), 1e-12);
        }
        Tree tree;
        tree.nodes.emplace_back();
        grow(tree, 0, 0, X, residual, q, w, all, cfg);

        for (std::size_t i = 0; i < n; ++i) z[i] += cfg.learning_rate * tree.predict(X[i]);
        model.trees.push_back(std::move(tree));

        double dev = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double zi = z[i];
            dev += w[i] * 2.0 *
                   ((zi >= 0 ? zi + std::log1p(std::exp(-zi)) : std::log1p(std::exp(zi))) -
                    static_cast<double>(y[i]) * zi);
        }
        model.train_deviance.push_back(dev / wtot);
    }
    return model;
}

std::vector<double> gini_importance(const GbcModel& model, std::size_t n_features) {
    std::vector<double> imp(n_features, 0.0);
    double total = 0.0;
    for (const auto& tree : model.trees) {
        for (const auto& nd : tree.nodes) {
            if (nd.feature >= 0) {
                imp[nd.feature] += nd.gain;
                total += nd.gain;
            }
        }
    }
    if (total > 0.0) {
        for (double& v : imp) v /= total;
    }
    return imp;
}

}  // namespace aki
