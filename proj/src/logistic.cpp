#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "aki/common.hpp"
#include "aki/learners.hpp"
#include "aki/parallel.hpp"
#include "aki/rng.hpp"

namespace aki {

namespace {

// Effective per-sample weight including balanced class multipliers
// cls(y) = W / (2 * W_y).
std::vector<double> effective_weights(const std::vector<int>& y, const std::vector<double>& w,
                                      bool balanced) {
    std::vector<double> u(y.size());
    double total = 0, pos = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double wi = w.empty() ? 1.0 : w[i];
        if (wi <= 0.0) throw InputError("sample weights must be positive");
        total += wi;
        if (y[i]) pos += wi;
        u[i] = wi;
    }
    if (balanced) {
        const double neg = total - pos;
        if (pos > 0.0 && neg > 0.0) {
            const double cpos = total / (2.0 * pos);
            const double cneg = total / (2.0 * neg);
            for (std::size_t i = 0; i < y.size(); ++i) u[i] *= y[i] ? cpos : cneg;
        }
    }
    return u;
}

double soft_threshold(double z, double lambda) {
    if (z > lambda) return z - lambda;
    if (z < -lambda) return z + lambda;
    return 0.0;
}

}  // namespace

LinearModel fit_l1_logistic(const Rows& X, const std::vector<int>& y,
                            const std::vector<double>& weights, const L1LogisticConfig& cfg,
                            L1FitInfo* info) {
    if (cfg.C <= 0.0) throw ConfigError("l1 logistic: C must be positive");
    const std::size_t n = X.size();
    const std::size_t p = n ? X[0].size() : 0;
    const std::vector<double> u = effective_weights(y, weights, cfg.balanced);

    std::vector<double> lambda(p, 1.0 / cfg.C);
    if (!cfg.penalty_scale.empty()) {
        for (std::size_t j = 0; j < p; ++j) lambda[j] *= cfg.penalty_scale[j];
    }

    LinearModel model;
    model.coef.assign(p, 0.0);
    std::vector<double> z(n, 0.0);   // linear predictor
    std::vector<double> prob(n, 0.5);

    auto refresh_probs = [&]() {
        for (std::size_t i = 0; i < n; ++i) prob[i] = sigmoid(z[i]);
    };

    // Subgradient residual of the penalized objective; the stopping criterion.
    auto kkt_residual = [&]() {
        double worst = 0.0;
        double g0 = 0.0;
        for (std::size_t i = 0; i < n; ++i) g0 += u[i] * (prob[i] - y[i]);
        worst = std::abs(g0);
        for (std::size_t j = 0; j < p; ++j) {
            double g = 0.0;
            for (std::size_t i = 0; i < n; ++i) g += u[i] * (prob[i] - y[i]) * X[i][j];
            const double v = model.coef[j] == 0.0
                                 ? std::max(0.0, std::abs(g) - lambda[j])
                                 : std::abs(g + lambda[j] * (model.coef[j] > 0 ? 1.0 : -1.0));
            worst = std::max(worst, v);
        }
        return worst;
    };

    int sweep = 0;
    bool converged = false;
    for (; sweep < cfg.max_sweeps; ++sweep) {
        double max_delta = 0.0;

        // unpenalized intercept, one Newton step
        {
            double g = 0.0, h = 1e-12;
            for (std::size_t i = 0; i < n; ++i) {
                g += u[i] * (prob[i] - y[i]);
                h += u[i] * std::max(prob[i] * (1.0 - prob[i]), 1e-12);
            }
            const double d = -g / h;
            if (d != 0.0) {
                model.intercept += d;
                for (std::size_t i = 0; i < n; ++i) z[i] += d;
                refresh_probs();
                max_delta = std::max(max_delta, std::abs(d));
            }
        }

        for (std::size_t j = 0; j < p; ++j) {
            double g = 0.0, h = 1e-12;
            for (std::size_t i = 0; i < n; ++i) {
                const double x = X[i][j];
                if (x == 0.0) continue;
                g += u[i] * (prob[i] - y[i]) * x;
                h += u[i] * std::max(prob[i] * (1.0 - prob[i]), 1e-12) * x * x;
            }
            const double old = model.coef[j];
            double next = soft_threshold(old * h - g, lambda[j]) / h;
            double d = next - old;
            if (d == 0.0) continue;
            d = std::clamp(d, -5.0, 5.0);  // guard against Newton overshoot
            model.coef[j] = old + d;
            for (std::size_t i = 0; i < n; ++i) z[i] += d * X[i][j];
            refresh_probs();
            max_delta = std::max(max_delta, std::abs(d));
        }

        if (max_delta < cfg.tol && kkt_residual() <= cfg.kkt_tol) {
            converged = true;
            ++sweep;
            break;
        }
    }

    const double residual = kkt_residual();
    if (!converged) {
        std::fprintf(stderr,
                     "warning: l1 logistic did not converge in %d sweeps (KKT residual %.3e)\n",
                     cfg.max_sweeps, residual);
    }
    if (info) {
        info->converged = converged;
        info->sweeps = sweep;
        info->kkt_residual = residual;
    }
    return model;
}

LinearModel fit_ridge_logistic(const Rows& X, const std::vector<int>& y,
                               const std::vector<double>& weights, double C, bool balanced) {
    if (C <= 0.0) throw ConfigError("ridge logistic: C must be positive");
    const std::size_t n = X.size();
    const std::size_t p = n ? X[0].size() : 0;
    const std::vector<double> u = effective_weights(y, weights, balanced);
    const double lambda = 1.0 / C;

    // Newton with backtracking on beta = (coef, intercept)
    std::vector<double> beta(p + 1, 0.0);
    auto predictor = [&](const std::vector<double>& b, std::size_t i) {
        double z = b[p];
        for (std::size_t j = 0; j < p; ++j) z += b[j] * X[i][j];
        return z;
    };
    auto objective = [&](const std::vector<double>& b) {
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double z = predictor(b, i);
            loss += u[i] * ((z >= 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z))) -
                            static_cast<double>(y[i]) * z);
        }
        for (std::size_t j = 0; j < p; ++j) loss += 0.5 * lambda * b[j] * b[j];
        return loss;
    };

    double cur = objective(beta);
    for (int iter = 0; iter < 100; ++iter) {
        std::vector<double> grad(p + 1, 0.0);
        std::vector<double> hess((p + 1) * (p + 1), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double pr = sigmoid(predictor(beta, i));
            const double d = u[i] * (pr - y[i]);
            const double w = u[i] * std::max(pr * (1.0 - pr), 1e-10);
            for (std::size_t j = 0; j <= p; ++j) {
                const double xj = j < p ? X[i][j] : 1.0;
                grad[j] += d * xj;
                for (std::size_t k = j; k <= p; ++k) {
                    const double xk = k < p ? X[i][k] : 1.0;
                    hess[j * (p + 1) + k] += w * xj * xk;
                }
            }
        }
        for (std::size_t j = 0; j < p; ++j) {
            grad[j] += lambda * beta[j];
            hess[j * (p + 1) + j] += lambda;
        }
        for (std::size_t j = 0; j <= p; ++j) {
            hess[j * (p + 1) + j] += 1e-10;
            for (std::size_t k = 0; k < j; ++k) hess[j * (p + 1) + k] = hess[k * (p + 1) + j];
        }

        // solve hess * step = -grad by Cholesky
        const std::size_t m = p + 1;
        std::vector<double> L(m * m, 0.0);
        for (std::size_t j = 0; j < m; ++j) {
            for (std::size_t k = 0; k <= j; ++k) {
                double s = hess[j * m + k];
                for (std::size_t q = 0; q < k; ++q) s -= L[j * m + q] * L[k * m + q];
                if (j == k) {
                    L[j * m + j] = std::sqrt(std::max(s, 1e-12));
                } else {
                    L[j * m + k] = s / L[k * m + k];
                }
            }
        }
        std::vector<double> step(m);
        for (std::size_t j = 0; j < m; ++j) {
            double s = -grad[j];
            for (std::size_t q = 0; q < j; ++q) s -= L[j * m + q] * step[q];
            step[j] = s / L[j * m + j];
        }
        for (std::size_t j = m; j-- > 0;) {
            double s = step[j];
            for (std::size_t q = j + 1; q < m; ++q) s -= L[q * m + j] * step[q];
            step[j] = s / L[j * m + j];
        }

        double t = 1.0;
        std::vector<double> trial(m);
        double next = 0.0;
        int backtracks = 0;
        for (;;) {
            for (std::size_t j = 0; j < m; ++j) trial[j] = beta[j] + t * step[j];
            next = objective(trial);
            if (next <= cur || backtracks >= 40) break;
            t *= 0.5;
            ++backtracks;
        }
        double max_step = 0.0;
        for (std::size_t j = 0; j < m; ++j) max_step = std::max(max_step, std::abs(t * step[j]));
        beta = trial;
        cur = next;
        if (max_step < 1e-10) break;
    }

    LinearModel model;
    model.coef.assign(beta.begin(), beta.begin() + p);
    model.intercept = beta[p];
    return model;
}

StabilityReport stability_select(const Rows& X, const std::vector<int>& y,
                                 const std::vector<double>& weights, const StabilityConfig& cfg) {
    const std::size_t n = X.size();
    const std::size_t p = n ? X[0].size() : 0;
    if (cfg.resamples < 1) throw ConfigError("stability selection: resamples must be >= 1");
    const std::size_t take =
        std::min<std::size_t>(n, static_cast<std::size_t>(std::ceil(cfg.fraction * n)));

    std::vector<std::vector<std::uint8_t>> selected(cfg.resamples);
    parallel_for(static_cast<std::size_t>(cfg.resamples), [&](std::size_t r) {
        Rng rng(derive_seed(cfg.seed, {0x57ab, r}));
        auto rows = rng.sample_without_replacement(n, take);
        std::sort(rows.begin(), rows.end());

        L1LogisticConfig sub;
        sub.C = cfg.C1;
        sub.balanced = cfg.balanced;
        sub.penalty_scale.resize(p);
        for (std::size_t j = 0; j < p; ++j) {
            sub.penalty_scale[j] = rng.uniform(cfg.weaken_lo, cfg.weaken_hi);
        }

        Rows Xs;
        std::vector<int> ys;
        std::vector<double> ws;
        Xs.reserve(rows.size());
        for (std::size_t i : rows) {
            Xs.push_back(X[i]);
            ys.push_back(y[i]);
            if (!weights.empty()) ws.push_back(weights[i]);
        }
        const LinearModel m = fit_l1_logistic(Xs, ys, ws, sub);
        selected[r].resize(p, 0);
        for (std::size_t j = 0; j < p; ++j) selected[r][j] = m.coef[j] != 0.0;
    });

    StabilityReport report;
    report.threshold = cfg.threshold;
    report.frequency.assign(p, 0.0);
    for (const auto& sel : selected) {
        for (std::size_t j = 0; j < p; ++j) report.frequency[j] += sel[j];
    }
    for (std::size_t j = 0; j < p; ++j) {
        report.frequency[j] /= static_cast<double>(cfg.resamples);
        if (report.frequency[j] >= cfg.threshold) report.selected.push_back(j);
    }
    if (report.selected.empty()) {
        throw ConfigError("stability selection: no feature reached the threshold; lower it");
    }
    return report;
}

}  // namespace aki
