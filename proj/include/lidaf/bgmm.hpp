#pragma once

// Variational Bayesian Gaussian mixture with diagonal covariances, and the
// relevance-ranked feature selection built on it.
//
// Model, per component k and dimension d:
//   pi ~ Dirichlet(alpha0, ..., alpha0)
//   tau_kd ~ Gamma(a0, b0_d),  mu_kd | tau_kd ~ Normal(m0_d, 1 / (beta0 tau_kd))
//   x_nd | z_n = k ~ Normal(mu_kd, 1 / tau_kd)
// The mean-field posterior keeps the same families, so every update is closed
// form and the evidence lower bound is exact.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <vector>

#include "lidaf/error.hpp"
#include "lidaf/omics.hpp"
#include "lidaf/rng.hpp"

namespace lidaf {

struct GmmModel {
    std::vector<double> weights;  // posterior mean mixing weights, sums to 1
    Matrix means;                 // components x features
    Matrix diag_variances;        // components x features, >= variance floor
    std::size_t effective_components = 0;
    Matrix responsibilities;      // samples x components
    std::vector<double> elbo_trace;
    std::size_t iterations = 0;
    bool converged = false;
};

struct BgmmOptions {
    std::size_t max_components = 10;
    std::size_t max_iter = 500;
    double tol = 1e-6;               // absolute ELBO change
    double weight_threshold = 1e-3;  // below this a component is not counted
    double variance_floor = 1e-6;
    std::size_t restarts = 3;
    std::uint64_t seed = 0;
};

namespace detail {

inline double digamma(double x) {
    double result = 0.0;
    while (x < 12.0) {
        result -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    result += std::log(x) - 0.5 * inv -
              inv2 * (1.0 / 12 - inv2 * (1.0 / 120 - inv2 * (1.0 / 252 - inv2 * (1.0 / 240 - inv2 / 132))));
    return result;
}

// k-means++ D^2 seeding followed by hard assignment; gives the initial
// responsibilities.
inline Matrix seed_responsibilities(const Matrix& x, std::size_t m, Rng& rng) {
    const std::size_t n = x.rows();
    std::vector<std::size_t> centers{rng.index(n)};
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    while (centers.size() < m) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], squared_distance(x.row(i), x.row(centers.back())));
            total += d2[i];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            double target = rng.uniform() * total;
            for (pick = 0; pick + 1 < n; ++pick) {
                target -= d2[pick];
                if (target < 0.0) break;
            }
        } else {
            pick = rng.index(n);
        }
        centers.push_back(pick);
    }
    Matrix r(n, m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < m; ++c) {
            const double d = squared_distance(x.row(i), x.row(centers[c]));
            if (d < bd) {
                bd = d;
                best = c;
            }
        }
        r(i, best) = 1.0;
    }
    return r;
}

// One variational run starting from the M-step on `resp`.
inline GmmModel fit_bgmm_from(const Matrix& x, const BgmmOptions& opt, Matrix resp) {
    const std::size_t n = x.rows();
    const std::size_t p = x.cols();
    const std::size_t m = opt.max_components;

    // Priors.
    const double alpha0 = 1.0 / static_cast<double>(m);
    const double beta0 = 1.0;
    const double a0 = 1.0;
    std::vector<double> m0(p, 0.0), b0(p, 0.0);
    for (std::size_t d = 0; d < p; ++d) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += x(i, d);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) var += (x(i, d) - mean) * (x(i, d) - mean);
        var /= static_cast<double>(n);
        m0[d] = mean;
        b0[d] = a0 * std::max(var, opt.variance_floor);
    }


    // Posterior parameters.
    std::vector<double> alpha(m), beta(m), a(m);
    Matrix mk(m, p), bk(m, p);
    Matrix log_rho(n, m);

    GmmModel model;
    const double log_2pi = std::log(2.0 * std::numbers::pi);
    double prev_elbo = -std::numeric_limits<double>::infinity();

    for (std::size_t it = 0; it < opt.max_iter; ++it) {
        // M-step: optimal q(pi), q(mu, tau) given responsibilities.
        for (std::size_t k = 0; k < m; ++k) {
            double nk = 0.0;
            for (std::size_t i = 0; i < n; ++i) nk += resp(i, k);
            alpha[k] = alpha0 + nk;
            beta[k] = beta0 + nk;
            a[k] = a0 + 0.5 * nk;
            for (std::size_t d = 0; d < p; ++d) {
                double sx = 0.0;
                for (std::size_t i = 0; i < n; ++i) sx += resp(i, k) * x(i, d);
                const double xbar = nk > 0.0 ? sx / nk : 0.0;
                double ss = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double dv = x(i, d) - xbar;
                    ss += resp(i, k) * dv * dv;
                }
                mk(k, d) = (beta0 * m0[d] + nk * xbar) / beta[k];
                const double shift = xbar - m0[d];
                bk(k, d) = b0[d] + 0.5 * (ss + beta0 * nk * shift * shift / beta[k]);
            }
        }

        // E-step.
        const double alpha_sum = std::accumulate(alpha.begin(), alpha.end(), 0.0);
        const double psi_sum = digamma(alpha_sum);
        std::vector<double> elog_pi(m), psi_a(m);
        for (std::size_t k = 0; k < m; ++k) {
            elog_pi[k] = digamma(alpha[k]) - psi_sum;
            psi_a[k] = digamma(a[k]);
        }
        double data_term = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < m; ++k) {
                double s = elog_pi[k];
                for (std::size_t d = 0; d < p; ++d) {
                    const double dv = x(i, d) - mk(k, d);
                    const double elog_tau = psi_a[k] - std::log(bk(k, d));
                    const double equad = 1.0 / beta[k] + a[k] / bk(k, d) * dv * dv;
                    s += 0.5 * (elog_tau - log_2pi - equad);
                }
                log_rho(i, k) = s;
                mx = std::max(mx, s);
            }
            double z = 0.0;
            for (std::size_t k = 0; k < m; ++k) z += std::exp(log_rho(i, k) - mx);
            const double lse = mx + std::log(z);
            data_term += lse;
            for (std::size_t k = 0; k < m; ++k) resp(i, k) = std::exp(log_rho(i, k) - lse);
        }

        // KL(q(pi) || p(pi)).
        double kl = std::lgamma(alpha_sum) - std::lgamma(m * alpha0) + m * std::lgamma(alpha0);
        for (std::size_t k = 0; k < m; ++k)
            kl += -std::lgamma(alpha[k]) + (alpha[k] - alpha0) * elog_pi[k];
        // KL(q(mu, tau) || p(mu, tau)), summed over components and dimensions.
        for (std::size_t k = 0; k < m; ++k) {
            for (std::size_t d = 0; d < p; ++d) {
                const double b = bk(k, d);
                const double kl_gamma = (a[k] - a0) * psi_a[k] - std::lgamma(a[k]) + std::lgamma(a0) +
                                        a0 * (std::log(b) - std::log(b0[d])) + a[k] * (b0[d] - b) / b;
                const double dm = mk(k, d) - m0[d];
                const double kl_normal =
                    0.5 * (std::log(beta[k] / beta0) + beta0 / beta[k] + beta0 * a[k] / b * dm * dm - 1.0);
                kl += kl_gamma + kl_normal;
            }
        }
        const double elbo = data_term - kl;
        if (!std::isfinite(elbo))
            throw NumericalError("fit_bayesian_gmm: non-finite evidence bound at iteration " +
                                 std::to_string(it));
        model.elbo_trace.push_back(elbo);
        model.iterations = it + 1;
        if (std::abs(elbo - prev_elbo) < opt.tol) {
            model.converged = true;
            break;
        }
        prev_elbo = elbo;
    }

    const double alpha_sum = std::accumulate(alpha.begin(), alpha.end(), 0.0);
    model.weights.resize(m);
    model.means = mk;
    model.diag_variances = Matrix(m, p);
    for (std::size_t k = 0; k < m; ++k) {
        model.weights[k] = alpha[k] / alpha_sum;
        if (model.weights[k] >= opt.weight_threshold) ++model.effective_components;
        for (std::size_t d = 0; d < p; ++d)
            model.diag_variances(k, d) = std::max(bk(k, d) / a[k], opt.variance_floor);
    }
    model.responsibilities = std::move(resp);
    return model;
}

// Responsibilities with component k removed and its mass handed to the
// others in proportion to their current share.
inline Matrix drop_component(const GmmModel& model, std::size_t k) {
    Matrix r = model.responsibilities;
    const std::size_t m = r.cols();
    for (std::size_t i = 0; i < r.rows(); ++i) {
        r(i, k) = 0.0;
        double s = 0.0;
        for (std::size_t c = 0; c < m; ++c) s += r(i, c);
        if (s > 1e-300) {
            for (std::size_t c = 0; c < m; ++c) r(i, c) /= s;
        } else {
            std::size_t live = 0;
            for (std::size_t c = 0; c < m; ++c) live += (c != k && model.weights[c] >= 1e-3);
            for (std::size_t c = 0; c < m; ++c)
                r(i, c) = (c != k && model.weights[c] >= 1e-3) ? 1.0 / static_cast<double>(live) : 0.0;
        }
    }
    return r;
}

// Variational updates shrink a redundant component only slowly and can stop
// in a split optimum. Each live component is tentatively deleted and the run
// continued; the deletion is kept when the final bound improves.
inline GmmModel refine_by_deletion(const Matrix& x, const BgmmOptions& opt, GmmModel model) {
    bool improved = true;
    while (improved && model.effective_components > 1) {
        improved = false;
        std::vector<std::size_t> live;
        for (std::size_t k = 0; k < model.weights.size(); ++k)
            if (model.weights[k] >= opt.weight_threshold) live.push_back(k);
        std::stable_sort(live.begin(), live.end(),
                         [&](std::size_t a, std::size_t b) { return model.weights[a] < model.weights[b]; });
        for (auto k : live) {
            GmmModel trial = fit_bgmm_from(x, opt, drop_component(model, k));
            if (trial.elbo_trace.back() > model.elbo_trace.back() + 1e-9) {
                model = std::move(trial);
                improved = true;
                break;
            }
        }
    }
    return model;
}

}  // namespace detail

// Best final evidence bound over `restarts` k-means++ starts, each refined by
// component deletion.
inline GmmModel fit_bayesian_gmm(const Matrix& x, const BgmmOptions& opt = {}) {
    const std::size_t n = x.rows();
    const std::size_t p = x.cols();
    const std::size_t m = opt.max_components;
    if (m < 1) throw ArgumentError("fit_bayesian_gmm: max_components must be >= 1");
    if (n < m)
        throw ArgumentError("fit_bayesian_gmm: " + std::to_string(n) + " samples for " +
                            std::to_string(m) + " components");
    if (p == 0) throw ArgumentError("fit_bayesian_gmm: no features");
    if (!x.all_finite()) throw ArgumentError("fit_bayesian_gmm: non-finite input");
    if (opt.restarts < 1) throw ArgumentError("fit_bayesian_gmm: restarts must be >= 1");
    Rng rng(opt.seed);
    GmmModel best;
    for (std::size_t r = 0; r < opt.restarts; ++r) {
        GmmModel model = detail::fit_bgmm_from(x, opt, detail::seed_responsibilities(x, opt.max_components, rng));
        model = detail::refine_by_deletion(x, opt, std::move(model));
        if (r == 0 || model.elbo_trace.back() > best.elbo_trace.back()) best = std::move(model);
    }
    return best;
}

inline GmmModel fit_bayesian_gmm(const OmicsMatrix& x, const BgmmOptions& opt = {}) {
    if (x.has_missing()) throw ArgumentError("fit_bayesian_gmm: input has missing cells");
    return fit_bayesian_gmm(x.values, opt);
}

struct FeatureSelection {
    OmicsMatrix matrix;
    std::vector<std::size_t> selected;  // ascending indices into the input features
    std::vector<double> relevance;      // one per input feature
    GmmModel model;
};

// Relevance of feature f: sum_k w_k (mu_kf - mean_f)^2 over effective
// components (weights renormalized), i.e. the between-component variance
// the mixture explains, plus 1e-6 x marginal variance as a tie-break so that
// a single-component fit degrades to variance ranking.
inline std::vector<double> bgmm_relevance(const Matrix& x, const GmmModel& model,
                                          double weight_threshold = 1e-3) {
    const std::size_t p = x.cols();
    const std::size_t n = x.rows();
    std::vector<std::size_t> live;
    double wsum = 0.0;
    for (std::size_t k = 0; k < model.weights.size(); ++k) {
        if (model.weights[k] >= weight_threshold) {
            live.push_back(k);
            wsum += model.weights[k];
        }
    }
    std::vector<double> score(p, 0.0);
    for (std::size_t f = 0; f < p; ++f) {
        double mbar = 0.0;
        for (auto k : live) mbar += model.weights[k] / wsum * model.means(k, f);
        double between = 0.0;
        for (auto k : live) {
            const double dv = model.means(k, f) - mbar;
            between += model.weights[k] / wsum * dv * dv;
        }
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += x(i, f);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) var += (x(i, f) - mean) * (x(i, f) - mean);
        var /= static_cast<double>(n > 1 ? n - 1 : 1);
        score[f] = between + 1e-6 * var;
    }
    return score;
}

// Keeps the smallest relevance-ranked prefix whose share of total relevance
// reaches `cumulative_target`; the kept features stay in input order.
inline FeatureSelection select_features_bgmm(const OmicsMatrix& x, double cumulative_target = 0.95,
                                             BgmmOptions opt = {}) {
    if (!(cumulative_target > 0.0 && cumulative_target <= 1.0))
        throw ArgumentError("select_features_bgmm: cumulative_target must lie in (0, 1]");
    if (x.has_missing()) throw ArgumentError("select_features_bgmm: input has missing cells");
    opt.max_components = std::min(opt.max_components, x.samples());

    FeatureSelection out;
    out.model = fit_bayesian_gmm(x.values, opt);
    out.relevance = bgmm_relevance(x.values, out.model, opt.weight_threshold);

    const std::size_t p = x.features();
    std::vector<std::size_t> order(p);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return out.relevance[a] > out.relevance[b];
    });
    const double total = std::accumulate(out.relevance.begin(), out.relevance.end(), 0.0);

    std::size_t keep = p;
    if (cumulative_target < 1.0 && total > 0.0) {
        double cum = 0.0;
        for (std::size_t r = 0; r < p; ++r) {
            cum += out.relevance[order[r]];
            if (cum >= cumulative_target * total) {
                keep = r + 1;
                break;
            }
        }
    }
    out.selected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep));
    std::sort(out.selected.begin(), out.selected.end());
    out.matrix = x.select_features(out.selected);
    return out;
}

}  // namespace lidaf
