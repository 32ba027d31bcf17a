#pragma once

// Dense numerical kernels shared by the pipeline: thin SVD, symmetric
// eigendecomposition, Euclidean projection onto the probability simplex and
// the chi-square upper tail.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "lidaf/error.hpp"
#include "lidaf/matrix.hpp"

namespace lidaf {

struct SvdFactors {
    Matrix u;                            // rows x r, orthonormal columns
    std::vector<double> singular_values; // r, descending, >= 0
    Matrix vt;                           // r x cols, orthonormal rows
};

namespace detail {

inline std::string dims(const Matrix& a) {
    return std::to_string(a.rows()) + "x" + std::to_string(a.cols());
}

// Appends orthonormal columns to `basis` (stored as column vectors of length m)
// until it holds `target` vectors. Used when singular vectors for zero singular
// values are undefined.
inline void complete_orthonormal(std::vector<std::vector<double>>& basis, std::size_t m,
                                 std::size_t target) {
    for (std::size_t e = 0; e < m && basis.size() < target; ++e) {
        std::vector<double> v(m, 0.0);
        v[e] = 1.0;
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& b : basis) {
                const double p = dot(v, b);
                for (std::size_t k = 0; k < m; ++k) v[k] -= p * b[k];
            }
        }
        const double norm = std::sqrt(dot(v, v));
        if (norm > 1e-6) {
            for (double& x : v) x /= norm;
            basis.push_back(std::move(v));
        }
    }
}

// One-sided Jacobi (Hestenes) on a tall matrix: rows >= cols.
inline SvdFactors svd_tall(const Matrix& a) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    constexpr int kMaxSweeps = 100;
    constexpr double kTol = 1e-12;

    // Column-major working copies.
    std::vector<std::vector<double>> u(n, std::vector<double>(m));
    std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < m; ++i) u[j][i] = a(i, j);
        v[j][j] = 1.0;
    }
    const double fro2 = std::max(a.frobenius_norm() * a.frobenius_norm(),
                                 std::numeric_limits<double>::min());
    const double negligible = 1e-30 * fro2;

    bool converged = false;
    for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
        converged = true;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const double alpha = dot(u[i], u[i]);
                const double beta = dot(u[j], u[j]);
                if (alpha <= negligible || beta <= negligible) continue;
                const double gamma = dot(u[i], u[j]);
                if (std::abs(gamma) <= kTol * std::sqrt(alpha) * std::sqrt(beta)) continue;
                converged = false;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t k = 0; k < m; ++k) {
                    const double ui = u[i][k];
                    const double uj = u[j][k];
                    u[i][k] = c * ui - s * uj;
                    u[j][k] = s * ui + c * uj;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vi = v[i][k];
                    const double vj = v[j][k];
                    v[i][k] = c * vi - s * vj;
                    v[j][k] = s * vi + c * vj;
                }
            }
        }
    }
    if (!converged) {
        throw NumericalError("svd_thin: one-sided Jacobi did not converge for " + dims(a) +
                             " matrix within 100 sweeps");
    }

    std::vector<double> sigma(n);
    for (std::size_t j = 0; j < n; ++j) sigma[j] = std::sqrt(dot(u[j], u[j]));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

    const double smax = n > 0 ? sigma[order[0]] : 0.0;
    std::vector<std::vector<double>> ucols;
    ucols.reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t j = order[r];
        if (smax > 0.0 && sigma[j] > 1e-13 * smax) {
            std::vector<double> col = u[j];
            for (double& x : col) x /= sigma[j];
            ucols.push_back(std::move(col));
        }
    }
    // Sorted descending, so every zero-ish value sits at the tail.
    complete_orthonormal(ucols, m, n);

    SvdFactors out{Matrix(m, n), std::vector<double>(n), Matrix(n, n)};
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t j = order[r];
        out.singular_values[r] = sigma[j];
        for (std::size_t i = 0; i < m; ++i) out.u(i, r) = ucols[r][i];
        for (std::size_t k = 0; k < n; ++k) out.vt(r, k) = v[j][k];
    }
    return out;
}

}  // namespace detail

// Thin SVD a = u * diag(s) * vt with r = min(rows, cols).
inline SvdFactors svd_thin(const Matrix& a) {
    if (a.rows() == 0 || a.cols() == 0) throw ArgumentError("svd_thin: empty matrix");
    if (!a.all_finite()) throw ArgumentError("svd_thin: non-finite entry in " + detail::dims(a));
    if (a.rows() >= a.cols()) return detail::svd_tall(a);
    SvdFactors t = detail::svd_tall(a.transpose());
    return {t.vt.transpose(), std::move(t.singular_values), t.u.transpose()};
}

enum class EigenOrder { smallest, largest };

struct EigenPairs {
    std::vector<double> values;  // ordered per EigenOrder
    Matrix vectors;              // n x count, column i pairs with values[i]
};

namespace detail {

// Householder reduction to tridiagonal form followed by implicit QL
// (EISPACK tred2/tql2). `v` enters as the symmetric matrix and leaves holding
// the eigenvectors as columns; `d` receives the (unsorted) eigenvalues.
inline void tridiagonal_ql(Matrix& v, std::vector<double>& d) {
    const std::size_t n = v.rows();
    std::vector<double> e(n, 0.0);
    d.assign(n, 0.0);

    for (std::size_t j = 0; j < n; ++j) d[j] = v(n - 1, j);

    for (std::size_t i = n - 1; i > 0; --i) {
        double scale = 0.0;
        double h = 0.0;
        for (std::size_t k = 0; k < i; ++k) scale += std::abs(d[k]);
        if (scale == 0.0) {
            e[i] = d[i - 1];
            for (std::size_t j = 0; j < i; ++j) {
                d[j] = v(i - 1, j);
                v(i, j) = 0.0;
                v(j, i) = 0.0;
            }
        } else {
            for (std::size_t k = 0; k < i; ++k) {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            double f = d[i - 1];
            double g = std::sqrt(h);
            if (f > 0) g = -g;
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for (std::size_t j = 0; j < i; ++j) e[j] = 0.0;
            for (std::size_t j = 0; j < i; ++j) {
                f = d[j];
                v(j, i) = f;
                g = e[j] + v(j, j) * f;
                for (std::size_t k = j + 1; k < i; ++k) {
                    g += v(k, j) * d[k];
                    e[k] += v(k, j) * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for (std::size_t j = 0; j < i; ++j) {
                e[j] /= h;
                f += e[j] * d[j];
            }
            const double hh = f / (h + h);
            for (std::size_t j = 0; j < i; ++j) e[j] -= hh * d[j];
            for (std::size_t j = 0; j < i; ++j) {
                f = d[j];
                g = e[j];
                for (std::size_t k = j; k < i; ++k) v(k, j) -= (f * e[k] + g * d[k]);
                d[j] = v(i - 1, j);
                v(i, j) = 0.0;
            }
        }
        d[i] = h;
    }

    for (std::size_t i = 0; i + 1 < n; ++i) {
        v(n - 1, i) = v(i, i);
        v(i, i) = 1.0;
        const double h = d[i + 1];
        if (h != 0.0) {
            for (std::size_t k = 0; k <= i; ++k) d[k] = v(k, i + 1) / h;
            for (std::size_t j = 0; j <= i; ++j) {
                double g = 0.0;
                for (std::size_t k = 0; k <= i; ++k) g += v(k, i + 1) * v(k, j);
                for (std::size_t k = 0; k <= i; ++k) v(k, j) -= g * d[k];
            }
        }
        for (std::size_t k = 0; k <= i; ++k) v(k, i + 1) = 0.0;
    }
    for (std::size_t j = 0; j < n; ++j) {
        d[j] = v(n - 1, j);
        v(n - 1, j) = 0.0;
    }
    v(n - 1, n - 1) = 1.0;
    e[0] = 0.0;

    // Implicit QL on the tridiagonal (d, e).
    for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
    e[n - 1] = 0.0;

    double f = 0.0;
    double tst1 = 0.0;
    const double eps = std::numeric_limits<double>::epsilon();
    for (std::size_t l = 0; l < n; ++l) {
        tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
        std::size_t m = l;
        while (m < n) {
            if (std::abs(e[m]) <= eps * tst1) break;
            ++m;
        }
        if (m > l) {
            int iter = 0;
            do {
                if (++iter > 60) {
                    throw NumericalError("sym_eig: QL iteration did not converge for " +
                                         std::to_string(n) + "x" + std::to_string(n) + " matrix");
                }
                double g = d[l];
                double p = (d[l + 1] - g) / (2.0 * e[l]);
                double r = std::hypot(p, 1.0);
                if (p < 0) r = -r;
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                const double dl1 = d[l + 1];
                double h = g - d[l];
                for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
                f += h;

                p = d[m];
                double c = 1.0, c2 = 1.0, c3 = 1.0;
                const double el1 = e[l + 1];
                double s = 0.0, s2 = 0.0;
                for (std::size_t ii = m; ii-- > l;) {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[ii];
                    h = c * p;
                    r = std::hypot(p, e[ii]);
                    e[ii + 1] = s * r;
                    s = e[ii] / r;
                    c = p / r;
                    p = c * d[ii] - s * g;
                    d[ii + 1] = h + s * (c * g + s * d[ii]);
                    for (std::size_t k = 0; k < n; ++k) {
                        h = v(k, ii + 1);
                        v(k, ii + 1) = s * v(k, ii) + c * h;
                        v(k, ii) = c * v(k, ii) - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
            } while (std::abs(e[l]) > eps * tst1);
        }
        d[l] += f;
        e[l] = 0.0;
    }
}

}  // namespace detail

// `count` eigenpairs of the symmetric part (a + a^T) / 2, ordered by `which`.
inline EigenPairs sym_eig(const Matrix& a, std::size_t count, EigenOrder which) {
    const std::size_t n = a.rows();
    if (n == 0 || a.cols() != n) throw ArgumentError("sym_eig: matrix must be square and non-empty");
    if (count < 1 || count > n) {
        throw ArgumentError("sym_eig: requested " + std::to_string(count) +
                            " eigenpairs of a " + std::to_string(n) + "x" + std::to_string(n) +
                            " matrix");
    }
    if (!a.all_finite()) throw ArgumentError("sym_eig: non-finite entry");

    Matrix v(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) v(i, j) = 0.5 * (a(i, j) + a(j, i));

    std::vector<double> d;
    if (n == 1) {
        d = {v(0, 0)};
        v(0, 0) = 1.0;
    } else {
        detail::tridiagonal_ql(v, d);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    if (which == EigenOrder::smallest) {
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t x, std::size_t y) { return d[x] < d[y]; });
    } else {
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t x, std::size_t y) { return d[x] > d[y]; });
    }

    EigenPairs out{std::vector<double>(count), Matrix(n, count)};
    for (std::size_t c = 0; c < count; ++c) {
        const std::size_t j = order[c];
        out.values[c] = d[j];
        // Deterministic sign: largest-magnitude component positive.
        std::size_t pivot = 0;
        for (std::size_t i = 1; i < n; ++i)
            if (std::abs(v(i, j)) > std::abs(v(pivot, j)) + 1e-12) pivot = i;
        const double sign = v(pivot, j) < 0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, c) = sign * v(i, j);
    }
    return out;
}

// Euclidean projection of v onto {x : x >= 0, sum(x) = 1} (sort-and-threshold).
inline std::vector<double> project_row_simplex(std::span<const double> v) {
    const std::size_t n = v.size();
    if (n == 0) throw ArgumentError("project_row_simplex: empty vector");
    std::vector<double> u(v.begin(), v.end());
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumulative = 0.0;
    double theta = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        cumulative += u[j];
        const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
        if (u[j] - t > 0.0) theta = t;
    }
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = std::max(v[i] - theta, 0.0);
    return x;
}

namespace detail {

// Regularized lower incomplete gamma P(a, x) by its power series (x < a + 1).
inline double gamma_p_series(double a, double x) {
    double ap = a;
    double term = 1.0 / a;
    double sum = term;
    for (int n = 0; n < 10000; ++n) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma Q(a, x) by Lentz's continued fraction (x >= a + 1).
inline double gamma_q_continued_fraction(double a, double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 10000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

// Upper-tail probability of the chi-square distribution with `df` degrees of
// freedom, Q(df/2, x/2).
inline double chi_square_sf(double x, std::size_t df) {
    if (df == 0) throw ArgumentError("chi_square_sf: df must be >= 1");
    if (!(x >= 0.0)) throw ArgumentError("chi_square_sf: x must be >= 0");
    if (x == 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    const double a = 0.5 * static_cast<double>(df);
    const double hx = 0.5 * x;
    double q = hx < a + 1.0 ? 1.0 - detail::gamma_p_series(a, hx)
                            : detail::gamma_q_continued_fraction(a, hx);
    return std::clamp(q, 0.0, 1.0);
}

}  // namespace lidaf
