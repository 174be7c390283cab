#include "seqdi/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "seqdi/errors.hpp"

namespace seqdi {

Matrix Matrix::identity(std::size_t d) {
    Matrix m(d, d);
    for (std::size_t i = 0; i < d; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Matrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != c) throw std::invalid_argument("ragged matrix literal");
        std::copy(row.begin(), row.end(), m.row(i).begin());
        ++i;
    }
    return m;
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
    Matrix out(indices.size(), cols_);
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const auto src = row(indices[k]);
        std::copy(src.begin(), src.end(), out.row(k).begin());
    }
    return out;
}

Vector Matrix::column(std::size_t j) const {
    Vector out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
    return out;
}

Matrix Matrix::transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matrix product: shape mismatch");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("matrix sum: shape mismatch");
    Matrix c = a;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) += b(i, j);
    return c;
}

Vector operator*(const Matrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) throw std::invalid_argument("matrix-vector product: shape mismatch");
    Vector out(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) out[i] = dot(a.row(i), x);
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

Vector gather(std::span<const double> v, std::span<const std::size_t> indices) {
    Vector out(indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) out[k] = v[indices[k]];
    return out;
}

Matrix weighted_cross_product(const Matrix& x, std::span<const double> w) {
    const std::size_t d = x.cols();
    Matrix a(d, d);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto xi = x.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            const double wx = w[i] * xi[j];
            for (std::size_t k = j; k < d; ++k) a(j, k) += wx * xi[k];
        }
    }
    for (std::size_t j = 0; j < d; ++j)
        for (std::size_t k = 0; k < j; ++k) a(j, k) = a(k, j);
    return a;
}

Vector weighted_cross_vector(const Matrix& x, std::span<const double> w,
                             std::span<const double> y) {
    Vector b(x.cols(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto xi = x.row(i);
        const double wy = w[i] * y[i];
        for (std::size_t j = 0; j < x.cols(); ++j) b[j] += wy * xi[j];
    }
    return b;
}

Vector column_totals(const Matrix& x) {
    Vector t(x.cols(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto xi = x.row(i);
        for (std::size_t j = 0; j < x.cols(); ++j) t[j] += xi[j];
    }
    return t;
}

Cholesky::Cholesky(const Matrix& a) : lower_(a.rows(), a.cols()) {
    const std::size_t d = a.rows();
    if (d == 0 || a.cols() != d) throw std::invalid_argument("Cholesky: matrix must be square, d >= 1");

    double scale = 0.0;
    double trace = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        trace += a(i, i);
        for (std::size_t j = 0; j < d; ++j) scale = std::max(scale, std::abs(a(i, j)));
    }
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (std::abs(a(i, j) - a(j, i)) > 1e-10 * std::max(scale, 1.0))
                throw NotPositiveDefinite("matrix is not symmetric");

    const double pivot_tol = 1e-12 * trace / static_cast<double>(d);
    for (std::size_t j = 0; j < d; ++j) {
        double s = a(j, j);
        for (std::size_t k = 0; k < j; ++k) s -= lower_(j, k) * lower_(j, k);
        if (!(s > pivot_tol) || !std::isfinite(s))
            throw NotPositiveDefinite("pivot " + std::to_string(j) +
                                      " below tolerance; covariates may be collinear");
        const double ljj = std::sqrt(s);
        lower_(j, j) = ljj;
        for (std::size_t i = j + 1; i < d; ++i) {
            double t = a(i, j);
            for (std::size_t k = 0; k < j; ++k) t -= lower_(i, k) * lower_(j, k);
            lower_(i, j) = t / ljj;
        }
    }
}

Vector Cholesky::solve(std::span<const double> b) const {
    const std::size_t d = dim();
    if (b.size() != d) throw std::invalid_argument("Cholesky::solve: size mismatch");
    Vector z(b.begin(), b.end());
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t k = 0; k < i; ++k) z[i] -= lower_(i, k) * z[k];
        z[i] /= lower_(i, i);
    }
    for (std::size_t ii = d; ii-- > 0;) {
        for (std::size_t k = ii + 1; k < d; ++k) z[ii] -= lower_(k, ii) * z[k];
        z[ii] /= lower_(ii, ii);
    }
    return z;
}

Matrix Cholesky::inverse() const {
    const std::size_t d = dim();
    Matrix inv(d, d);
    Vector e(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        std::fill(e.begin(), e.end(), 0.0);
        e[j] = 1.0;
        const Vector col = solve(e);
        for (std::size_t i = 0; i < d; ++i) inv(i, j) = col[i];
    }
    // Symmetrise away round-off.
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < i; ++j) {
            const double m = 0.5 * (inv(i, j) + inv(j, i));
            inv(i, j) = m;
            inv(j, i) = m;
        }
    return inv;
}

Vector solve_spd(const Matrix& a, std::span<const double> b) { return Cholesky(a).solve(b); }

Matrix inverse_spd(const Matrix& a) { return Cholesky(a).inverse(); }

Vector weighted_ls(const Matrix& x, std::span<const double> y, std::span<const double> w) {
    if (y.size() != x.rows() || w.size() != x.rows())
        throw std::invalid_argument("weighted_ls: size mismatch");
    return solve_spd(weighted_cross_product(x, w), weighted_cross_vector(x, w, y));
}

double logistic(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

namespace {

// log(1 + exp(t)) without overflow.
double log1pexp(double t) {
    return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

double logistic_loglik(const Matrix& x, std::span<const unsigned char> delta,
                       std::span<const double> alpha) {
    double ll = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double eta = dot(x.row(i), alpha);
        ll += (delta[i] ? eta : 0.0) - log1pexp(eta);
    }
    return ll;
}

}  // namespace

Vector logistic_fit(const Matrix& x, std::span<const unsigned char> delta,
                    const LogisticOptions& options) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    if (delta.size() != n) throw std::invalid_argument("logistic_fit: size mismatch");
    if (n < d) throw std::invalid_argument("logistic_fit: fewer rows than coefficients");
    const auto ones = static_cast<std::size_t>(std::count_if(delta.begin(), delta.end(),
                                                             [](unsigned char v) { return v != 0; }));
    if (ones == 0 || ones == n) throw Separation("logistic_fit: only one response class present");

    Vector alpha(d, 0.0);
    double ll = logistic_loglik(x, delta, alpha);
    Vector p(n), w(n), resid(n);

    for (int iter = 0; iter < options.max_iterations; ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = logistic(dot(x.row(i), alpha));
            w[i] = p[i] * (1.0 - p[i]);
            resid[i] = (delta[i] ? 1.0 : 0.0) - p[i];
        }
        const Matrix info = weighted_cross_product(x, w);
        Vector score(d, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto xi = x.row(i);
            for (std::size_t j = 0; j < d; ++j) score[j] += resid[i] * xi[j];
        }
        Vector step;
        try {
            step = solve_spd(info, score);
        } catch (const NotPositiveDefinite&) {
            throw Separation("logistic_fit: information matrix singular (quasi-complete separation)");
        }

        Vector candidate(d);
        double factor = 1.0;
        double ll_new = ll;
        for (int halving = 0; halving < 30; ++halving) {
            for (std::size_t j = 0; j < d; ++j) candidate[j] = alpha[j] + factor * step[j];
            ll_new = logistic_loglik(x, delta, candidate);
            if (ll_new >= ll - 1e-12 * std::abs(ll)) break;
            factor *= 0.5;
        }

        double max_change = 0.0;
        for (std::size_t j = 0; j < d; ++j)
            max_change = std::max(max_change, std::abs(candidate[j] - alpha[j]));
        alpha = candidate;
        ll = ll_new;

        for (double a : alpha)
            if (!std::isfinite(a) || std::abs(a) > options.separation_bound)
                throw Separation("logistic_fit: coefficient exceeds separation bound");
        if (max_change <= options.tolerance) return alpha;
    }
    throw NoConvergence("logistic_fit: no convergence after " +
                        std::to_string(options.max_iterations) + " iterations");
}

namespace {

// Series for the lower regularised gamma P(a, x); good for x < a + 1.
double gamma_p_series(double a, double x) {
    double sum = 1.0 / a;
    double term = sum;
    double ap = a;
    for (int n = 0; n < 10000; ++n) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-17) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a, x) (modified Lentz); good for x >= a + 1.
double gamma_q_fraction(double a, double x) {
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

}  // namespace

double gamma_q(double a, double x) {
    if (!(a > 0.0)) throw std::invalid_argument("gamma_q: shape must be positive");
    if (x < 0.0) throw std::invalid_argument("gamma_q: x must be nonnegative");
    if (x == 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    if (x < a + 1.0) return std::clamp(1.0 - gamma_p_series(a, x), 0.0, 1.0);
    return std::clamp(gamma_q_fraction(a, x), 0.0, 1.0);
}

double chisq_sf(double x, int df) {
    if (df < 1) throw std::invalid_argument("chisq_sf: df must be positive");
    if (!(x >= 0.0)) throw std::invalid_argument("chisq_sf: x must be nonnegative");
    // Closed forms where they exist keep the common cases exact.
    if (df == 2) return std::exp(-0.5 * x);
    if (df == 1) return std::erfc(std::sqrt(0.5 * x));
    return gamma_q(0.5 * df, 0.5 * x);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must lie in (0, 1)");
    // Acklam's rational approximation followed by one Halley step.
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00, 2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double e = normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

double empirical_quantile(std::vector<double> values, double prob) {
    if (values.empty()) throw std::invalid_argument("empirical_quantile: empty input");
    prob = std::clamp(prob, 0.0, 1.0);
    const double h = prob * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
    const double v_lo = values[lo];
    if (lo + 1 >= values.size()) return v_lo;
    const double v_hi = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
    return v_lo + (h - static_cast<double>(lo)) * (v_hi - v_lo);
}

double sample_variance(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(v.size() - 1);
}

}  // namespace seqdi
