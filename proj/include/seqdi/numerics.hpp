#pragma once

// Small dense kernels used throughout the estimators. Covariate dimension is
// tiny (d <= 4 in every workflow we ship), so everything here is written for
// clarity over blocking or vectorisation.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace seqdi {

using Vector = std::vector<double>;

// Row-major dense matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t d);
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    const std::vector<double>& data() const { return data_; }

    // Copy of the listed rows, in order.
    Matrix select_rows(std::span<const std::size_t> indices) const;
    Vector column(std::size_t j) const;
    Matrix transpose() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);
Vector operator*(const Matrix& a, std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);

// Selects entries of v at the given positions.
Vector gather(std::span<const double> v, std::span<const std::size_t> indices);

// Sum_i w_i x_i x_i^T over the rows of x.
Matrix weighted_cross_product(const Matrix& x, std::span<const double> w);
// Sum_i w_i x_i y_i.
Vector weighted_cross_vector(const Matrix& x, std::span<const double> w,
                             std::span<const double> y);
// Sum_i x_i (column totals).
Vector column_totals(const Matrix& x);

// Lower Cholesky factor of a symmetric positive-definite matrix.
// Throws NotPositiveDefinite when a pivot is <= 1e-12 * trace / d.
class Cholesky {
public:
    explicit Cholesky(const Matrix& a);

    Vector solve(std::span<const double> b) const;
    Matrix inverse() const;
    std::size_t dim() const { return lower_.rows(); }

private:
    Matrix lower_;
};

Vector solve_spd(const Matrix& a, std::span<const double> b);
Matrix inverse_spd(const Matrix& a);

// argmin_beta sum_i w_i (y_i - x_i^T beta)^2.
Vector weighted_ls(const Matrix& x, std::span<const double> y, std::span<const double> w);

double logistic(double t);

struct LogisticOptions {
    int max_iterations = 100;
    double tolerance = 1e-8;
    double separation_bound = 30.0;
};

// Newton-Raphson maximum likelihood for logit P(delta = 1 | x) = x^T alpha,
// with step halving whenever the log-likelihood decreases.
Vector logistic_fit(const Matrix& x, std::span<const unsigned char> delta,
                    const LogisticOptions& options = {});

// Regularised upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a).
double gamma_q(double a, double x);

// P(chi^2_df > x).
double chisq_sf(double x, int df);

double normal_cdf(double z);
// Inverse of normal_cdf for p in (0, 1).
double normal_quantile(double p);

// Empirical quantile with linear interpolation between order statistics
// (Hyndman-Fan type 7). `values` need not be sorted.
double empirical_quantile(std::vector<double> values, double prob);

double sample_variance(std::span<const double> v);

}  // namespace seqdi
