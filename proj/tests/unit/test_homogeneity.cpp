#include <doctest.h>

#include <cmath>

#include "seqdi/errors.hpp"
#include "seqdi/homogeneity.hpp"
#include "seqdi/rng.hpp"

using namespace seqdi;

namespace {

CoefficientFit fit(Vector beta, Matrix v) {
    CoefficientFit f;
    f.beta = std::move(beta);
    f.variance = std::move(v);
    return f;
}

Matrix scaled_identity(std::size_t d, double s) {
    Matrix m = Matrix::identity(d);
    for (std::size_t i = 0; i < d; ++i) m(i, i) = s;
    return m;
}

}  // namespace

TEST_CASE("homogeneity_test quadratic form and p-value") {
    const HomogeneityResult r =
        homogeneity_test(fit({1.0, 0.0}, scaled_identity(2, 0.5)), fit({0.0, 0.0}, scaled_identity(2, 0.5)), 0.05);
    CHECK(r.statistic == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(r.df == 2);
    CHECK(r.p_value == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
    CHECK_FALSE(r.reject);

    const HomogeneityResult same =
        homogeneity_test(fit({2.0, 3.0}, scaled_identity(2, 0.5)), fit({2.0, 3.0}, scaled_identity(2, 1.0)), 0.05);
    CHECK(same.statistic == 0.0);
    CHECK(same.p_value == 1.0);
    CHECK_FALSE(same.reject);

    const HomogeneityResult far =
        homogeneity_test(fit({10.0, 0.0}, scaled_identity(2, 0.5)), fit({0.0, 0.0}, scaled_identity(2, 0.5)), 0.05);
    CHECK(far.reject);
}

TEST_CASE("homogeneity_test singular variance") {
    CHECK_THROWS_AS(homogeneity_test(fit({1.0, 0.0}, Matrix(2, 2, 0.0)), fit({0.0, 0.0}, Matrix(2, 2, 0.0)), 0.05),
                    SingularVariance);
}

TEST_CASE("sandwich_variance vanishes with zero residuals") {
    const Matrix x = Matrix::from_rows({{1, 0.1}, {1, 0.5}, {1, 0.9}});
    const Matrix v = sandwich_variance(x, Vector(3, 0.0), Vector(3, 1.0), Vector(3, 1.0));
    for (double a : v.data()) CHECK(a == 0.0);
}

TEST_CASE("sandwich_variance reduces to the OLS HC0 form") {
    // Intercept only: A = n, B = sum e^2, so V = sum e^2 / n^2.
    const Matrix v = sandwich_variance(Matrix(4, 1, 1.0), Vector{1, -1, 2, -2}, Vector(4, 1.0), Vector(4, 1.0));
    CHECK(v(0, 0) == doctest::Approx(10.0 / 16.0));
}

TEST_CASE("fgls_p under a census has zero design variance") {
    RngStream rng(2, 0);
    const std::size_t n = 60;
    SampleData s{Matrix(n, 2, 1.0), Vector(n), Vector(n, 1.0)};
    for (std::size_t i = 0; i < n; ++i) {
        s.x(i, 1) = rng.uniform();
        s.y[i] = (4.0 + 3.0 * s.x(i, 1)) * std::exp(0.3 * rng.normal());
    }
    const CoefficientFit f = fgls_p(s);
    for (double a : f.variance.data()) CHECK(a == 0.0);
}

TEST_CASE("adaptive_estimate picks the branch and keeps the weight suffix") {
    const Estimate sep = make_estimate("sepDI_sigma", 100.0, 9.0);
    const Estimate com = make_estimate("comDI_sigma", 101.0, 4.0);
    HomogeneityResult t;
    t.reject = true;
    const Estimate a = adaptive_estimate(sep, com, t);
    CHECK(a.point == sep.point);
    CHECK(a.variance == sep.variance);
    CHECK(a.tag == "adDI_sigma");
    t.reject = false;
    const Estimate b = adaptive_estimate(sep, com, t);
    CHECK(b.point == com.point);
    CHECK(b.tag == "adDI_sigma");
}
