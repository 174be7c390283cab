#include <doctest.h>

#include <cmath>
#include <vector>

#include "seqdi/errors.hpp"
#include "seqdi/numerics.hpp"
#include "seqdi/rng.hpp"

using namespace seqdi;

TEST_CASE("solve_spd on identity and diagonal systems") {
    const Vector a = solve_spd(Matrix::identity(2), Vector{3.0, 5.0});
    CHECK(a[0] == doctest::Approx(3.0));
    CHECK(a[1] == doctest::Approx(5.0));
    const Vector b = solve_spd(Matrix::from_rows({{4, 0}, {0, 9}}), Vector{8.0, 27.0});
    CHECK(b[0] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(b[1] == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("solve_spd rejects a rank-deficient matrix") {
    CHECK_THROWS_AS(solve_spd(Matrix::from_rows({{1, 1}, {1, 1}}), Vector{1.0, 2.0}), NotPositiveDefinite);
}

TEST_CASE("inverse_spd times the matrix is the identity") {
    const Matrix a = Matrix::from_rows({{4, 1, 0.5}, {1, 3, 0.2}, {0.5, 0.2, 2}});
    const Matrix p = a * inverse_spd(a);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(p(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
}

TEST_CASE("weighted_ls") {
    SUBCASE("intercept only gives the mean") {
        const Matrix x(4, 1, 1.0);
        const Vector b = weighted_ls(x, Vector{1, 2, 3, 10}, Vector(4, 1.0));
        CHECK(b[0] == doctest::Approx(4.0));
    }
    SUBCASE("perfect fit is recovered under any positive weights") {
        const Matrix x = Matrix::from_rows({{1, 0}, {1, 1}, {1, 2.5}, {1, -1}});
        const Vector b = weighted_ls(x, Vector{2, 5, 9.5, -1}, Vector{0.3, 2, 7, 1});
        CHECK(b[0] == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(b[1] == doctest::Approx(3.0).epsilon(1e-12));
    }
    SUBCASE("hand normal equations") {
        const Matrix x = Matrix::from_rows({{1, 0}, {1, 1}, {1, 2}});
        const Vector b = weighted_ls(x, Vector{1, 1, 4}, Vector(3, 1.0));
        CHECK(b[0] == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(b[1] == doctest::Approx(1.5).epsilon(1e-12));
    }
}

TEST_CASE("logistic_fit intercept-only MLE is the logit of the mean") {
    const Matrix x(10, 1, 1.0);
    std::vector<unsigned char> d(10, 0);
    d[0] = d[1] = d[2] = 1;
    CHECK(logistic_fit(x, d)[0] == doctest::Approx(std::log(0.3 / 0.7)).epsilon(1e-7));
    CHECK(logistic_fit(x, d)[0] == doctest::Approx(-0.8473).epsilon(1e-4));
    std::vector<unsigned char> half(10, 0);
    for (int i = 0; i < 5; ++i) half[i] = 1;
    CHECK(std::abs(logistic_fit(x, half)[0]) < 1e-8);
}

TEST_CASE("logistic_fit reports separation") {
    Matrix x(6, 2, 1.0);
    std::vector<unsigned char> d(6, 0);
    for (std::size_t i = 0; i < 6; ++i) {
        x(i, 1) = i < 3 ? 1.0 : 0.0;
        d[i] = i < 3 ? 1 : 0;
    }
    CHECK_THROWS_AS(logistic_fit(x, d), Separation);
}

TEST_CASE("chisq_sf") {
    CHECK(chisq_sf(0.0, 1) == 1.0);
    CHECK(chisq_sf(0.0, 4) == 1.0);
    CHECK(chisq_sf(5.991465, 2) == doctest::Approx(0.05).epsilon(1e-4));
    CHECK(chisq_sf(3.841459, 1) == doctest::Approx(0.05).epsilon(1e-4));
    // independent oracle: 2 (1 - Phi(sqrt x)) for df = 1, exp(-x/2)(1 + x/2) for df = 4
    CHECK(chisq_sf(2.7, 1) == doctest::Approx(std::erfc(std::sqrt(2.7 / 2.0))).epsilon(1e-12));
    CHECK(chisq_sf(7.3, 4) == doctest::Approx(std::exp(-3.65) * (1.0 + 3.65)).epsilon(1e-10));
    CHECK(chisq_sf(1.0, 2) == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
}

TEST_CASE("normal_cdf and normal_quantile") {
    CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959964).epsilon(1e-6));
    for (double p : {1e-6, 0.01, 0.3, 0.5, 0.8, 0.999})
        CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-9));
}

TEST_CASE("empirical_quantile is type 7") {
    const std::vector<double> v{4, 1, 3, 2};
    CHECK(empirical_quantile(v, 0.0) == 1.0);
    CHECK(empirical_quantile(v, 1.0) == 4.0);
    CHECK(empirical_quantile(v, 0.5) == doctest::Approx(2.5));
    CHECK(empirical_quantile(v, 0.25) == doctest::Approx(1.75));
}

TEST_CASE("RngStream is reproducible and keyed by stream") {
    RngStream a(7, 3), b(7, 3), c(7, 4);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto va = a.next_u64();
        CHECK(va == b.next_u64());
        differs = differs || va != c.next_u64();
    }
    CHECK(differs);
}

TEST_CASE("RngStream uniform and normal moments") {
    RngStream r(1, 0);
    const int n = 200000;
    double su = 0, sn = 0, sn2 = 0;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        CHECK_UNARY(u >= 0.0);
        CHECK_UNARY(u < 1.0);
        su += u;
        const double z = r.normal();
        sn += z;
        sn2 += z * z;
    }
    CHECK(std::abs(su / n - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
    CHECK(std::abs(sn / n) < 4.0 / std::sqrt(n));
    CHECK(std::abs(sn2 / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
}
