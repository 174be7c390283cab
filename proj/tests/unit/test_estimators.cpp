#include <doctest.h>

#include <cmath>
#include <numeric>

#include "seqdi/errors.hpp"
#include "seqdi/estimators.hpp"
#include "seqdi/rng.hpp"

using namespace seqdi;

namespace {

SampleData sample(Matrix x, Vector y, Vector pi) { return SampleData{std::move(x), std::move(y), std::move(pi)}; }

// n rows (1, u1, u2) with y = 3 + 2 u1 - u2.
SampleData linear_sample(std::size_t n, RngStream& rng) {
    SampleData s{Matrix(n, 3, 1.0), Vector(n), Vector(n)};
    for (std::size_t i = 0; i < n; ++i) {
        s.x(i, 1) = rng.uniform();
        s.x(i, 2) = rng.uniform();
        s.y[i] = 3.0 + 2.0 * s.x(i, 1) - s.x(i, 2);
        s.pi[i] = 0.05 + 0.9 * rng.uniform();
    }
    return s;
}

}  // namespace

TEST_CASE("make_estimate attaches a Wald interval") {
    const Estimate e = make_estimate("t", 10.0, 4.0);
    REQUIRE(e.ci_low.has_value());
    CHECK(*e.ci_low == doctest::Approx(10.0 - 1.959964 * 2.0).epsilon(1e-6));
    CHECK(*e.ci_high == doctest::Approx(10.0 + 1.959964 * 2.0).epsilon(1e-6));
    const Estimate n = make_estimate("t", 10.0, std::nullopt);
    CHECK_FALSE(n.ci_low.has_value());
    CHECK_FALSE(n.variance.has_value());
}

TEST_CASE("y_di hand example") {
    const SampleData s = sample(Matrix(1, 1, 1.0), Vector{2.0}, Vector{0.5});
    const Estimate e = y_di(10.0, s, 2.0);
    CHECK(e.tag == "DI");
    CHECK(e.point == doctest::Approx(14.0));
}

TEST_CASE("y_ht_seq hand example") {
    const SampleData s = sample(Matrix(1, 1, 1.0), Vector{3.0}, Vector{0.5});
    const Estimate e = y_ht_seq(0.0, s);
    CHECK(e.point == doctest::Approx(6.0));
    REQUIRE(e.variance.has_value());
    CHECK(*e.variance == doctest::Approx(18.0));
}

TEST_CASE("census second stage returns the total with zero variance") {
    const Matrix x = Matrix::from_rows({{1, 0.2}, {1, 0.5}, {1, 0.9}, {1, 0.4}});
    const SampleData s = sample(x, Vector{3, 7, 4, 6}, Vector(4, 1.0));
    const Vector xt = column_totals(x);
    const double np_total = 11.0;
    const double y_total = np_total + 20.0;
    for (const Estimate& e : {y_di(np_total, s, 4.0), y_ht_seq(np_total, s),
                              y_sep_di(np_total, s, xt, WeightSpec{}, nullptr)}) {
        CHECK(e.point == doctest::Approx(y_total).epsilon(1e-12));
        REQUIRE(e.variance.has_value());
        CHECK(*e.variance == doctest::Approx(0.0));
    }
}

TEST_CASE("poisson_plugin_variance agrees with the general form") {
    const Vector e{1.0, -2.0, 0.5};
    const Vector pi{0.2, 0.5, 0.9};
    const double poisson = poisson_plugin_variance(e, pi);
    const double general =
        plugin_variance(e, pi, [&](std::size_t i, std::size_t j) { return i == j ? pi[i] : pi[i] * pi[j]; });
    CHECK(poisson == doctest::Approx(general).epsilon(1e-14));
    CHECK(poisson == doctest::Approx(0.8 / 0.04 + 0.5 * 4 / 0.25 + 0.1 * 0.25 / 0.81).epsilon(1e-14));
}

TEST_CASE("regression_coefficient") {
    SUBCASE("proportional single covariate") {
        const Matrix x = Matrix::from_rows({{1.0}, {2.0}, {5.0}});
        CHECK(regression_coefficient(x, Vector{1, 2, 5}, Vector{1, 3, 2})[0] == doctest::Approx(1.0));
    }
    SUBCASE("intercept only gives the Hajek mean") {
        const Vector y{1, 4, 10};
        const Vector q{2, 1, 0.5};
        CHECK(regression_coefficient(Matrix(3, 1, 1.0), y, q)[0] == doctest::Approx((2 + 4 + 5) / 3.5));
    }
}

TEST_CASE("regression estimators are exact under a perfect linear fit") {
    RngStream rng(5, 0);
    const SampleData s = linear_sample(40, rng);
    const Matrix x_np = Matrix::from_rows({{1, 0.3, 0.3}, {1, 0.6, 0.1}, {1, 0.9, 0.2}, {1, 0.1, 0.8}, {1, 0.5, 0.5}});
    Vector y_np(5);
    for (std::size_t i = 0; i < 5; ++i) y_np[i] = 3.0 + 2.0 * x_np(i, 1) - x_np(i, 2);
    const double np_total = std::accumulate(y_np.begin(), y_np.end(), 0.0);
    const Vector xt{250.0, 120.0, 130.0};
    const double y_u1 = 3.0 * 250.0 + 2.0 * 120.0 - 130.0;

    const Estimate sep = y_sep_di(np_total, s, xt, WeightSpec{}, nullptr);
    CHECK(sep.tag == "sepDI_b");
    CHECK(sep.point == doctest::Approx(np_total + y_u1).epsilon(1e-12));
    CHECK(std::abs(*sep.variance) < 1e-12);

    const Estimate com = y_com_di(x_np, y_np, s, xt, WeightSpec{}, nullptr);
    CHECK(com.point == doctest::Approx(np_total + y_u1).epsilon(1e-12));

    const Estimate greg = y_greg_independent(xt, s);
    CHECK(greg.point == doctest::Approx(y_u1).epsilon(1e-12));
}

TEST_CASE("sigma weights need a model") {
    RngStream rng(6, 0);
    const SampleData s = linear_sample(10, rng);
    const WeightSpec spec{WeightKind::InversePiSigma, 0.999};
    CHECK_THROWS(working_weights(s.x, s.pi, spec, nullptr));
    PilotVarianceModel m;
    m.beta = {1.0, 0.0, 0.0};
    m.gamma = 0.0;
    m.sigma2 = 4.0;
    const Vector q = working_weights(s.x, s.pi, WeightSpec{WeightKind::InversePiSigma, 1.0}, &m);
    for (std::size_t i = 0; i < 10; ++i) CHECK(q[i] == doctest::Approx(1.0 / (4.0 * s.pi[i])));
}

TEST_CASE("truncate_weights caps at the quantile") {
    Vector q{1, 2, 3, 4, 100};
    truncate_weights(q, 0.75);
    CHECK(q[4] == doctest::Approx(4.0));
    CHECK(q[0] == 1.0);
}

TEST_CASE("DR equals IPW when the propensity weights reproduce the x totals") {
    Population pop;
    pop.ids = {"a", "b", "c", "d", "e", "f"};
    pop.x = Matrix::from_rows({{1, 0}, {1, 1}, {1, 2}, {1, 0}, {1, 1}, {1, 2}});
    pop.y = {1.0, 4.0, 2.0, 6.0, 3.0, 5.0};
    pop.true_total = 21.0;
    const Partition part(std::vector<unsigned char>{1, 1, 1, 0, 0, 0});
    const Vector prop(6, 0.5);
    const Estimate ipw = y_ipw(pop, part, prop);
    const Estimate dr = y_dr(pop, part, prop);
    CHECK(ipw.point == doctest::Approx(14.0));
    CHECK(dr.point == doctest::Approx(ipw.point).epsilon(1e-12));

    const Estimate unit = y_ipw(pop, part, Vector(6, 1.0));
    CHECK(unit.point == doctest::Approx(7.0));
}

TEST_CASE("DR is exact for a linear outcome") {
    Population pop;
    pop.ids = {"a", "b", "c", "d", "e"};
    pop.x = Matrix::from_rows({{1, 0.1}, {1, 0.4}, {1, 0.7}, {1, 0.2}, {1, 0.9}});
    pop.y.resize(5);
    for (std::size_t i = 0; i < 5; ++i) pop.y[i] = 2.0 + 5.0 * pop.x(i, 1);
    pop.true_total = std::accumulate(pop.y.begin(), pop.y.end(), 0.0);
    const Partition part(std::vector<unsigned char>{1, 1, 1, 0, 0});
    const Estimate dr = y_dr(pop, part, Vector{0.3, 0.8, 0.6, 0.5, 0.5});
    CHECK(dr.point == doctest::Approx(pop.true_total).epsilon(1e-12));
}

TEST_CASE("y_fusion endpoints") {
    const Estimate g = make_estimate("GREG", 100.0, 4.0);
    const Estimate d = make_estimate("DR", 120.0, std::nullopt);
    CHECK(y_fusion(g, d, 1.0).point == 100.0);
    CHECK(y_fusion(g, d, 0.0).point == 120.0);
    CHECK(y_fusion(g, d, 0.25).point == doctest::Approx(115.0));
    CHECK(y_fusion(g, d, 0.25).tag == "GREG_DR");
    CHECK_THROWS(y_fusion(g, d, 1.5));
}
