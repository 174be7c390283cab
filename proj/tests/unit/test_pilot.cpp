#include <doctest.h>

#include <cmath>

#include "seqdi/errors.hpp"
#include "seqdi/pilot.hpp"
#include "seqdi/rng.hpp"

using namespace seqdi;

namespace {

// Rows (1, x) with y = m + e where e^2 = s2 * m^g exactly and the residual
// signs alternate in pairs so the residuals stay orthogonal to (1, x).
struct Planted {
    Matrix x;
    Vector y;
};

Planted planted(double s2, double g, std::size_t pairs) {
    Planted p{Matrix(2 * pairs, 2, 1.0), Vector(2 * pairs)};
    for (std::size_t k = 0; k < pairs; ++k) {
        const double m = 1.0 + static_cast<double>(k);
        const double e = std::sqrt(s2 * std::pow(m, g));
        for (std::size_t s = 0; s < 2; ++s) {
            const std::size_t i = 2 * k + s;
            p.x(i, 1) = m - 1.0;
            p.y[i] = m + (s == 0 ? e : -e);
        }
    }
    return p;
}

}  // namespace

TEST_CASE("fit_variance_function recovers a planted log-log line") {
    const Planted p = planted(1.0, 1.0, 20);
    const Vector beta{1.0, 1.0};
    const PilotVarianceModel m = fit_variance_function(p.x, p.y, beta, 0.0);
    CHECK(m.gamma == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(m.sigma2 == doctest::Approx(1.0).epsilon(1e-8));

    const Planted q = planted(0.3, 1.7, 20);
    const PilotVarianceModel mq = fit_variance_function(q.x, q.y, beta, 0.0);
    CHECK(mq.gamma == doctest::Approx(1.7).epsilon(1e-8));
    CHECK(mq.sigma2 == doctest::Approx(0.3).epsilon(1e-8));
}

TEST_CASE("fit_pilot on paired residuals recovers the planted model") {
    // The pairs balance around the line, so OLS returns beta = (1, 1) and the
    // variance step sees the planted residuals.
    const Planted p = planted(0.5, 2.0, 30);
    const PilotVarianceModel m = fit_pilot(p.x, p.y, 0);
    CHECK(m.beta[0] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(m.beta[1] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(m.gamma == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(m.sigma2 == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("gamma is capped at 3") {
    const Planted p = planted(1e-6, 10.0, 20);
    const PilotVarianceModel m = fit_variance_function(p.x, p.y, Vector{1.0, 1.0}, 0.0);
    CHECK(m.gamma == 3.0);
    const Planted q = planted(1.0, -10.0, 20);
    CHECK(fit_variance_function(q.x, q.y, Vector{1.0, 1.0}, 0.0).gamma == -3.0);
}

TEST_CASE("predict_sigma2") {
    PilotVarianceModel m;
    m.beta = {3.0};
    m.sigma2 = 2.0;
    m.gamma = 1.0;
    m.mean_floor = 0.5;
    CHECK(predict_sigma2(m, Vector{1.0}) == doctest::Approx(6.0));

    m.beta = {-5.0};
    m.sigma2 = 1.0;
    m.gamma = 2.0;
    m.mean_floor = 0.4;
    CHECK(predict_sigma2(m, Vector{1.0}) == doctest::Approx(0.16));

    m.gamma = 0.0;
    m.beta = {1.0, 7.0};
    m.sigma2 = 3.5;
    CHECK(predict_sigma2(m, Vector{1.0, 0.1}) == doctest::Approx(3.5));
    CHECK(predict_sigma2(m, Vector{1.0, 9.0}) == doctest::Approx(3.5));

    m.sigma2 = 1e-9;
    m.sigma2_floor = 1e-3;
    CHECK(predict_sigma2(m, Vector{1.0, 9.0}) == doctest::Approx(1e-3));
}

TEST_CASE("exact fit falls back to constant variance") {
    Matrix x(8, 2, 1.0);
    Vector y(8);
    for (std::size_t i = 0; i < 8; ++i) {
        x(i, 1) = static_cast<double>(i);
        y[i] = 2.0 + 3.0 * static_cast<double>(i);
    }
    const PilotVarianceModel m = fit_pilot(x, y);
    CHECK(m.gamma == 0.0);
    CHECK(m.sigma2 >= m.sigma2_floor);
}

TEST_CASE("too few rows are unidentifiable") {
    const Matrix x = Matrix::from_rows({{1, 0.1}, {1, 0.2}, {1, 0.5}, {1, 0.9}});
    CHECK_THROWS_AS(fit_pilot(x, Vector{1, 2, 3, 5}), Unidentifiable);
}

TEST_CASE("fit_pilot is scale equivariant") {
    RngStream rng(3, 0);
    const std::size_t n = 400;
    Matrix x(n, 3, 1.0);
    Vector y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x(i, 1) = rng.uniform();
        x(i, 2) = rng.uniform();
        const double mu = 10.0 + 15.0 * x(i, 1) + 10.0 * x(i, 2);
        y[i] = mu * std::exp(0.5 * rng.normal() - 0.125);
    }
    const PilotVarianceModel a = fit_pilot(x, y);
    const double c = 37.5;
    for (double& v : y) v *= c;
    const PilotVarianceModel b = fit_pilot(x, y);
    CHECK(b.gamma == doctest::Approx(a.gamma).epsilon(1e-9));
    for (std::size_t j = 0; j < 3; ++j) CHECK(b.beta[j] == doctest::Approx(c * a.beta[j]).epsilon(1e-9));
    CHECK(b.mean_floor == doctest::Approx(c * a.mean_floor).epsilon(1e-9));
    for (std::size_t i = 0; i < 20; ++i) {
        const double ra = predict_sigma2(a, x.row(i));
        const double rb = predict_sigma2(b, x.row(i));
        CHECK(rb == doctest::Approx(c * c * ra).epsilon(1e-8));
    }
}

TEST_CASE("one FGLS step is a no-op under homoscedastic errors with zero gamma") {
    RngStream rng(4, 0);
    const std::size_t n = 300;
    Matrix x(n, 2, 1.0);
    Vector y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x(i, 1) = rng.uniform();
        y[i] = 5.0 + 2.0 * x(i, 1) + rng.normal();
    }
    const PilotVarianceModel a = fit_pilot(x, y, 0);
    const PilotVarianceModel b = fit_pilot(x, y, 1);
    // gamma is near zero, so FGLS weights are nearly constant
    CHECK(std::abs(a.gamma) < 1.0);
    CHECK(b.beta[0] == doctest::Approx(a.beta[0]).epsilon(0.02));
    CHECK(b.beta[1] == doctest::Approx(a.beta[1]).epsilon(0.05));
}
