#include "seqdi/homogeneity.hpp"

#include <algorithm>
#include <stdexcept>

#include "seqdi/errors.hpp"

namespace seqdi {

Matrix sandwich_variance(const Matrix& x, std::span<const double> residuals,
                         std::span<const double> weights, std::span<const double> meat_factor) {
    const std::size_t n = x.rows();
    Vector meat_w(n);
    for (std::size_t i = 0; i < n; ++i)
        meat_w[i] = meat_factor[i] * weights[i] * weights[i] * residuals[i] * residuals[i];
    const Matrix bread = inverse_spd(weighted_cross_product(x, weights));
    const Matrix meat = weighted_cross_product(x, meat_w);
    Matrix v = bread * meat * bread;
    for (std::size_t i = 0; i < v.rows(); ++i)
        for (std::size_t j = 0; j < i; ++j) {
            const double m = 0.5 * (v(i, j) + v(j, i));
            v(i, j) = m;
            v(j, i) = m;
        }
    return v;
}

CoefficientFit fgls_np(const Matrix& x_np, std::span<const double> y_np, const PilotVarianceModel& model) {
    const std::size_t n = x_np.rows();
    Vector w(n), e(n);
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = 1.0 / predict_sigma2(model, x_np.row(i));
        e[i] = y_np[i] - dot(x_np.row(i), model.beta);
    }
    CoefficientFit fit;
    fit.beta = model.beta;
    fit.variance = sandwich_variance(x_np, e, w, Vector(n, 1.0));
    fit.variance_model = model;
    return fit;
}

CoefficientFit fgls_np(const Matrix& x_np, std::span<const double> y_np, int fgls_iterations) {
    return fgls_np(x_np, y_np, fit_pilot(x_np, y_np, fgls_iterations));
}

CoefficientFit fgls_p(const SampleData& s, int fgls_iterations) {
    const std::size_t n = s.size();
    Vector base(n);
    for (std::size_t i = 0; i < n; ++i) base[i] = 1.0 / s.pi[i];
    PowerVarianceOptions options;
    options.fgls_iterations = fgls_iterations;
    const PilotVarianceModel tau = fit_power_variance(s.x, s.y, base, options);

    Vector w(n), e(n), design_factor(n);
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = base[i] / predict_sigma2(tau, s.x.row(i));
        e[i] = s.y[i] - dot(s.x.row(i), tau.beta);
        design_factor[i] = 1.0 - s.pi[i];
    }
    CoefficientFit fit;
    fit.beta = tau.beta;
    fit.variance = sandwich_variance(s.x, e, w, design_factor);
    fit.model_variance = sandwich_variance(s.x, e, w, s.pi);
    fit.variance_model = tau;
    return fit;
}

HomogeneityResult homogeneity_test(const CoefficientFit& np_fit, const CoefficientFit& p_fit, double alpha,
                                   bool include_model_variance) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("significance level must lie in (0, 1)");
    const std::size_t d = np_fit.beta.size();
    if (p_fit.beta.size() != d) throw std::invalid_argument("coefficient vectors differ in length");

    HomogeneityResult r;
    r.beta_np = np_fit.beta;
    r.beta_p = p_fit.beta;
    r.v_np = np_fit.variance;
    r.v_p = p_fit.variance;
    if (include_model_variance && p_fit.model_variance.rows() == d) r.v_p = r.v_p + p_fit.model_variance;
    r.df = static_cast<int>(d);
    r.alpha = alpha;

    Vector diff(d);
    for (std::size_t j = 0; j < d; ++j) diff[j] = r.beta_np[j] - r.beta_p[j];
    Vector solved;
    try {
        solved = solve_spd(r.v_np + r.v_p, diff);
    } catch (const NotPositiveDefinite& e) {
        throw SingularVariance(std::string("combined coefficient covariance is singular: ") + e.what());
    }
    r.statistic = std::max(0.0, dot(diff, solved));
    r.p_value = chisq_sf(r.statistic, r.df);
    r.reject = r.p_value < alpha;
    return r;
}

Estimate adaptive_estimate(const Estimate& sep, const Estimate& com, const HomogeneityResult& test) {
    Estimate out = test.reject ? sep : com;
    // sepDI_sigma -> adDI_sigma; keeps the weight suffix of the inputs.
    const auto suffix = sep.tag.find('_');
    out.tag = "adDI" + (suffix == std::string::npos ? std::string() : sep.tag.substr(suffix));
    return out;
}

}  // namespace seqdi
