#include "seqdi/pilot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "seqdi/errors.hpp"

namespace seqdi {

double predict_sigma2(const PilotVarianceModel& model, std::span<const double> x) {
    const double mean = std::max(dot(x, model.beta), model.mean_floor);
    return std::max(model.sigma2 * std::pow(mean, model.gamma), model.sigma2_floor);
}

Vector predict_sigma2(const PilotVarianceModel& model, const Matrix& x) {
    Vector out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = predict_sigma2(model, x.row(i));
    return out;
}

double sigma2_floor_for(std::span<const double> y, double factor) {
    const double v = sample_variance(y);
    if (v > 0.0) return factor * v;
    double ms = 0.0;
    for (double t : y) ms += t * t;
    if (!y.empty()) ms /= static_cast<double>(y.size());
    return ms > 0.0 ? factor * ms : factor;
}

PilotVarianceModel fit_variance_function(const Matrix& x, std::span<const double> y,
                                         const Vector& beta, double sigma2_floor,
                                         const PowerVarianceOptions& options) {
    const std::size_t n = x.rows();
    PilotVarianceModel model;
    model.beta = beta;
    model.sigma2_floor = sigma2_floor;

    Vector fitted(n);
    Vector e2(n);
    std::vector<double> positive;
    positive.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        fitted[i] = dot(x.row(i), beta);
        const double e = y[i] - fitted[i];
        e2[i] = e * e;
        if (fitted[i] > 0.0) positive.push_back(fitted[i]);
    }
    if (positive.empty()) throw Unidentifiable("no positive fitted means; power variance model undefined");
    model.mean_floor = empirical_quantile(positive, options.mean_floor_quantile);

    // The variance regression uses the raw fitted means; the floor only
    // guards predictions. Rows with a nonpositive fitted mean have no log.
    Vector log_m(n, 0.0);
    const double m_lo = *std::min_element(positive.begin(), positive.end());
    const double m_hi = *std::max_element(positive.begin(), positive.end());
    if (m_hi - m_lo <= 1e-12 * m_hi)
        throw Unidentifiable("all fitted means are equal; variance power not identified");
    for (std::size_t i = 0; i < n; ++i)
        if (fitted[i] > 0.0) log_m[i] = std::log(fitted[i]);

    // Rows with numerically zero residuals carry no information on the
    // variance function and would put log(0) into the regression. "Zero" is
    // judged against the mean residual and against rounding in y itself.
    const double mean_e2 = std::accumulate(e2.begin(), e2.end(), 0.0) / static_cast<double>(n);
    std::vector<std::size_t> used;
    used.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double noise = 1e-10 * std::max(std::abs(y[i]), std::abs(fitted[i]));
        if (fitted[i] > 0.0 && e2[i] > 1e-12 * mean_e2 && e2[i] > noise * noise) used.push_back(i);
    }

    double lm_lo = std::numeric_limits<double>::infinity();
    double lm_hi = -lm_lo;
    for (std::size_t i : used) {
        lm_lo = std::min(lm_lo, log_m[i]);
        lm_hi = std::max(lm_hi, log_m[i]);
    }
    if (used.size() < 2 || lm_hi - lm_lo <= 1e-12 * std::max(1.0, std::abs(lm_hi))) {
        // Residuals vanish (exact fit): fall back to a constant variance.
        model.gamma = 0.0;
        model.sigma2 = std::max(mean_e2, sigma2_floor);
        return model;
    }

    // Simple regression of log e^2 on log m.
    const double k = static_cast<double>(used.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i : used) {
        mx += log_m[i];
        my += std::log(e2[i]);
    }
    mx /= k;
    my /= k;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i : used) {
        const double dx = log_m[i] - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(e2[i]) - my);
    }
    model.gamma = std::clamp(sxy / sxx, -options.gamma_cap, options.gamma_cap);

    double scale = 0.0;
    for (std::size_t i : used) scale += e2[i] * std::exp(-model.gamma * log_m[i]);
    // sigma2 is in units of y^(2 - gamma); the floor applies to predictions.
    model.sigma2 = scale / k;
    return model;
}

PilotVarianceModel fit_power_variance(const Matrix& x, std::span<const double> y,
                                      std::span<const double> base_weights,
                                      const PowerVarianceOptions& options) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    if (y.size() != n || base_weights.size() != n)
        throw std::invalid_argument("fit_power_variance: size mismatch");
    if (n <= d + 2)
        throw Unidentifiable("power variance fit needs more than d + 2 rows, got " + std::to_string(n));

    const double floor = sigma2_floor_for(y, options.sigma2_floor_factor);
    Vector beta = weighted_ls(x, y, base_weights);
    PilotVarianceModel model = fit_variance_function(x, y, beta, floor, options);

    Vector w(n);
    for (int it = 0; it < options.fgls_iterations; ++it) {
        for (std::size_t i = 0; i < n; ++i) w[i] = base_weights[i] / predict_sigma2(model, x.row(i));
        beta = weighted_ls(x, y, w);
        model = fit_variance_function(x, y, beta, floor, options);
    }
    return model;
}

PilotVarianceModel fit_pilot(const Matrix& x_np, std::span<const double> y_np, int fgls_iterations) {
    PowerVarianceOptions options;
    options.fgls_iterations = fgls_iterations;
    const Vector ones(x_np.rows(), 1.0);
    return fit_power_variance(x_np, y_np, ones, options);
}

}  // namespace seqdi
