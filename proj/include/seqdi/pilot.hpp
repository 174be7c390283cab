#pragma once

#include <span>

#include "seqdi/numerics.hpp"

namespace seqdi {

// Working power-variance model V(y | x) = sigma2 * (x^T beta)^gamma with the
// numerical floors used for prediction.
struct PilotVarianceModel {
    Vector beta;
    double sigma2 = 1.0;
    double gamma = 0.0;
    double mean_floor = 1.0;    // lower bound applied to x^T beta
    double sigma2_floor = 0.0;  // lower bound applied to the prediction
};

struct PowerVarianceOptions {
    int fgls_iterations = 1;
    double gamma_cap = 3.0;
    double mean_floor_quantile = 0.05;
    double sigma2_floor_factor = 1e-8;  // times the sample variance of y
};

// max(sigma2 * max(x^T beta, mean_floor)^gamma, sigma2_floor)
double predict_sigma2(const PilotVarianceModel& model, std::span<const double> x);
Vector predict_sigma2(const PilotVarianceModel& model, const Matrix& x);

// Variance-function step for a given coefficient vector: residuals, OLS of
// log e^2 on (1, log m) over rows with positive fitted mean m, gamma capped,
// then the variance scale re-estimated as the mean of e^2 / m^gamma over the
// rows used. The mean floor is computed here but only enters predictions.
PilotVarianceModel fit_variance_function(const Matrix& x, std::span<const double> y,
                                         const Vector& beta, double sigma2_floor,
                                         const PowerVarianceOptions& options = {});

// Two-stage fit with FGLS refinement. `base_weights` multiply every
// regression weight (unit weights on the pilot, 1/pi on a probability
// sample).
PilotVarianceModel fit_power_variance(const Matrix& x, std::span<const double> y,
                                      std::span<const double> base_weights,
                                      const PowerVarianceOptions& options = {});

// Pilot fit on the non-probability sample: unit-weight first stage.
PilotVarianceModel fit_pilot(const Matrix& x_np, std::span<const double> y_np, int fgls_iterations = 1);

// sigma2 floor for a response vector: 1e-8 (by default) times its sample
// variance, with fallbacks when the variance is zero.
double sigma2_floor_for(std::span<const double> y, double factor = 1e-8);

}  // namespace seqdi
