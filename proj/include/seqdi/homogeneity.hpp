#pragma once

#include <span>

#include "seqdi/estimators.hpp"
#include "seqdi/numerics.hpp"
#include "seqdi/pilot.hpp"

namespace seqdi {

// Coefficient estimate with its estimated covariance. For a probability
// sample the covariance is the design-based part; the model-variance term is
// kept separately.
struct CoefficientFit {
    Vector beta;
    Matrix variance;
    Matrix model_variance;  // empty unless fitted on a probability sample
    PilotVarianceModel variance_model;
};

struct HomogeneityResult {
    Vector beta_np;
    Vector beta_p;
    Matrix v_np;
    Matrix v_p;
    double statistic = 0.0;
    int df = 0;
    double p_value = 1.0;
    bool reject = false;
    double alpha = 0.05;
};

// A^{-1} B A^{-1} with A = sum w x x^T and B = sum c w^2 e^2 x x^T.
Matrix sandwich_variance(const Matrix& x, std::span<const double> residuals,
                         std::span<const double> weights, std::span<const double> meat_factor);

// FGLS coefficient on S_np with its sandwich covariance; the variance
// weights come from the final pilot variance model.
CoefficientFit fgls_np(const Matrix& x_np, std::span<const double> y_np, int fgls_iterations = 1);
CoefficientFit fgls_np(const Matrix& x_np, std::span<const double> y_np, const PilotVarianceModel& model);

// pi-weighted FGLS on S_p with weights 1 / (pi tau^2), tau^2 from a power
// variance model fitted on S_p. `variance` is the Poisson design-based
// sandwich, `model_variance` the model term.
CoefficientFit fgls_p(const SampleData& s, int fgls_iterations = 1);

// Wald-type statistic (b_np - b_p)^T (V_np + V_p)^{-1} (b_np - b_p) against
// chi-square with d degrees of freedom. Throws SingularVariance.
HomogeneityResult homogeneity_test(const CoefficientFit& np_fit, const CoefficientFit& p_fit, double alpha,
                                   bool include_model_variance = false);

// Separate estimate when homogeneity is rejected, combined otherwise.
Estimate adaptive_estimate(const Estimate& sep, const Estimate& com, const HomogeneityResult& test);

}  // namespace seqdi
