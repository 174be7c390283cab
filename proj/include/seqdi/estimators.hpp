#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>

#include "seqdi/design.hpp"
#include "seqdi/numerics.hpp"
#include "seqdi/pilot.hpp"
#include "seqdi/population.hpp"

namespace seqdi {

// Estimator tags as they appear in reports.
namespace tags {
inline constexpr const char* DI = "DI";
inline constexpr const char* HTseq = "HTseq";
inline constexpr const char* SepDIb = "sepDI_b";
inline constexpr const char* SepDIsigma = "sepDI_sigma";
inline constexpr const char* ComDIsigma = "comDI_sigma";
inline constexpr const char* AdDIsigma = "adDI_sigma";
inline constexpr const char* GREG = "GREG";
inline constexpr const char* IPW = "IPW";
inline constexpr const char* DR = "DR";
inline constexpr const char* Fusion = "GREG_DR";
}  // namespace tags

struct Estimate {
    std::string tag;
    double point = 0.0;
    std::optional<double> variance;
    std::optional<double> ci_low;
    std::optional<double> ci_high;
    double level = 0.95;
};

// Attaches a Wald interval point +- z sqrt(variance) when a variance is given.
Estimate make_estimate(std::string tag, double point, std::optional<double> variance, double level = 0.95);

// Rows of a probability sample: covariates, outcomes and inclusion
// probabilities, aligned.
struct SampleData {
    Matrix x;
    Vector y;
    Vector pi;

    std::size_t size() const { return y.size(); }
};

SampleData gather_sample(const Population& pop, const DrawnSample& sample);

enum class WeightKind { InversePi, InversePiSigma };

// q_i = 1/pi_i or 1/(pi_i sigma_i^2), truncated at the given empirical
// quantile within the estimating sample (1.0 disables truncation).
struct WeightSpec {
    WeightKind kind = WeightKind::InversePi;
    double truncation_quantile = 0.999;
};

// Builds q for rows (x, pi); `model` is required for InversePiSigma.
Vector working_weights(const Matrix& x, std::span<const double> pi, const WeightSpec& spec,
                       const PilotVarianceModel* model);

// Caps every entry at the empirical `quantile` of the vector.
void truncate_weights(Vector& q, double quantile);

// Design-based plug-in variance
//   sum_{i,j in S} (pi_ij - pi_i pi_j) / pi_ij * (e_i / pi_i) (e_j / pi_j)
// for a general joint-inclusion function (arguments are sample positions).
using JointInclusion = std::function<double(std::size_t, std::size_t)>;
double plugin_variance(std::span<const double> residuals, std::span<const double> pi,
                       const JointInclusion& joint);

// Poisson specialisation: pi_ij = pi_i pi_j off the diagonal, so only
// sum (1 - pi_i) e_i^2 / pi_i^2 survives.
double poisson_plugin_variance(std::span<const double> residuals, std::span<const double> pi);

// Certainty total plus N1 times the Hajek mean of S_p.
Estimate y_di(double np_total, const SampleData& s, double n1, double level = 0.95);

// Certainty total plus the HT total over S_p.
Estimate y_ht_seq(double np_total, const SampleData& s, double level = 0.95);

// (sum q x x^T)^{-1} sum q x y.
Vector regression_coefficient(const Matrix& x, std::span<const double> y, std::span<const double> q);

// Separate-regression estimator: coefficient fitted on S_p alone.
Estimate y_sep_di(double np_total, const SampleData& s, std::span<const double> x_u1_total,
                  const WeightSpec& wspec, const PilotVarianceModel* model, double level = 0.95);

// Combined-regression estimator: coefficient fitted on S_np and S_p with
// pi = 1 on S_np.
Estimate y_com_di(const Matrix& x_np, std::span<const double> y_np, const SampleData& s,
                  std::span<const double> x_u1_total, const WeightSpec& wspec,
                  const PilotVarianceModel* model, double level = 0.95);

// Probability-sample GREG over the whole frame (independent-sampling setup).
Estimate y_greg_independent(std::span<const double> x_u_total, const SampleData& ind, double level = 0.95);

// Estimated propensities logistic(x^T alpha) for every unit of the frame.
Vector fitted_propensities(const Population& pop, std::span<const double> alpha);

// IPW with the propensity fitted by logistic MLE of delta on the full frame.
Estimate y_ipw(const Population& pop, const Partition& partition);
Estimate y_ipw(const Population& pop, const Partition& partition, std::span<const double> propensity);

// IPW plus the x-total correction with the unit-weight OLS fitted on S_np.
Estimate y_dr(const Population& pop, const Partition& partition);
Estimate y_dr(const Population& pop, const Partition& partition, std::span<const double> propensity);

// alpha * greg + (1 - alpha) * dr.
Estimate y_fusion(const Estimate& greg, const Estimate& dr, double alpha);

}  // namespace seqdi
