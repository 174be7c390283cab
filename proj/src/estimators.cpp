#include "seqdi/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "seqdi/errors.hpp"

namespace seqdi {

Estimate make_estimate(std::string tag, double point, std::optional<double> variance, double level) {
    Estimate e;
    e.tag = std::move(tag);
    e.point = point;
    e.level = level;
    if (variance) {
        e.variance = std::max(*variance, 0.0);
        const double half = normal_quantile(0.5 * (1.0 + level)) * std::sqrt(*e.variance);
        e.ci_low = point - half;
        e.ci_high = point + half;
    }
    return e;
}

SampleData gather_sample(const Population& pop, const DrawnSample& sample) {
    SampleData s;
    s.x = pop.x.select_rows(sample.members);
    s.y = gather(pop.y, sample.members);
    s.pi = sample.pi;
    return s;
}

void truncate_weights(Vector& q, double quantile) {
    if (q.empty() || quantile >= 1.0) return;
    const double cap = empirical_quantile(q, quantile);
    for (double& v : q) v = std::min(v, cap);
}

Vector working_weights(const Matrix& x, std::span<const double> pi, const WeightSpec& spec,
                       const PilotVarianceModel* model) {
    Vector q(pi.size());
    if (spec.kind == WeightKind::InversePiSigma && model == nullptr)
        throw std::invalid_argument("sigma-weighted working weights need a variance model");
    for (std::size_t i = 0; i < q.size(); ++i) {
        q[i] = 1.0 / pi[i];
        if (spec.kind == WeightKind::InversePiSigma) q[i] /= predict_sigma2(*model, x.row(i));
    }
    truncate_weights(q, spec.truncation_quantile);
    return q;
}

double plugin_variance(std::span<const double> residuals, std::span<const double> pi,
                       const JointInclusion& joint) {
    const std::size_t n = residuals.size();
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double ui = residuals[i] / pi[i];
        for (std::size_t j = 0; j < n; ++j) {
            const double pij = i == j ? pi[i] : joint(i, j);
            v += (pij - pi[i] * pi[j]) / pij * ui * (residuals[j] / pi[j]);
        }
    }
    return v;
}

double poisson_plugin_variance(std::span<const double> residuals, std::span<const double> pi) {
    double v = 0.0;
    for (std::size_t i = 0; i < residuals.size(); ++i)
        v += (1.0 - pi[i]) * residuals[i] * residuals[i] / (pi[i] * pi[i]);
    return v;
}

Estimate y_di(double np_total, const SampleData& s, double n1, double level) {
    if (s.size() == 0) throw EmptySample("DI estimator needs a nonempty probability sample");
    double inv_sum = 0.0;
    double ht = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        inv_sum += 1.0 / s.pi[i];
        ht += s.y[i] / s.pi[i];
    }
    const double hajek = ht / inv_sum;
    double acc = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double z = s.y[i] - hajek;
        acc += (1.0 - s.pi[i]) * z * z / (s.pi[i] * s.pi[i]);
    }
    const double variance = n1 * n1 / (inv_sum * inv_sum) * acc;
    return make_estimate(tags::DI, np_total + n1 * hajek, variance, level);
}

Estimate y_ht_seq(double np_total, const SampleData& s, double level) {
    double ht = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) ht += s.y[i] / s.pi[i];
    return make_estimate(tags::HTseq, np_total + ht, poisson_plugin_variance(s.y, s.pi), level);
}

Vector regression_coefficient(const Matrix& x, std::span<const double> y, std::span<const double> q) {
    return weighted_ls(x, y, q);
}

namespace {

struct GregParts {
    double point;
    double variance;
};

// HT totals over `s` plus the regression correction toward `x_total`;
// variance from the Poisson plug-in on residuals at `coef`.
GregParts greg_correction(const SampleData& s, std::span<const double> x_total, std::span<const double> coef) {
    const std::size_t d = s.x.cols();
    double ht_y = 0.0;
    Vector ht_x(d, 0.0);
    Vector resid(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto xi = s.x.row(i);
        ht_y += s.y[i] / s.pi[i];
        for (std::size_t j = 0; j < d; ++j) ht_x[j] += xi[j] / s.pi[i];
        resid[i] = s.y[i] - dot(xi, coef);
    }
    double correction = 0.0;
    for (std::size_t j = 0; j < d; ++j) correction += (x_total[j] - ht_x[j]) * coef[j];
    return {ht_y + correction, poisson_plugin_variance(resid, s.pi)};
}

}  // namespace

Estimate y_sep_di(double np_total, const SampleData& s, std::span<const double> x_u1_total,
                  const WeightSpec& wspec, const PilotVarianceModel* model, double level) {
    if (s.size() == 0) throw EmptySample("regression estimator needs a nonempty probability sample");
    const Vector q = working_weights(s.x, s.pi, wspec, model);
    const Vector coef = regression_coefficient(s.x, s.y, q);
    const GregParts g = greg_correction(s, x_u1_total, coef);
    const char* tag = wspec.kind == WeightKind::InversePi ? tags::SepDIb : tags::SepDIsigma;
    return make_estimate(tag, np_total + g.point, g.variance, level);
}

Estimate y_com_di(const Matrix& x_np, std::span<const double> y_np, const SampleData& s,
                  std::span<const double> x_u1_total, const WeightSpec& wspec,
                  const PilotVarianceModel* model, double level) {
    if (s.size() == 0) throw EmptySample("regression estimator needs a nonempty probability sample");
    const std::size_t n_np = x_np.rows();
    const std::size_t d = s.x.cols();
    if (n_np > 0 && x_np.cols() != d) throw std::invalid_argument("y_com_di: covariate dimension mismatch");

    Matrix x_all(n_np + s.size(), d);
    Vector y_all(n_np + s.size());
    Vector pi_all(n_np + s.size());
    for (std::size_t i = 0; i < n_np; ++i) {
        std::copy(x_np.row(i).begin(), x_np.row(i).end(), x_all.row(i).begin());
        y_all[i] = y_np[i];
        pi_all[i] = 1.0;
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
        std::copy(s.x.row(i).begin(), s.x.row(i).end(), x_all.row(n_np + i).begin());
        y_all[n_np + i] = s.y[i];
        pi_all[n_np + i] = s.pi[i];
    }
    const Vector q = working_weights(x_all, pi_all, wspec, model);
    const Vector coef = regression_coefficient(x_all, y_all, q);

    double np_total = 0.0;
    for (double v : y_np) np_total += v;
    const GregParts g = greg_correction(s, x_u1_total, coef);
    const char* tag = wspec.kind == WeightKind::InversePi ? "comDI_b" : tags::ComDIsigma;
    return make_estimate(tag, np_total + g.point, g.variance, level);
}

Estimate y_greg_independent(std::span<const double> x_u_total, const SampleData& ind, double level) {
    if (ind.size() == 0) throw EmptySample("GREG needs a nonempty probability sample");
    Vector q(ind.size());
    for (std::size_t i = 0; i < q.size(); ++i) q[i] = 1.0 / ind.pi[i];
    const Vector coef = regression_coefficient(ind.x, ind.y, q);
    const GregParts g = greg_correction(ind, x_u_total, coef);
    return make_estimate(tags::GREG, g.point, g.variance, level);
}

Vector fitted_propensities(const Population& pop, std::span<const double> alpha) {
    Vector p(pop.size());
    for (std::size_t i = 0; i < pop.size(); ++i) p[i] = logistic(dot(pop.x.row(i), alpha));
    return p;
}

namespace {

Vector estimate_propensity(const Population& pop, const Partition& partition) {
    const Vector alpha = logistic_fit(pop.x, partition.delta());
    return fitted_propensities(pop, alpha);
}

}  // namespace

Estimate y_ipw(const Population& pop, const Partition& partition, std::span<const double> propensity) {
    double total = 0.0;
    for (std::size_t i : partition.np_indices()) total += pop.y[i] / propensity[i];
    return make_estimate(tags::IPW, total, std::nullopt);
}

Estimate y_ipw(const Population& pop, const Partition& partition) {
    return y_ipw(pop, partition, estimate_propensity(pop, partition));
}

Estimate y_dr(const Population& pop, const Partition& partition, std::span<const double> propensity) {
    const auto& np = partition.np_indices();
    const Matrix x_np = pop.x.select_rows(np);
    const Vector y_np = gather(pop.y, np);
    const Vector beta = weighted_ls(x_np, y_np, Vector(np.size(), 1.0));

    const std::size_t d = pop.dim();
    Vector gap = column_totals(pop.x);
    double ipw = 0.0;
    for (std::size_t i : np) {
        ipw += pop.y[i] / propensity[i];
        const auto xi = pop.x.row(i);
        for (std::size_t j = 0; j < d; ++j) gap[j] -= xi[j] / propensity[i];
    }
    return make_estimate(tags::DR, ipw + dot(gap, beta), std::nullopt);
}

Estimate y_dr(const Population& pop, const Partition& partition) {
    return y_dr(pop, partition, estimate_propensity(pop, partition));
}

Estimate y_fusion(const Estimate& greg, const Estimate& dr, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("fusion weight must lie in [0, 1]");
    return make_estimate(tags::Fusion, alpha * greg.point + (1.0 - alpha) * dr.point, std::nullopt);
}

}  // namespace seqdi
