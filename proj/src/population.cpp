#include "seqdi/population.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <string>

#include "seqdi/csv.hpp"
#include "seqdi/errors.hpp"

namespace seqdi {

void Population::validate() const {
    if (x.rows() != y.size() || ids.size() != y.size())
        throw InvalidParams("population: ids, covariates and y differ in length");
    if (x.cols() == 0) throw InvalidParams("population: no covariate columns");
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (x(i, 0) != 1.0) throw InvalidParams("population: first covariate column must be all ones");
        if (!std::isfinite(y[i])) throw InvalidParams("population: non-finite y");
        total += y[i];
    }
    if (std::abs(total - true_total) > 1e-9 * std::max(1.0, std::abs(total)))
        throw InvalidParams("population: true_total does not match sum of y");
}

Population generate_population(const PopulationParams& params, RngStream& rng) {
    if (params.size < 10) throw InvalidParams("population size must be at least 10");
    if (!(params.sigma > 0.0)) throw InvalidParams("sigma must be positive");

    const auto& b = params.beta;
    const double s = params.sigma;
    Population pop;
    pop.ids.reserve(params.size);
    pop.x = Matrix(params.size, 3);
    pop.y.resize(params.size);
    for (std::size_t i = 0; i < params.size; ++i) {
        const double x1 = rng.uniform();
        const double x2 = rng.uniform();
        const double mu = b[0] + b[1] * x1 + b[2] * x2 + b[3] * x1 * x2;
        if (!(mu > 0.0)) throw InvalidParams("mean function is not positive for some unit");
        const double eps = rng.normal(-0.5 * s * s, s);
        pop.ids.push_back(std::to_string(i + 1));
        pop.x(i, 0) = 1.0;
        pop.x(i, 1) = x1;
        pop.x(i, 2) = x2;
        pop.y[i] = mu * std::exp(eps);
    }
    pop.true_total = std::accumulate(pop.y.begin(), pop.y.end(), 0.0);
    return pop;
}

Vector selection_offsets(const SelectionMechanism& mech, const Population& pop) {
    const std::size_t covariates = pop.dim() - 1;
    const std::size_t expected = mech.kind == MechanismKind::MAR ? covariates : covariates + 1;
    if (mech.slopes.size() != expected)
        throw InvalidParams("selection mechanism expects " + std::to_string(expected) + " slopes, got " +
                            std::to_string(mech.slopes.size()));
    for (double a : mech.slopes)
        if (!std::isfinite(a)) throw InvalidParams("selection slopes must be finite");

    Vector eta(pop.size(), 0.0);
    for (std::size_t i = 0; i < pop.size(); ++i) {
        double v = 0.0;
        for (std::size_t j = 0; j < covariates; ++j) v += mech.slopes[j] * pop.x(i, j + 1);
        if (mech.kind == MechanismKind::NMAR) {
            if (pop.y[i] < 0.0)
                throw InvalidParams("NMAR selection uses log(1 + y) and requires y >= 0");
            v += mech.slopes.back() * std::log1p(pop.y[i]);
        }
        eta[i] = v;
    }
    return eta;
}

namespace {

double mean_probability(double intercept, std::span<const double> eta) {
    double s = 0.0;
    for (double e : eta) s += logistic(intercept + e);
    return s / static_cast<double>(eta.size());
}

}  // namespace

double calibrate_intercept(const SelectionMechanism& mech, const Population& pop) {
    if (!(mech.target_rate > 0.0 && mech.target_rate < 1.0))
        throw InvalidParams("target rate must lie in (0, 1)");
    const Vector eta = selection_offsets(mech, pop);
    const double target = mech.target_rate;

    double lo = -50.0;
    double hi = 50.0;
    if (mean_probability(lo, eta) > target || mean_probability(hi, eta) < target)
        throw OutOfBracket("target selection rate unattainable with intercept in [-50, 50]");

    double mid = 0.0;
    for (int iter = 0; iter < 200; ++iter) {
        mid = 0.5 * (lo + hi);
        const double m = mean_probability(mid, eta);
        if (std::abs(m - target) <= 1e-10) break;
        if (m < target)
            lo = mid;
        else
            hi = mid;
        if (hi - lo <= 1e-15) break;
    }
    return mid;
}

SelectionMechanism calibrated(SelectionMechanism mech, const Population& pop) {
    mech.intercept = calibrate_intercept(mech, pop);
    return mech;
}

Vector selection_probabilities(const SelectionMechanism& mech, const Population& pop) {
    const double a0 = mech.intercept ? *mech.intercept : calibrate_intercept(mech, pop);
    Vector p = selection_offsets(mech, pop);
    for (double& v : p) v = logistic(a0 + v);
    return p;
}

Partition::Partition(std::vector<unsigned char> delta) : delta_(std::move(delta)) {
    for (std::size_t i = 0; i < delta_.size(); ++i) {
        if (delta_[i] > 1) throw InvalidParams("delta must be 0 or 1");
        (delta_[i] ? np_ : u1_).push_back(i);
    }
    if (np_.empty()) throw DegeneratePartition("non-probability sample is empty");
    if (u1_.empty()) throw DegeneratePartition("complement U1 is empty");
}

Partition draw_nonprob(std::span<const double> probabilities, RngStream& rng) {
    std::vector<unsigned char> delta(probabilities.size());
    for (std::size_t i = 0; i < probabilities.size(); ++i)
        delta[i] = rng.uniform() < probabilities[i] ? 1 : 0;
    return Partition(std::move(delta));
}

Partition draw_nonprob(const Population& pop, const SelectionMechanism& mech, RngStream& rng) {
    return draw_nonprob(selection_probabilities(mech, pop), rng);
}

LoadedPopulation load_population_csv(const std::string& path) {
    const csv::Table table = csv::read(path);
    const std::size_t id_col = table.require("id");
    const std::size_t y_col = table.require("y");
    const auto delta_col = table.find("delta");
    const auto pi_col = table.find("pi");
    const auto intercept_col = table.find("x0");

    // Covariates x1, x2, ... ordered by their index.
    std::map<int, std::size_t> covariates;
    for (std::size_t j = 0; j < table.header.size(); ++j) {
        const std::string& h = table.header[j];
        if (h.size() < 2 || h[0] != 'x') continue;
        if (!std::all_of(h.begin() + 1, h.end(), [](char c) { return c >= '0' && c <= '9'; })) continue;
        const int k = std::stoi(h.substr(1));
        if (k >= 1) covariates[k] = j;
    }

    const std::size_t n = table.rows.size();
    const std::size_t d = covariates.size() + 1;
    LoadedPopulation out;
    Population& pop = out.population;
    pop.x = Matrix(n, d);
    pop.y.resize(n);
    pop.ids.reserve(n);
    std::vector<unsigned char> delta;
    Vector pi;
    if (delta_col) delta.resize(n);
    if (pi_col) pi.resize(n);

    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = table.rows[i];
        const std::size_t r = i + 1;
        if (row[id_col].empty()) throw ParseError(r, id_col + 1, "missing id");
        pop.ids.push_back(row[id_col]);
        pop.y[i] = csv::parse_number(row[y_col], r, y_col + 1);
        pop.x(i, 0) = 1.0;
        if (intercept_col && csv::parse_number(row[*intercept_col], r, *intercept_col + 1) != 1.0)
            throw ParseError(r, *intercept_col + 1, "intercept column x0 must be 1");
        std::size_t j = 1;
        for (const auto& [k, col] : covariates) pop.x(i, j++) = csv::parse_number(row[col], r, col + 1);
        if (delta_col) {
            const double v = csv::parse_number(row[*delta_col], r, *delta_col + 1);
            if (v != 0.0 && v != 1.0) throw ParseError(r, *delta_col + 1, "delta must be 0 or 1");
            delta[i] = v == 1.0 ? 1 : 0;
        }
        if (pi_col) {
            const double v = csv::parse_number(row[*pi_col], r, *pi_col + 1);
            if (!(v > 0.0 && v <= 1.0)) throw ParseError(r, *pi_col + 1, "pi must lie in (0, 1]");
            pi[i] = v;
        }
    }
    pop.true_total = std::accumulate(pop.y.begin(), pop.y.end(), 0.0);
    if (delta_col) out.partition.emplace(std::move(delta));
    if (pi_col) out.pi = std::move(pi);
    return out;
}

void write_population_csv(const std::string& path, const Population& pop, const Partition* partition,
                          std::string_view comment) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    if (!comment.empty()) out << "# " << comment << '\n';
    out << "id";
    for (std::size_t j = 1; j < pop.dim(); ++j) out << ",x" << j;
    out << ",y";
    if (partition) out << ",delta";
    out << '\n';
    for (std::size_t i = 0; i < pop.size(); ++i) {
        out << pop.ids[i];
        for (std::size_t j = 1; j < pop.dim(); ++j) out << ',' << csv::format_double(pop.x(i, j));
        out << ',' << csv::format_double(pop.y[i]);
        if (partition) out << ',' << static_cast<int>(partition->delta()[i]);
        out << '\n';
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace seqdi
