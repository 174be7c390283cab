#include "seqdi/design.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "seqdi/csv.hpp"
#include "seqdi/errors.hpp"

namespace seqdi {

std::string_view to_string(DesignKind kind) {
    switch (kind) {
        case DesignKind::Optimal: return "optimal";
        case DesignKind::Equal: return "equal";
        case DesignKind::PPS: return "pps";
    }
    return "unknown";
}

DesignKind parse_design_kind(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "optimal") return DesignKind::Optimal;
    if (lower == "equal") return DesignKind::Equal;
    if (lower == "pps") return DesignKind::PPS;
    throw std::invalid_argument("unknown design kind '" + std::string(name) + "'");
}

namespace {

void check_feasible(std::size_t n1, double n_p, double floor) {
    if (!(n_p >= 1.0)) throw Infeasible("expected sample size must be at least 1");
    if (n_p > static_cast<double>(n1))
        throw Infeasible("expected sample size " + csv::format_double(n_p) + " exceeds N1 = " +
                         std::to_string(n1));
    if (floor * static_cast<double>(n1) > n_p * (1.0 + 1e-12))
        throw Infeasible("probability floor " + csv::format_double(floor) + " over N1 = " + std::to_string(n1) +
                         " units exceeds the expected sample size");
}

std::vector<std::size_t> default_indices(std::vector<std::size_t> indices, std::size_t n) {
    if (indices.empty()) {
        indices.resize(n);
        std::iota(indices.begin(), indices.end(), std::size_t{0});
    }
    if (indices.size() != n) throw std::invalid_argument("design indices do not match unit count");
    return indices;
}

}  // namespace

Vector proportional_probabilities(std::span<const double> sizes, double n_p, double floor) {
    const std::size_t n = sizes.size();
    for (double s : sizes)
        if (!(s > 0.0) || !std::isfinite(s)) throw NonpositiveSize("size measures must be positive and finite");
    check_feasible(n, n_p, floor);

    enum class State : unsigned char { Free, Capped, Floored };
    std::vector<State> state(n, State::Free);
    Vector pi(n, 0.0);
    std::size_t capped = 0;
    std::size_t floored = 0;

    for (std::size_t pass = 0; pass <= n; ++pass) {
        const double free_mass =
            n_p - static_cast<double>(capped) - floor * static_cast<double>(floored);
        double free_size = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (state[i] == State::Free) free_size += sizes[i];
        if (free_size == 0.0) break;
        const double scale = free_mass / free_size;
        for (std::size_t i = 0; i < n; ++i)
            if (state[i] == State::Free) pi[i] = sizes[i] * scale;

        bool changed = false;
        for (std::size_t i = 0; i < n; ++i)
            if (state[i] == State::Free && pi[i] > 1.0) {
                state[i] = State::Capped;
                ++capped;
                changed = true;
            }
        if (changed) continue;
        // Once flooring starts the free scale only shrinks, so no new caps.
        for (std::size_t i = 0; i < n; ++i)
            if (state[i] == State::Free && pi[i] < floor) {
                state[i] = State::Floored;
                ++floored;
                changed = true;
            }
        if (!changed) break;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (state[i] == State::Capped) pi[i] = 1.0;
        if (state[i] == State::Floored) pi[i] = floor;
    }
    return pi;
}

SecondStageDesign optimal_probabilities(const PilotVarianceModel& model, const Matrix& x_u1, double n_p,
                                        std::vector<std::size_t> indices) {
    Vector sd(x_u1.rows());
    for (std::size_t i = 0; i < x_u1.rows(); ++i) sd[i] = std::sqrt(predict_sigma2(model, x_u1.row(i)));
    SecondStageDesign design;
    design.indices = default_indices(std::move(indices), x_u1.rows());
    design.pi = proportional_probabilities(sd, n_p);
    design.kind = DesignKind::Optimal;
    design.expected_size = n_p;
    return design;
}

SecondStageDesign equal_probabilities(std::size_t n1, double n_p, std::vector<std::size_t> indices) {
    check_feasible(n1, n_p, kMinInclusionProbability);
    SecondStageDesign design;
    design.indices = default_indices(std::move(indices), n1);
    design.pi.assign(n1, n_p / static_cast<double>(n1));
    design.kind = DesignKind::Equal;
    design.expected_size = n_p;
    return design;
}

SecondStageDesign pps_probabilities(std::span<const double> size_var, double n_p,
                                    std::vector<std::size_t> indices, double floor) {
    SecondStageDesign design;
    design.pi = proportional_probabilities(size_var, n_p, floor);
    design.indices = default_indices(std::move(indices), size_var.size());
    design.kind = DesignKind::PPS;
    design.expected_size = n_p;
    return design;
}

DrawnSample poisson_draw(const SecondStageDesign& design, RngStream& rng) {
    DrawnSample sample;
    for (std::size_t k = 0; k < design.pi.size(); ++k) {
        if (rng.uniform() < design.pi[k]) {
            sample.members.push_back(design.indices[k]);
            sample.positions.push_back(k);
            sample.pi.push_back(design.pi[k]);
        }
    }
    if (sample.members.empty()) throw EmptySample("Poisson draw selected no units");
    return sample;
}

DrawnSample poisson_draw_nonempty(const SecondStageDesign& design, RngStream& rng, int max_attempts) {
    for (int attempt = 1;; ++attempt) {
        try {
            return poisson_draw(design, rng);
        } catch (const EmptySample&) {
            if (attempt >= max_attempts)
                throw EmptySample("Poisson draw empty after " + std::to_string(max_attempts) + " attempts");
        }
    }
}

void write_design_csv(const std::string& path, const SecondStageDesign& design,
                      const std::vector<std::string>& ids, std::string_view comment) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    if (!comment.empty()) out << "# " << comment << '\n';
    out << "id,pi,kind\n";
    for (std::size_t k = 0; k < design.pi.size(); ++k)
        out << ids.at(design.indices[k]) << ',' << csv::format_double(design.pi[k]) << ','
            << to_string(design.kind) << '\n';
    if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace seqdi
