#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "seqdi/numerics.hpp"
#include "seqdi/pilot.hpp"
#include "seqdi/rng.hpp"

namespace seqdi {

// Lower bound on every second-stage inclusion probability, whatever the
// design kind.
inline constexpr double kMinInclusionProbability = 0.01;

enum class DesignKind { Optimal, Equal, PPS };

std::string_view to_string(DesignKind kind);
// Accepts "optimal", "equal", "pps" (case-insensitive); throws std::invalid_argument.
DesignKind parse_design_kind(std::string_view name);

// Poisson design over U1. `indices` are population row indices, aligned
// with `pi`. Joint inclusion probabilities are pi_i * pi_j by construction
// and never stored.
struct SecondStageDesign {
    std::vector<std::size_t> indices;
    Vector pi;
    DesignKind kind = DesignKind::Equal;
    double expected_size = 0.0;
};

struct DrawnSample {
    std::vector<std::size_t> members;    // population row indices
    std::vector<std::size_t> positions;  // positions within the design
    Vector pi;

    std::size_t size() const { return members.size(); }
};

// Probabilities proportional to `sizes`, summing to n_p, with values above
// one capped at one and values below the floor raised to it; the free units
// are rescaled after each pass until nothing is violated.
// Throws Infeasible / NonpositiveSize.
Vector proportional_probabilities(std::span<const double> sizes, double n_p,
                                  double floor = kMinInclusionProbability);

// pi_i proportional to the predicted standard deviation on U1.
SecondStageDesign optimal_probabilities(const PilotVarianceModel& model, const Matrix& x_u1, double n_p,
                                        std::vector<std::size_t> indices = {});

SecondStageDesign equal_probabilities(std::size_t n1, double n_p, std::vector<std::size_t> indices = {});

SecondStageDesign pps_probabilities(std::span<const double> size_var, double n_p,
                                    std::vector<std::size_t> indices = {},
                                    double floor = kMinInclusionProbability);

// Independent Bernoulli(pi_i) inclusion. Throws EmptySample when nothing is
// selected.
DrawnSample poisson_draw(const SecondStageDesign& design, RngStream& rng);

// Redraws on an empty realisation, up to `max_attempts` draws in total.
DrawnSample poisson_draw_nonempty(const SecondStageDesign& design, RngStream& rng, int max_attempts = 20);

// id,pi,kind rows for audit or production draws.
void write_design_csv(const std::string& path, const SecondStageDesign& design,
                      const std::vector<std::string>& ids, std::string_view comment = {});

}  // namespace seqdi
