#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "seqdi/numerics.hpp"
#include "seqdi/rng.hpp"

namespace seqdi {

// Finite population frame. The first column of `x` is the intercept.
struct Population {
    std::vector<std::string> ids;
    Matrix x;
    Vector y;
    double true_total = 0.0;

    std::size_t size() const { return y.size(); }
    std::size_t dim() const { return x.cols(); }

    // Checks the frame invariants (intercept column, finite y, total); throws
    // InvalidParams.
    void validate() const;
};

// Scaled lognormal generator: mu = b0 + b1 x1 + b2 x2 + b3 x1 x2,
// y = mu * exp(eps) with eps ~ N(-sigma^2 / 2, sigma^2). The stored working
// covariates are (1, x1, x2); the interaction is left out on purpose.
struct PopulationParams {
    std::size_t size = 10000;
    std::array<double, 4> beta{10.0, 15.0, 10.0, 20.0};
    double sigma = 0.6;
};

Population generate_population(const PopulationParams& params, RngStream& rng);

enum class MechanismKind { MAR, NMAR };

// Logistic selection into the non-probability sample. MAR uses
// alpha0 + alpha1 x1 + alpha2 x2; NMAR adds alpha3 log(1 + y).
struct SelectionMechanism {
    MechanismKind kind = MechanismKind::MAR;
    std::vector<double> slopes{2.0, -2.0};
    std::optional<double> intercept;
    double target_rate = 0.70;
};

// Per-unit linear predictor without the intercept.
Vector selection_offsets(const SelectionMechanism& mech, const Population& pop);

// Bisection over [-50, 50] for the intercept giving mean selection
// probability equal to target_rate. Throws OutOfBracket / InvalidParams.
double calibrate_intercept(const SelectionMechanism& mech, const Population& pop);

// Returns a copy of `mech` with its intercept set by calibrate_intercept.
SelectionMechanism calibrated(SelectionMechanism mech, const Population& pop);

Vector selection_probabilities(const SelectionMechanism& mech, const Population& pop);

// Membership of the certainty stratum S_np; U1 is the complement.
class Partition {
public:
    // Throws DegeneratePartition when either side is empty.
    explicit Partition(std::vector<unsigned char> delta);

    const std::vector<unsigned char>& delta() const { return delta_; }
    const std::vector<std::size_t>& np_indices() const { return np_; }
    const std::vector<std::size_t>& u1_indices() const { return u1_; }
    std::size_t n_np() const { return np_.size(); }
    std::size_t n1() const { return u1_.size(); }
    std::size_t size() const { return delta_.size(); }

private:
    std::vector<unsigned char> delta_;
    std::vector<std::size_t> np_;
    std::vector<std::size_t> u1_;
};

// Independent Bernoulli(p_i) selection with the mechanism's intercept
// (calibrating it first when absent).
Partition draw_nonprob(const Population& pop, const SelectionMechanism& mech, RngStream& rng);
Partition draw_nonprob(std::span<const double> probabilities, RngStream& rng);

struct LoadedPopulation {
    Population population;
    std::optional<Partition> partition;
    // Realised inclusion probabilities when the file carries a `pi` column.
    std::optional<Vector> pi;
};

// Reads `id`, `y`, covariates `x1`, `x2`, ... (optionally `x0` as an explicit
// intercept), optional `delta` and `pi`. Throws ParseError / MissingColumn.
LoadedPopulation load_population_csv(const std::string& path);

void write_population_csv(const std::string& path, const Population& pop,
                          const Partition* partition = nullptr, std::string_view comment = {});

}  // namespace seqdi
