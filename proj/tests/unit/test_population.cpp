#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>

#include "seqdi/errors.hpp"
#include "seqdi/population.hpp"

using namespace seqdi;
namespace fs = std::filesystem;

namespace {

std::string write_temp(const std::string& name, const std::string& body) {
    const fs::path p = fs::temp_directory_path() / ("seqdi_unit_" + name);
    std::ofstream(p) << body;
    return p.string();
}

}  // namespace

TEST_CASE("generate_population") {
    PopulationParams params;
    params.size = 2000;
    RngStream rng(5, 0);
    const Population pop = generate_population(params, rng);
    CHECK(pop.size() == 2000);
    CHECK(pop.dim() == 3);
    CHECK(pop.true_total == doctest::Approx(std::accumulate(pop.y.begin(), pop.y.end(), 0.0)));
    for (std::size_t i = 0; i < pop.size(); ++i) {
        CHECK_UNARY(pop.x(i, 0) == 1.0);
        CHECK_UNARY(pop.y[i] > 0.0);
    }
    CHECK_NOTHROW(pop.validate());
}

TEST_CASE("generate_population degenerates to the mean as sigma -> 0") {
    PopulationParams params;
    params.size = 500;
    params.sigma = 1e-8;
    RngStream rng(6, 0);
    const Population pop = generate_population(params, rng);
    double ratio = 0.0;
    for (std::size_t i = 0; i < pop.size(); ++i) {
        const double x1 = pop.x(i, 1), x2 = pop.x(i, 2);
        ratio += pop.y[i] / (10.0 + 15.0 * x1 + 10.0 * x2 + 20.0 * x1 * x2);
    }
    CHECK(ratio / 500.0 == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("generate_population lognormal moments") {
    PopulationParams params;
    params.size = 100000;
    RngStream rng(8, 0);
    const Population pop = generate_population(params, rng);
    double r1 = 0.0, r2 = 0.0;
    for (std::size_t i = 0; i < pop.size(); ++i) {
        const double x1 = pop.x(i, 1), x2 = pop.x(i, 2);
        const double r = pop.y[i] / (10.0 + 15.0 * x1 + 10.0 * x2 + 20.0 * x1 * x2);
        r1 += r;
        r2 += (r - 1.0) * (r - 1.0);
    }
    CHECK(std::abs(r1 / 1e5 - 1.0) < 0.01);
    CHECK(std::abs(r2 / 1e5 - (std::exp(0.36) - 1.0)) < 0.05);
}

TEST_CASE("calibrate_intercept") {
    PopulationParams params;
    params.size = 1000;
    RngStream rng(9, 0);
    const Population pop = generate_population(params, rng);
    SelectionMechanism flat;
    flat.slopes = {0.0, 0.0};
    flat.target_rate = 0.5;
    CHECK(std::abs(calibrate_intercept(flat, pop)) < 1e-9);
    flat.target_rate = 0.7;
    CHECK(calibrate_intercept(flat, pop) == doctest::Approx(std::log(7.0 / 3.0)).epsilon(1e-9));

    SelectionMechanism mar;
    const Vector p = selection_probabilities(calibrated(mar, pop), pop);
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) / 1000.0 == doctest::Approx(0.7).epsilon(1e-9));
}

TEST_CASE("draw_nonprob") {
    PopulationParams params;
    params.size = 10000;
    RngStream rng(10, 0);
    const Population pop = generate_population(params, rng);
    SelectionMechanism flat;
    flat.slopes = {0.0, 0.0};
    const Partition part = draw_nonprob(pop, flat, rng);
    CHECK(part.n_np() + part.n1() == 10000);
    CHECK(std::abs(static_cast<double>(part.n_np()) - 7000.0) <= 150.0);

    CHECK_THROWS_AS(draw_nonprob(Vector(20, 1.0 - 1e-15), rng), DegeneratePartition);
}

TEST_CASE("NMAR selection favours large outcomes") {
    PopulationParams params;
    params.size = 5000;
    RngStream rng(12, 0);
    const Population pop = generate_population(params, rng);
    SelectionMechanism nmar;
    nmar.kind = MechanismKind::NMAR;
    nmar.slopes = {2.0, -2.0, 0.5};
    const SelectionMechanism m = calibrated(nmar, pop);
    int wins = 0;
    for (int r = 0; r < 100; ++r) {
        const Partition part = draw_nonprob(pop, m, rng);
        double a = 0.0, b = 0.0;
        for (std::size_t i : part.np_indices()) a += pop.y[i];
        for (std::size_t i : part.u1_indices()) b += pop.y[i];
        wins += a / part.n_np() > b / part.n1();
    }
    CHECK(wins >= 99);
}

TEST_CASE("NMAR offsets reject y <= -1") {
    Population pop;
    pop.ids = {"1", "2"};
    pop.x = Matrix::from_rows({{1, 0.2, 0.3}, {1, 0.4, 0.5}});
    pop.y = {3.0, -2.0};
    pop.true_total = 1.0;
    SelectionMechanism nmar;
    nmar.kind = MechanismKind::NMAR;
    nmar.slopes = {2.0, -2.0, 0.5};
    CHECK_THROWS_AS(selection_offsets(nmar, pop), InvalidParams);
}

TEST_CASE("load_population_csv parses a small stratified file") {
    const auto path = write_temp("pop3.csv", "id,x1,y,delta\n1,0.5,2,1\n2,0.3,1,0\n3,0.9,4,0\n");
    const LoadedPopulation lp = load_population_csv(path);
    CHECK(lp.population.size() == 3);
    CHECK(lp.population.dim() == 2);
    REQUIRE(lp.partition.has_value());
    CHECK(lp.partition->n_np() == 1);
    CHECK(lp.partition->n1() == 2);
    CHECK(lp.population.true_total == doctest::Approx(7.0));
    CHECK_FALSE(lp.pi.has_value());
}

TEST_CASE("load_population_csv reports the malformed row") {
    const auto path = write_temp("bad.csv", "id,x1,y\n1,0.5,2\n2,0.3,abc\n");
    try {
        load_population_csv(path);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.row() == 2);
        CHECK(e.column() == 3);
    }
}

TEST_CASE("load_population_csv without delta has no partition") {
    const auto path = write_temp("nodelta.csv", "id,x1,x2,y\na,0.1,0.2,3\nb,0.4,0.3,5\n");
    const LoadedPopulation lp = load_population_csv(path);
    CHECK(lp.population.size() == 2);
    CHECK_FALSE(lp.partition.has_value());
}

TEST_CASE("load_population_csv requires y") {
    const auto path = write_temp("noy.csv", "id,x1\n1,0.5\n");
    CHECK_THROWS_AS(load_population_csv(path), MissingColumn);
}

TEST_CASE("population CSV round trip") {
    PopulationParams params;
    params.size = 50;
    RngStream rng(13, 0);
    const Population pop = generate_population(params, rng);
    const Partition part = draw_nonprob(pop, SelectionMechanism{}, rng);
    const auto path = (fs::temp_directory_path() / "seqdi_unit_roundtrip.csv").string();
    write_population_csv(path, pop, &part, "seed=13");
    const LoadedPopulation lp = load_population_csv(path);
    CHECK(lp.population.ids == pop.ids);
    CHECK(lp.population.x == pop.x);
    CHECK(lp.population.y == pop.y);
    REQUIRE(lp.partition.has_value());
    CHECK(lp.partition->delta() == part.delta());
}
