#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "seqdi/design.hpp"
#include "seqdi/estimators.hpp"
#include "seqdi/population.hpp"

namespace seqdi {

enum class McMode { MAR, NMAR, FixedPartition };

std::string_view to_string(McMode mode);
McMode parse_mc_mode(std::string_view name);

// Every estimator tag the harness knows how to compute.
const std::vector<std::string>& sequential_estimators();
const std::vector<std::string>& competitor_estimators();
bool is_known_estimator(std::string_view tag);

struct McConfig {
    std::size_t replications = 5000;
    std::uint64_t seed = 20240901;
    McMode mechanism = McMode::MAR;
    double f_np = 0.70;
    double f_p = 0.40;
    std::vector<DesignKind> designs{DesignKind::Optimal, DesignKind::Equal, DesignKind::PPS};
    // Empty means every estimator valid for the mode.
    std::vector<std::string> estimators;
    double alpha = 0.05;
    double level = 0.95;
    PopulationParams population;
    // Empty means (2, -2) for MAR and (2, -2, 0.5) for NMAR.
    std::vector<double> selection_slopes;
    std::optional<std::string> population_csv;
    int fgls_iterations = 1;
    int fgls_p_iterations = 1;
    bool include_model_variance = false;
    double truncation_quantile = 0.999;
    unsigned threads = 1;
    bool progress = false;

    // Throws InvalidParams naming the offending field.
    void validate() const;
};

struct MetricRecord {
    double rb = 0.0;     // percent
    double rrmse = 0.0;  // percent
    std::optional<double> var_ratio;
    std::optional<double> coverage;
    double mean = 0.0;
    double mc_variance = 0.0;  // (R - 1) denominator
};

// RB, RRMSE, V-bar / V_MC and Wald coverage over replications. Throws
// DegenerateMetrics when variances are given with fewer than two points.
MetricRecord metrics(std::span<const double> points, const Vector* variances, double true_total,
                     double level = 0.95);

struct ReplicationSeries {
    std::string estimator;
    std::string design;  // empty for estimators not tied to a second-stage design
    Vector points;
    std::optional<Vector> variances;
};

struct SummaryRow {
    std::string estimator;
    std::string design;
    MetricRecord metrics;
};

struct TestSummaryRow {
    std::string design;
    std::size_t replications = 0;
    double alpha = 0.05;
    double reject_rate = 0.0;
    double mean_p = 0.0;
    double median_p = 0.0;
};

struct McSummary {
    std::string mechanism;
    std::uint64_t seed = 0;
    std::size_t replications = 0;
    double true_total = 0.0;
    double level = 0.95;
    std::vector<SummaryRow> rows;
    std::vector<TestSummaryRow> tests;
    std::vector<ReplicationSeries> series;

    const SummaryRow* find(std::string_view estimator, std::string_view design = "") const;
    const TestSummaryRow* find_test(std::string_view design) const;
};

// Generates (or loads) the population once and runs the replications.
McSummary run_mc(const McConfig& config);

// Runs on a given population. `fixed` must be set in FixedPartition mode:
// the pilot and designs are then built once and only S_p is redrawn.
McSummary run_mc(const McConfig& config, const Population& pop, const Partition* fixed = nullptr);

// Writes summary.csv, test_summary.csv, replications.csv and metadata.json
// into `out_dir` (created if needed). Throws IoError.
void emit_results(const McSummary& summary, const std::string& out_dir);

struct ReplicationFile {
    double true_total = 0.0;
    double level = 0.95;
    std::vector<ReplicationSeries> series;
};

ReplicationFile load_replications_csv(const std::string& path);

// Stream id reserved for population generation; replications use 0..R-1.
inline constexpr std::uint64_t kPopulationStream = ~std::uint64_t{0};

}  // namespace seqdi
