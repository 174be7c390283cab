#include "seqdi/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "seqdi/csv.hpp"
#include "seqdi/errors.hpp"
#include "seqdi/homogeneity.hpp"
#include "seqdi/pilot.hpp"

namespace seqdi {

std::string_view to_string(McMode mode) {
    switch (mode) {
        case McMode::MAR: return "MAR";
        case McMode::NMAR: return "NMAR";
        case McMode::FixedPartition: return "FixedPartition";
    }
    return "unknown";
}

McMode parse_mc_mode(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "mar") return McMode::MAR;
    if (lower == "nmar") return McMode::NMAR;
    if (lower == "fixedpartition" || lower == "fixed") return McMode::FixedPartition;
    throw std::invalid_argument("unknown mechanism '" + std::string(name) +
                                "' (expected MAR, NMAR or FixedPartition)");
}

const std::vector<std::string>& sequential_estimators() {
    static const std::vector<std::string> v{tags::DI,         tags::HTseq,       tags::SepDIb,
                                            tags::SepDIsigma, tags::ComDIsigma, tags::AdDIsigma};
    return v;
}

const std::vector<std::string>& competitor_estimators() {
    static const std::vector<std::string> v{tags::GREG, tags::IPW, tags::DR, tags::Fusion};
    return v;
}

bool is_known_estimator(std::string_view tag) {
    const auto has = [&](const std::vector<std::string>& v) {
        return std::find(v.begin(), v.end(), tag) != v.end();
    };
    return has(sequential_estimators()) || has(competitor_estimators());
}

void McConfig::validate() const {
    if (replications < 1) throw InvalidParams("replications: must be at least 1");
    if (!(f_np > 0.0 && f_np < 1.0)) throw InvalidParams("f_np: must lie in (0, 1)");
    if (!(f_p > 0.0 && f_p <= 1.0)) throw InvalidParams("f_p: must lie in (0, 1]");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidParams("alpha: must lie in (0, 1)");
    if (!(level > 0.0 && level < 1.0)) throw InvalidParams("level: must lie in (0, 1)");
    if (!(truncation_quantile > 0.0 && truncation_quantile <= 1.0))
        throw InvalidParams("truncation_quantile: must lie in (0, 1]");
    if (fgls_iterations < 0) throw InvalidParams("fgls_iterations: must be nonnegative");
    if (fgls_p_iterations < 0) throw InvalidParams("fgls_p_iterations: must be nonnegative");
    for (const auto& e : estimators)
        if (!is_known_estimator(e)) throw InvalidParams("estimators: unknown estimator '" + e + "'");
}

MetricRecord metrics(std::span<const double> points, const Vector* variances, double true_total,
                     double level) {
    const std::size_t r = points.size();
    if (r == 0) throw DegenerateMetrics("no replications");
    if (true_total == 0.0) throw DegenerateMetrics("true total is zero; relative metrics undefined");
    if (variances && r < 2) throw DegenerateMetrics("variance-based metrics need at least two replications");

    MetricRecord m;
    double sum = 0.0;
    double sq_err = 0.0;
    for (double p : points) {
        sum += p;
        sq_err += (p - true_total) * (p - true_total);
    }
    m.mean = sum / static_cast<double>(r);
    m.rb = 100.0 * (m.mean - true_total) / true_total;
    m.rrmse = 100.0 * std::sqrt(sq_err / static_cast<double>(r)) / std::abs(true_total);
    if (r >= 2) {
        double ss = 0.0;
        for (double p : points) ss += (p - m.mean) * (p - m.mean);
        m.mc_variance = ss / static_cast<double>(r - 1);
    }
    if (variances) {
        const double z = normal_quantile(0.5 * (1.0 + level));
        double vbar = 0.0;
        std::size_t covered = 0;
        for (std::size_t i = 0; i < r; ++i) {
            const double v = (*variances)[i];
            vbar += v;
            if (std::abs(points[i] - true_total) <= z * std::sqrt(std::max(v, 0.0))) ++covered;
        }
        vbar /= static_cast<double>(r);
        if (m.mc_variance > 0.0) m.var_ratio = vbar / m.mc_variance;
        m.coverage = static_cast<double>(covered) / static_cast<double>(r);
    }
    return m;
}

const SummaryRow* McSummary::find(std::string_view estimator, std::string_view design) const {
    for (const auto& row : rows)
        if (row.estimator == estimator && row.design == design) return &row;
    return nullptr;
}

const TestSummaryRow* McSummary::find_test(std::string_view design) const {
    for (const auto& t : tests)
        if (t.design == design) return &t;
    return nullptr;
}

namespace {

// Everything that is fixed once S_np is known.
struct StageOne {
    Matrix x_np;
    Vector y_np;
    double np_total = 0.0;
    Vector x_u1_total;
    double n1 = 0.0;
    std::size_t n_np = 0;
    PilotVarianceModel pilot;
    CoefficientFit np_fit;
    std::vector<SecondStageDesign> designs;
};

StageOne build_stage_one(const Population& pop, const Partition& part, const McConfig& cfg) {
    StageOne st;
    const auto& np = part.np_indices();
    const auto& u1 = part.u1_indices();
    st.x_np = pop.x.select_rows(np);
    st.y_np = gather(pop.y, np);
    st.np_total = std::accumulate(st.y_np.begin(), st.y_np.end(), 0.0);
    st.n1 = static_cast<double>(u1.size());
    st.n_np = np.size();
    const Matrix x_u1 = pop.x.select_rows(u1);
    st.x_u1_total = column_totals(x_u1);

    st.pilot = fit_pilot(st.x_np, st.y_np, cfg.fgls_iterations);
    st.np_fit = fgls_np(st.x_np, st.y_np, st.pilot);

    const double n_p = std::floor(cfg.f_p * st.n1);
    for (DesignKind kind : cfg.designs) {
        switch (kind) {
            case DesignKind::Optimal:
                st.designs.push_back(optimal_probabilities(st.pilot, x_u1, n_p, u1));
                break;
            case DesignKind::Equal:
                st.designs.push_back(equal_probabilities(u1.size(), n_p, u1));
                break;
            case DesignKind::PPS: {
                if (pop.dim() < 2) throw InvalidParams("PPS design needs a size covariate x1");
                st.designs.push_back(pps_probabilities(x_u1.column(1), n_p, u1));
                break;
            }
        }
    }
    return st;
}

struct Cell {
    std::string estimator;
    int design = -1;  // index into config designs, -1 for none
    bool has_variance = true;
};

struct Propensity {
    double ipw = 0.0;
    double dr = 0.0;
};

Propensity propensity_estimates(const Population& pop, const Partition& part) {
    const Vector alpha = logistic_fit(pop.x, part.delta());
    const Vector p = fitted_propensities(pop, alpha);
    return {y_ipw(pop, part, p).point, y_dr(pop, part, p).point};
}

bool wants(const std::vector<std::string>& list, std::string_view tag) {
    return std::find(list.begin(), list.end(), tag) != list.end();
}

}  // namespace

McSummary run_mc(const McConfig& cfg, const Population& pop, const Partition* fixed) {
    cfg.validate();
    const bool fixed_mode = cfg.mechanism == McMode::FixedPartition;
    if (fixed_mode && fixed == nullptr) throw InvalidParams("mechanism: FixedPartition needs a partition");
    const std::size_t R = cfg.replications;

    // Resolve the estimator list; estimators that depend only on S_np carry
    // no Monte Carlo variability in the fixed-partition setting.
    std::vector<std::string> wanted = cfg.estimators;
    if (wanted.empty()) {
        wanted = sequential_estimators();
        for (const auto& c : competitor_estimators()) wanted.push_back(c);
    }
    if (fixed_mode)
        wanted.erase(std::remove_if(wanted.begin(), wanted.end(),
                                    [](const std::string& t) { return t == tags::IPW || t == tags::DR; }),
                     wanted.end());

    std::vector<Cell> cells;
    for (std::size_t k = 0; k < cfg.designs.size(); ++k)
        for (const auto& t : sequential_estimators())
            if (wants(wanted, t)) cells.push_back({t, static_cast<int>(k), true});
    for (const auto& t : competitor_estimators())
        if (wants(wanted, t)) cells.push_back({t, -1, t == tags::GREG});
    auto cell_index = [&](std::string_view tag, int design) -> int {
        for (std::size_t c = 0; c < cells.size(); ++c)
            if (cells[c].estimator == tag && cells[c].design == design) return static_cast<int>(c);
        return -1;
    };

    const bool need_greg = wants(wanted, tags::GREG) || wants(wanted, tags::Fusion);
    const bool need_prop = wants(wanted, tags::IPW) || wants(wanted, tags::DR) || wants(wanted, tags::Fusion);

    std::vector<Vector> points(cells.size(), Vector(R, 0.0));
    std::vector<Vector> variances(cells.size(), Vector(R, 0.0));
    std::vector<Vector> p_values(cfg.designs.size(), Vector(R, 1.0));
    std::vector<std::vector<unsigned char>> rejects(cfg.designs.size(), std::vector<unsigned char>(R, 0));
    std::vector<std::string> failures(R);

    // Selection probabilities are fixed with the population.
    Vector selection;
    if (!fixed_mode) {
        SelectionMechanism mech;
        mech.kind = cfg.mechanism == McMode::NMAR ? MechanismKind::NMAR : MechanismKind::MAR;
        mech.slopes = cfg.selection_slopes;
        if (mech.slopes.empty())
            mech.slopes = mech.kind == MechanismKind::MAR ? std::vector<double>{2.0, -2.0}
                                                          : std::vector<double>{2.0, -2.0, 0.5};
        mech.target_rate = cfg.f_np;
        selection = selection_probabilities(calibrated(mech, pop), pop);
    }

    std::optional<StageOne> shared;
    Propensity shared_prop;
    if (fixed_mode) {
        shared = build_stage_one(pop, *fixed, cfg);
        if (need_prop) shared_prop = propensity_estimates(pop, *fixed);
    }

    const Vector x_u_total = column_totals(pop.x);
    const double n_ind = std::floor(cfg.f_p * (1.0 - cfg.f_np) * static_cast<double>(pop.size()));
    std::optional<SecondStageDesign> ind_design;
    if (need_greg) ind_design = equal_probabilities(pop.size(), n_ind);

    const WeightSpec w_b{WeightKind::InversePi, cfg.truncation_quantile};
    const WeightSpec w_sigma{WeightKind::InversePiSigma, cfg.truncation_quantile};

    auto run_one = [&](std::size_t r) {
        RngStream rng(cfg.seed, r);
        std::optional<Partition> drawn;
        std::optional<StageOne> local;
        if (!fixed_mode) {
            drawn.emplace(draw_nonprob(selection, rng));
            local = build_stage_one(pop, *drawn, cfg);
        }
        const Partition& part = fixed_mode ? *fixed : *drawn;
        const StageOne& st = fixed_mode ? *shared : *local;

        auto store = [&](std::string_view tag, int design, const Estimate& e) {
            const int c = cell_index(tag, design);
            if (c < 0) return;
            points[c][r] = e.point;
            variances[c][r] = e.variance.value_or(0.0);
        };

        for (std::size_t k = 0; k < st.designs.size(); ++k) {
            const int dk = static_cast<int>(k);
            const DrawnSample sample = poisson_draw_nonempty(st.designs[k], rng);
            const SampleData s = gather_sample(pop, sample);
            if (cell_index(tags::DI, dk) >= 0) store(tags::DI, dk, y_di(st.np_total, s, st.n1, cfg.level));
            if (cell_index(tags::HTseq, dk) >= 0) store(tags::HTseq, dk, y_ht_seq(st.np_total, s, cfg.level));
            if (cell_index(tags::SepDIb, dk) >= 0)
                store(tags::SepDIb, dk, y_sep_di(st.np_total, s, st.x_u1_total, w_b, &st.pilot, cfg.level));
            const Estimate sep =
                y_sep_di(st.np_total, s, st.x_u1_total, w_sigma, &st.pilot, cfg.level);
            store(tags::SepDIsigma, dk, sep);
            const bool need_com = cell_index(tags::ComDIsigma, dk) >= 0 || cell_index(tags::AdDIsigma, dk) >= 0;
            std::optional<Estimate> com;
            if (need_com) {
                com = y_com_di(st.x_np, st.y_np, s, st.x_u1_total, w_sigma, &st.pilot, cfg.level);
                store(tags::ComDIsigma, dk, *com);
            }
            const HomogeneityResult test =
                homogeneity_test(st.np_fit, fgls_p(s, cfg.fgls_p_iterations), cfg.alpha, cfg.include_model_variance);
            p_values[k][r] = test.p_value;
            rejects[k][r] = test.reject ? 1 : 0;
            if (com) store(tags::AdDIsigma, dk, adaptive_estimate(sep, *com, test));
        }

        std::optional<Estimate> greg;
        std::size_t ind_size = 0;
        if (need_greg) {
            const DrawnSample ind = poisson_draw_nonempty(*ind_design, rng);
            ind_size = ind.size();
            greg = y_greg_independent(x_u_total, gather_sample(pop, ind), cfg.level);
            store(tags::GREG, -1, *greg);
        }
        if (need_prop) {
            const Propensity pr = fixed_mode ? shared_prop : propensity_estimates(pop, part);
            store(tags::IPW, -1, make_estimate(tags::IPW, pr.ipw, std::nullopt));
            store(tags::DR, -1, make_estimate(tags::DR, pr.dr, std::nullopt));
            if (greg) {
                const double a = static_cast<double>(ind_size) / static_cast<double>(ind_size + part.n_np());
                store(tags::Fusion, -1, y_fusion(*greg, make_estimate(tags::DR, pr.dr, std::nullopt), a));
            }
        }
    };

    unsigned threads = std::max(1u, cfg.threads);
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, R));
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    std::mutex progress_mutex;
    auto worker = [&]() {
        while (true) {
            const std::size_t r = next.fetch_add(1);
            if (r >= R) break;
            try {
                run_one(r);
            } catch (const std::exception& e) {
                failures[r] = e.what();
            }
            const std::size_t finished = done.fetch_add(1) + 1;
            if (cfg.progress && (finished % std::max<std::size_t>(1, R / 10) == 0 || finished == R)) {
                std::lock_guard<std::mutex> lock(progress_mutex);
                std::cerr << "[" << to_string(cfg.mechanism) << "] " << finished << "/" << R
                          << " replications\n";
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (std::size_t r = 0; r < R; ++r)
        if (!failures[r].empty())
            throw Error("replication " + std::to_string(r) + " failed: " + failures[r]);

    McSummary summary;
    summary.mechanism = std::string(to_string(cfg.mechanism));
    summary.seed = cfg.seed;
    summary.replications = R;
    summary.true_total = pop.true_total;
    summary.level = cfg.level;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        ReplicationSeries s;
        s.estimator = cells[c].estimator;
        s.design = cells[c].design >= 0 ? std::string(to_string(cfg.designs[cells[c].design])) : "";
        s.points = std::move(points[c]);
        if (cells[c].has_variance) s.variances = std::move(variances[c]);
        const Vector* v = (s.variances && R >= 2) ? &*s.variances : nullptr;
        summary.rows.push_back({s.estimator, s.design, metrics(s.points, v, pop.true_total, cfg.level)});
        summary.series.push_back(std::move(s));
    }
    for (std::size_t k = 0; k < cfg.designs.size(); ++k) {
        TestSummaryRow t;
        t.design = std::string(to_string(cfg.designs[k]));
        t.replications = R;
        t.alpha = cfg.alpha;
        const double rej = std::accumulate(rejects[k].begin(), rejects[k].end(), 0.0);
        t.reject_rate = rej / static_cast<double>(R);
        t.mean_p = std::accumulate(p_values[k].begin(), p_values[k].end(), 0.0) / static_cast<double>(R);
        t.median_p = empirical_quantile(p_values[k], 0.5);
        summary.tests.push_back(t);
    }
    return summary;
}

McSummary run_mc(const McConfig& cfg) {
    cfg.validate();
    Population pop;
    std::optional<Partition> partition;
    if (cfg.population_csv) {
        LoadedPopulation loaded = load_population_csv(*cfg.population_csv);
        pop = std::move(loaded.population);
        partition = std::move(loaded.partition);
    } else {
        RngStream rng(cfg.seed, kPopulationStream);
        pop = generate_population(cfg.population, rng);
    }
    if (cfg.mechanism == McMode::FixedPartition && !partition) {
        // No realised S_np supplied: draw one MAR partition and hold it.
        SelectionMechanism mech;
        mech.slopes = cfg.selection_slopes.empty() ? std::vector<double>{2.0, -2.0} : cfg.selection_slopes;
        mech.target_rate = cfg.f_np;
        RngStream rng(cfg.seed, kPopulationStream - 1);
        partition = draw_nonprob(pop, calibrated(mech, pop), rng);
    }
    return run_mc(cfg, pop, partition ? &*partition : nullptr);
}

namespace {

std::string optional_number(const std::optional<double>& v) {
    return v ? csv::format_double(*v) : std::string();
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    return out;
}

void write_provenance(std::ostream& out, const McSummary& s) {
    out << "# seed=" << s.seed << "\n# mechanism=" << s.mechanism << "\n# replications=" << s.replications
        << "\n# true_total=" << csv::format_double(s.true_total) << "\n# level=" << csv::format_double(s.level)
        << '\n';
}

}  // namespace

void emit_results(const McSummary& s, const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create '" + out_dir + "': " + ec.message());
    const fs::path dir(out_dir);

    {
        auto out = open_output(dir / "summary.csv");
        write_provenance(out, s);
        out << "Estimator,Design,RB,RRMSE,VarRatio,Coverage\n";
        for (const auto& row : s.rows)
            out << row.estimator << ',' << row.design << ',' << csv::format_double(row.metrics.rb) << ','
                << csv::format_double(row.metrics.rrmse) << ',' << optional_number(row.metrics.var_ratio) << ','
                << optional_number(row.metrics.coverage) << '\n';
        if (!out) throw IoError("failed writing summary.csv");
    }
    {
        auto out = open_output(dir / "test_summary.csv");
        write_provenance(out, s);
        out << "Mechanism,Design,R,alpha,reject_rate,mean_p,median_p\n";
        for (const auto& t : s.tests)
            out << s.mechanism << ',' << t.design << ',' << t.replications << ',' << csv::format_double(t.alpha)
                << ',' << csv::format_double(t.reject_rate) << ',' << csv::format_double(t.mean_p) << ','
                << csv::format_double(t.median_p) << '\n';
        if (!out) throw IoError("failed writing test_summary.csv");
    }
    {
        auto out = open_output(dir / "replications.csv");
        write_provenance(out, s);
        out << "# boxplot_abs_re_quantiles=0.999,0.99 (display limits only; data untruncated)\n";
        out << "replication,Estimator,Design,point,variance,RE\n";
        for (const auto& series : s.series)
            for (std::size_t r = 0; r < series.points.size(); ++r) {
                const double p = series.points[r];
                out << r << ',' << series.estimator << ',' << series.design << ',' << csv::format_double(p) << ','
                    << (series.variances ? csv::format_double((*series.variances)[r]) : std::string()) << ','
                    << csv::format_double(100.0 * (p - s.true_total) / s.true_total) << '\n';
            }
        if (!out) throw IoError("failed writing replications.csv");
    }
    {
        nlohmann::json meta;
        meta["seed"] = s.seed;
        meta["mechanism"] = s.mechanism;
        meta["replications"] = s.replications;
        meta["true_total"] = s.true_total;
        meta["level"] = s.level;
        meta["boxplot"] = {{"abs_re_quantile_left_panel", 0.999},
                           {"abs_re_quantile_right_panel", 0.99},
                           {"applied_to_data", false}};
        auto out = open_output(dir / "metadata.json");
        out << meta.dump(2) << '\n';
        if (!out) throw IoError("failed writing metadata.json");
    }
}

ReplicationFile load_replications_csv(const std::string& path) {
    ReplicationFile file;
    {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open '" + path + "'");
        std::string line;
        while (std::getline(in, line) && !line.empty() && line[0] == '#') {
            if (line.rfind("# true_total=", 0) == 0) file.true_total = std::stod(line.substr(13));
            if (line.rfind("# level=", 0) == 0) file.level = std::stod(line.substr(8));
        }
    }
    const csv::Table table = csv::read(path);
    const std::size_t c_est = table.require("Estimator");
    const std::size_t c_des = table.require("Design");
    const std::size_t c_pt = table.require("point");
    const std::size_t c_var = table.require("variance");
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        ReplicationSeries* target = nullptr;
        for (auto& s : file.series)
            if (s.estimator == row[c_est] && s.design == row[c_des]) target = &s;
        if (target == nullptr) {
            file.series.push_back({row[c_est], row[c_des], {}, std::nullopt});
            target = &file.series.back();
            if (!row[c_var].empty()) target->variances.emplace();
        }
        target->points.push_back(csv::parse_number(row[c_pt], i + 1, c_pt + 1));
        if (target->variances) target->variances->push_back(csv::parse_number(row[c_var], i + 1, c_var + 1));
    }
    return file;
}

}  // namespace seqdi
