#include "cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <unordered_map>

#include <CLI11.hpp>

#include "seqdi/csv.hpp"
#include "seqdi/design.hpp"
#include "seqdi/estimators.hpp"
#include "seqdi/homogeneity.hpp"
#include "seqdi/pilot.hpp"
#include "seqdi/population.hpp"
#include "seqdi/serialize.hpp"

namespace seqdi::cli {

using nlohmann::json;

namespace {

[[noreturn]] void bad_type(const std::string& key, const char* expected, const json& v) {
    throw ConfigError("config key '" + key + "': expected " + expected + ", got " + v.type_name() +
                      (v.is_primitive() ? " " + v.dump() : std::string()));
}

double as_number(const std::string& key, const json& v) {
    if (!v.is_number()) bad_type(key, "number", v);
    return v.get<double>();
}

std::uint64_t as_count(const std::string& key, const json& v, std::uint64_t min_value) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
        bad_type(key, min_value > 0 ? "positive integer" : "nonnegative integer", v);
    const auto n = v.get<std::uint64_t>();
    if (n < min_value)
        throw ConfigError("config key '" + key + "': expected integer >= " + std::to_string(min_value) +
                          ", got " + std::to_string(n));
    return n;
}

bool as_bool(const std::string& key, const json& v) {
    if (!v.is_boolean()) bad_type(key, "boolean", v);
    return v.get<bool>();
}

std::string as_string(const std::string& key, const json& v) {
    if (!v.is_string()) bad_type(key, "string", v);
    return v.get<std::string>();
}

Vector as_numbers(const std::string& key, const json& v) {
    if (!v.is_array()) bad_type(key, "array of numbers", v);
    Vector out;
    for (const auto& e : v) out.push_back(as_number(key + "[]", e));
    return out;
}

std::vector<std::string> as_strings(const std::string& key, const json& v) {
    if (!v.is_array()) bad_type(key, "array of strings", v);
    std::vector<std::string> out;
    for (const auto& e : v) out.push_back(as_string(key + "[]", e));
    return out;
}

using Handler = std::function<void(const json&)>;

void apply_keys(const json& obj, const std::string& prefix, const std::map<std::string, Handler>& handlers) {
    if (!obj.is_object()) bad_type(prefix.empty() ? "<root>" : prefix, "object", obj);
    for (const auto& [key, value] : obj.items()) {
        const auto it = handlers.find(key);
        if (it == handlers.end()) {
            std::string known;
            for (const auto& [k, h] : handlers) known += (known.empty() ? "" : ", ") + k;
            throw ConfigError("unknown config key '" + prefix + key + "' (known keys: " + known + ")");
        }
        it->second(value);
    }
}

}  // namespace

RunConfig parse_run_config(const json& doc) {
    RunConfig rc;
    McConfig& c = rc.mc;
    c.seed = kDefaultSeed;
    const std::map<std::string, Handler> population_keys{
        {"size", [&](const json& v) { c.population.size = as_count("population.size", v, 1); }},
        {"beta",
         [&](const json& v) {
             const Vector b = as_numbers("population.beta", v);
             if (b.size() != 4) throw ConfigError("config key 'population.beta': expected array of 4 numbers");
             std::copy(b.begin(), b.end(), c.population.beta.begin());
         }},
        {"sigma", [&](const json& v) { c.population.sigma = as_number("population.sigma", v); }},
    };
    const std::map<std::string, Handler> keys{
        {"replications", [&](const json& v) { c.replications = as_count("replications", v, 1); }},
        {"seed", [&](const json& v) { c.seed = as_count("seed", v, 0); }},
        {"mechanism",
         [&](const json& v) {
             try {
                 c.mechanism = parse_mc_mode(as_string("mechanism", v));
             } catch (const std::invalid_argument& e) {
                 throw ConfigError(std::string("config key 'mechanism': ") + e.what());
             }
         }},
        {"f_np", [&](const json& v) { c.f_np = as_number("f_np", v); }},
        {"f_p", [&](const json& v) { c.f_p = as_number("f_p", v); }},
        {"designs",
         [&](const json& v) {
             c.designs.clear();
             for (const auto& name : as_strings("designs", v)) {
                 try {
                     c.designs.push_back(parse_design_kind(name));
                 } catch (const std::invalid_argument& e) {
                     throw ConfigError(std::string("config key 'designs': ") + e.what());
                 }
             }
         }},
        {"estimators", [&](const json& v) { c.estimators = as_strings("estimators", v); }},
        {"alpha", [&](const json& v) { c.alpha = as_number("alpha", v); }},
        {"level", [&](const json& v) { c.level = as_number("level", v); }},
        {"population", [&](const json& v) { apply_keys(v, "population.", population_keys); }},
        {"selection_slopes", [&](const json& v) { c.selection_slopes = as_numbers("selection_slopes", v); }},
        {"population_csv", [&](const json& v) { c.population_csv = as_string("population_csv", v); }},
        {"fgls_iterations",
         [&](const json& v) { c.fgls_iterations = static_cast<int>(as_count("fgls_iterations", v, 0)); }},
        {"fgls_p_iterations",
         [&](const json& v) { c.fgls_p_iterations = static_cast<int>(as_count("fgls_p_iterations", v, 0)); }},
        {"include_model_variance",
         [&](const json& v) { c.include_model_variance = as_bool("include_model_variance", v); }},
        {"truncation_quantile", [&](const json& v) { c.truncation_quantile = as_number("truncation_quantile", v); }},
        {"threads", [&](const json& v) { c.threads = static_cast<unsigned>(as_count("threads", v, 1)); }},
        {"progress", [&](const json& v) { c.progress = as_bool("progress", v); }},
        {"out", [&](const json& v) { rc.out_dir = as_string("out", v); }},
    };
    apply_keys(doc, "", keys);
    try {
        c.validate();
    } catch (const InvalidParams& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return rc;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_run_config(doc);
}

std::optional<unsigned> threads_from_env() {
    const char* raw = std::getenv("SEQDI_THREADS");
    if (raw == nullptr || *raw == '\0') return std::nullopt;
    char* end = nullptr;
    const long v = std::strtol(raw, &end, 10);
    if (*end != '\0' || v < 1 || v > 4096)
        throw ConfigError(std::string("SEQDI_THREADS must be a positive integer, got '") + raw + "'");
    return static_cast<unsigned>(v);
}

namespace {

std::string seed_comment(std::uint64_t seed) { return "seed=" + std::to_string(seed); }

// Population with its partition; estimation and testing need both strata.
struct StratifiedData {
    Population pop;
    Partition part;
};

StratifiedData load_stratified(const std::string& path) {
    LoadedPopulation loaded = load_population_csv(path);
    if (!loaded.partition) throw MissingColumn("population '" + path + "' has no delta column");
    return {std::move(loaded.population), std::move(*loaded.partition)};
}

struct LoadedSample {
    DrawnSample sample;
    SampleData data;
};

// id,pi[,y]: ids must be units of U1; y defaults to the population value.
LoadedSample load_sample(const std::string& path, const StratifiedData& d) {
    const csv::Table t = csv::read(path);
    const std::size_t c_id = t.require("id");
    const std::size_t c_pi = t.require("pi");
    const auto c_y = t.find("y");

    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < d.pop.size(); ++i) index.emplace(d.pop.ids[i], i);

    LoadedSample out;
    std::vector<unsigned char> seen(d.pop.size(), 0);
    Vector y_override;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const auto it = index.find(row[c_id]);
        if (it == index.end()) throw InvalidParams("sample id '" + row[c_id] + "' is not in the population");
        const std::size_t i = it->second;
        if (d.part.delta()[i]) throw InvalidParams("sample id '" + row[c_id] + "' belongs to S_np, not U1");
        if (seen[i]) throw InvalidParams("sample id '" + row[c_id] + "' appears twice");
        seen[i] = 1;
        const double pi = csv::parse_number(row[c_pi], r + 1, c_pi + 1);
        if (!(pi > 0.0 && pi <= 1.0))
            throw ParseError(r + 1, c_pi + 1, "inclusion probability must lie in (0, 1]");
        out.sample.members.push_back(i);
        out.sample.positions.push_back(r);
        out.sample.pi.push_back(pi);
        if (c_y) y_override.push_back(csv::parse_number(row[*c_y], r + 1, *c_y + 1));
    }
    if (out.sample.size() == 0) throw EmptySample("sample '" + path + "' has no rows");
    out.data = gather_sample(d.pop, out.sample);
    if (c_y) out.data.y = std::move(y_override);
    return out;
}

struct NpStratum {
    Matrix x;
    Vector y;
    double total = 0.0;
    Vector x_u1_total;
    double n1 = 0.0;
};

NpStratum np_stratum(const StratifiedData& d) {
    NpStratum s;
    s.x = d.pop.x.select_rows(d.part.np_indices());
    s.y = gather(d.pop.y, d.part.np_indices());
    s.total = std::accumulate(s.y.begin(), s.y.end(), 0.0);
    s.x_u1_total = column_totals(d.pop.x.select_rows(d.part.u1_indices()));
    s.n1 = static_cast<double>(d.part.n1());
    return s;
}

void print_estimates(std::ostream& out, const std::vector<Estimate>& estimates, std::uint64_t seed) {
    out << "# " << seed_comment(seed) << '\n' << estimate_csv_header() << '\n';
    for (const auto& e : estimates) out << estimate_csv_row(e) << '\n';
}

void print_summary(std::ostream& out, const McSummary& s) {
    char line[160];
    std::snprintf(line, sizeof line, "mechanism=%s R=%zu seed=%llu Y=%.6g\n", s.mechanism.c_str(), s.replications,
                  static_cast<unsigned long long>(s.seed), s.true_total);
    out << line;
    std::snprintf(line, sizeof line, "%-12s %-8s %9s %9s %9s %9s\n", "Estimator", "Design", "RB", "RRMSE",
                  "VarRatio", "Coverage");
    out << line;
    for (const auto& r : s.rows) {
        std::snprintf(line, sizeof line, "%-12s %-8s %9.4f %9.4f ", r.estimator.c_str(), r.design.c_str(),
                      r.metrics.rb, r.metrics.rrmse);
        out << line;
        if (r.metrics.var_ratio) {
            std::snprintf(line, sizeof line, "%9.4f ", *r.metrics.var_ratio);
            out << line;
        } else {
            out << "        - ";
        }
        if (r.metrics.coverage) {
            std::snprintf(line, sizeof line, "%9.4f\n", *r.metrics.coverage);
            out << line;
        } else {
            out << "        -\n";
        }
    }
    for (const auto& t : s.tests) {
        std::snprintf(line, sizeof line, "test %-8s reject=%.4f mean_p=%.4f median_p=%.4f\n", t.design.c_str(),
                      t.reject_rate, t.mean_p, t.median_p);
        out << line;
    }
}

struct GlobalOptions {
    std::uint64_t seed = kDefaultSeed;
    std::optional<unsigned> threads;
};

int cmd_simulate(const GlobalOptions& g, bool seed_given, const std::string& config_path,
                 const std::optional<std::string>& out_flag, bool full_scale) {
    RunConfig rc = load_run_config(config_path);
    if (seed_given) rc.mc.seed = g.seed;
    if (full_scale) rc.mc.replications = kFullScaleReplications;
    if (g.threads) rc.mc.threads = *g.threads;
    else if (const auto env = threads_from_env()) rc.mc.threads = *env;
    const std::string out_dir = out_flag ? *out_flag : rc.out_dir.value_or("results");

    const McSummary summary = run_mc(rc.mc);
    emit_results(summary, out_dir);
    print_summary(std::cout, summary);
    return 0;
}

int cmd_design(const GlobalOptions& g, const std::string& pop_path, const std::optional<std::string>& pilot_path,
               double n_p, const std::string& kind_name, const std::string& out_path,
               const std::optional<std::string>& model_out) {
    const DesignKind kind = parse_design_kind(kind_name);
    LoadedPopulation loaded = load_population_csv(pop_path);
    const Population& pop = loaded.population;

    // U1 is the delta = 0 part when the population carries a partition.
    std::vector<std::size_t> u1;
    if (loaded.partition) u1 = loaded.partition->u1_indices();
    else {
        u1.resize(pop.size());
        std::iota(u1.begin(), u1.end(), std::size_t{0});
    }
    const Matrix x_u1 = pop.x.select_rows(u1);

    std::optional<PilotVarianceModel> model;
    if (kind == DesignKind::Optimal || model_out) {
        if (pilot_path) {
            const LoadedPopulation pilot = load_population_csv(*pilot_path);
            if (pilot.population.dim() != pop.dim())
                throw InvalidParams("pilot covariates do not match the population covariates");
            model = fit_pilot(pilot.population.x, pilot.population.y);
        } else if (loaded.partition) {
            const auto& np = loaded.partition->np_indices();
            model = fit_pilot(pop.x.select_rows(np), gather(pop.y, np));
        } else {
            throw MissingColumn("optimal design needs --pilot or a delta column in the population");
        }
    }

    SecondStageDesign design;
    switch (kind) {
        case DesignKind::Optimal: design = optimal_probabilities(*model, x_u1, n_p, u1); break;
        case DesignKind::Equal: design = equal_probabilities(u1.size(), n_p, u1); break;
        case DesignKind::PPS:
            if (pop.dim() < 2) throw InvalidParams("PPS design needs a size covariate x1");
            design = pps_probabilities(x_u1.column(1), n_p, u1);
            break;
    }
    write_design_csv(out_path, design, pop.ids, seed_comment(g.seed));
    if (model_out && model) {
        std::ofstream out(*model_out);
        if (!out) throw IoError("cannot write '" + *model_out + "'");
        json j = to_json(*model);
        j["seed"] = g.seed;
        out << j.dump(2) << '\n';
    }
    const double sum = std::accumulate(design.pi.begin(), design.pi.end(), 0.0);
    const auto [lo, hi] = std::minmax_element(design.pi.begin(), design.pi.end());
    std::printf("design=%s units=%zu sum_pi=%.10g min_pi=%.6g max_pi=%.6g\n", std::string(to_string(kind)).c_str(),
                design.pi.size(), sum, *lo, *hi);
    return 0;
}

std::string weight_suffix(const std::string& weights) { return weights == "b" ? "_b" : "_sigma"; }

int cmd_estimate(const GlobalOptions& g, const std::string& pop_path, const std::string& sample_path,
                 std::vector<std::string> which, const std::string& weights, double alpha,
                 const std::optional<std::string>& out_path) {
    const StratifiedData d = load_stratified(pop_path);
    const LoadedSample ls = load_sample(sample_path, d);
    const NpStratum np = np_stratum(d);
    if (which.empty()) which = {"DI", "HTseq", "sepDI", "comDI", "adDI"};

    const WeightSpec wspec{weights == "b" ? WeightKind::InversePi : WeightKind::InversePiSigma, 0.999};
    std::optional<PilotVarianceModel> pilot;
    auto need_pilot = [&]() -> const PilotVarianceModel& {
        if (!pilot) pilot = fit_pilot(np.x, np.y);
        return *pilot;
    };
    const PilotVarianceModel* model_for_weights = nullptr;
    auto model_ptr = [&]() {
        if (wspec.kind == WeightKind::InversePiSigma && !model_for_weights) model_for_weights = &need_pilot();
        return model_for_weights;
    };

    std::vector<Estimate> out;
    for (const auto& name : which) {
        if (name == "DI") out.push_back(y_di(np.total, ls.data, np.n1));
        else if (name == "HTseq") out.push_back(y_ht_seq(np.total, ls.data));
        else if (name == "sepDI") out.push_back(y_sep_di(np.total, ls.data, np.x_u1_total, wspec, model_ptr()));
        else if (name == "comDI") {
            Estimate e = y_com_di(np.x, np.y, ls.data, np.x_u1_total, wspec, model_ptr());
            e.tag = "comDI" + weight_suffix(weights);
            out.push_back(e);
        } else if (name == "adDI") {
            const Estimate sep = y_sep_di(np.total, ls.data, np.x_u1_total, wspec, model_ptr());
            Estimate com = y_com_di(np.x, np.y, ls.data, np.x_u1_total, wspec, model_ptr());
            const HomogeneityResult test = homogeneity_test(fgls_np(np.x, np.y, need_pilot()), fgls_p(ls.data), alpha);
            out.push_back(adaptive_estimate(sep, com, test));
        }
    }
    print_estimates(std::cout, out, g.seed);
    if (out_path) {
        std::ofstream f(*out_path);
        if (!f) throw IoError("cannot write '" + *out_path + "'");
        print_estimates(f, out, g.seed);
    }
    return 0;
}

int cmd_test(const GlobalOptions& g, const std::string& pop_path, const std::string& sample_path, double alpha,
             bool model_variance, const std::optional<std::string>& out_path) {
    const StratifiedData d = load_stratified(pop_path);
    const LoadedSample ls = load_sample(sample_path, d);
    const NpStratum np = np_stratum(d);
    const HomogeneityResult r =
        homogeneity_test(fgls_np(np.x, np.y, 1), fgls_p(ls.data), alpha, model_variance);
    std::printf("F=%.10g df=%d p=%.10g alpha=%g decision=%s\n", r.statistic, r.df, r.p_value, r.alpha,
                r.reject ? "reject" : "retain");
    if (out_path) {
        std::ofstream f(*out_path);
        if (!f) throw IoError("cannot write '" + *out_path + "'");
        json j = to_json(r);
        j["seed"] = g.seed;
        f << j.dump(2) << '\n';
    }
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Sequential design-based data integration for finite-population totals", "seqdi"};
    app.require_subcommand(1);

    GlobalOptions g;
    unsigned threads = 0;
    std::vector<CLI::Option*> seed_opts;
    auto add_seed = [&](CLI::App* cmd) {
        seed_opts.push_back(cmd->add_option("--seed", g.seed, "RNG seed, recorded in every output header")
                                ->default_val(kDefaultSeed));
    };

    auto* sim = app.add_subcommand("simulate", "Run a Monte Carlo experiment from a JSON config");
    std::string config_path;
    std::optional<std::string> sim_out;
    bool full_scale = false;
    sim->add_option("--config", config_path, "JSON experiment config")->required();
    sim->add_option("--out", sim_out, "Output directory (default: config 'out' or ./results)");
    sim->add_flag("--full-scale", full_scale, "Use R = 100000 replications");
    auto* threads_opt = sim->add_option("--threads", threads, "Worker threads (overrides SEQDI_THREADS)")
                            ->check(CLI::Range(1u, 4096u));
    add_seed(sim);

    auto* des = app.add_subcommand("design", "Build second-stage inclusion probabilities on U1");
    std::string des_pop, des_kind = "optimal", des_out;
    std::optional<std::string> des_pilot, des_model;
    double des_np = 0.0;
    des->add_option("--pop", des_pop, "Population CSV (id, x1.., y, optional delta)")->required();
    des->add_option("--pilot", des_pilot, "Pilot sample CSV (id, x1.., y); default: delta = 1 rows of --pop");
    des->add_option("--np", des_np, "Expected second-stage sample size")->required();
    des->add_option("--kind", des_kind, "Design kind")
        ->check(CLI::IsMember({"optimal", "equal", "pps"}))
        ->default_val("optimal");
    des->add_option("--out", des_out, "Output CSV (id,pi,kind)")->required();
    des->add_option("--model-out", des_model, "Write the fitted variance model as JSON");
    add_seed(des);

    auto* est = app.add_subcommand("estimate", "Evaluate sequential estimators on a drawn sample");
    std::string est_pop, est_sample, est_weights = "sigma";
    std::vector<std::string> est_which;
    std::optional<std::string> est_out;
    double est_alpha = 0.05;
    est->add_option("--pop", est_pop, "Population CSV with delta column")->required();
    est->add_option("--sample", est_sample, "Sample CSV (id, pi, optional y)")->required();
    est->add_option("--estimator", est_which, "Estimator (repeatable; default all)")
        ->check(CLI::IsMember({"DI", "HTseq", "sepDI", "comDI", "adDI"}));
    est->add_option("--weights", est_weights, "Working weights: b = 1/pi, sigma = 1/(pi sigma^2)")
        ->check(CLI::IsMember({"b", "sigma"}))
        ->default_val("sigma");
    est->add_option("--alpha", est_alpha, "Test level used by adDI")->check(CLI::Range(0.0, 1.0));
    est->add_option("--out", est_out, "Also write the estimates CSV here");
    add_seed(est);

    auto* tst = app.add_subcommand("test", "Coefficient homogeneity test between S_np and S_p");
    std::string tst_pop, tst_sample;
    double tst_alpha = 0.05;
    bool tst_model = false;
    std::optional<std::string> tst_out;
    tst->add_option("--pop", tst_pop, "Population CSV with delta column")->required();
    tst->add_option("--sample", tst_sample, "Sample CSV (id, pi, optional y)")->required();
    tst->add_option("--alpha", tst_alpha, "Significance level in (0, 1)")->default_val(0.05);
    tst->add_flag("--model-variance", tst_model, "Add the model-variance term to V_p");
    tst->add_option("--out", tst_out, "Write the result as JSON");
    add_seed(tst);

    try {
        app.parse(argc, argv);
        if (est->parsed() && !(est_alpha > 0.0 && est_alpha < 1.0))
            throw CLI::ValidationError("--alpha", "must lie strictly between 0 and 1");
        if (tst->parsed() && !(tst_alpha > 0.0 && tst_alpha < 1.0))
            throw CLI::ValidationError("--alpha", "must lie strictly between 0 and 1");
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    if (threads_opt->count() > 0) g.threads = threads;

    try {
        if (sim->parsed()) return cmd_simulate(g, seed_opts.front()->count() > 0, config_path, sim_out, full_scale);
        if (des->parsed()) return cmd_design(g, des_pop, des_pilot, des_np, des_kind, des_out, des_model);
        if (est->parsed()) return cmd_estimate(g, est_pop, est_sample, est_which, est_weights, est_alpha, est_out);
        if (tst->parsed()) return cmd_test(g, tst_pop, tst_sample, tst_alpha, tst_model, tst_out);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

}  // namespace seqdi::cli
