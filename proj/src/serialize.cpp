#include "seqdi/serialize.hpp"

#include "seqdi/csv.hpp"
#include "seqdi/errors.hpp"

namespace seqdi {

using nlohmann::json;

json to_json(const PilotVarianceModel& m) {
    return {{"beta", m.beta},
            {"sigma2", m.sigma2},
            {"gamma", m.gamma},
            {"mean_floor", m.mean_floor},
            {"sigma2_floor", m.sigma2_floor}};
}

PilotVarianceModel pilot_from_json(const json& j) {
    PilotVarianceModel m;
    try {
        m.beta = j.at("beta").get<Vector>();
        m.sigma2 = j.at("sigma2").get<double>();
        m.gamma = j.at("gamma").get<double>();
        m.mean_floor = j.at("mean_floor").get<double>();
        m.sigma2_floor = j.value("sigma2_floor", 0.0);
    } catch (const json::exception& e) {
        throw InvalidParams(std::string("variance model: ") + e.what());
    }
    if (m.beta.empty() || !(m.sigma2 > 0.0) || !(m.mean_floor > 0.0))
        throw InvalidParams("variance model: need nonempty beta and positive sigma2 and mean_floor");
    return m;
}

json to_json(const Estimate& e) {
    json j{{"estimator", e.tag}, {"point", e.point}, {"level", e.level}};
    if (e.variance) {
        j["variance"] = *e.variance;
        j["ci"] = json::array({e.ci_low.value_or(e.point), e.ci_high.value_or(e.point)});
    } else {
        j["variance"] = nullptr;
    }
    return j;
}

json to_json(const HomogeneityResult& r) {
    return {{"statistic", r.statistic}, {"df", r.df},           {"p_value", r.p_value}, {"reject", r.reject},
            {"alpha", r.alpha},         {"beta_np", r.beta_np}, {"beta_p", r.beta_p}};
}

std::string estimate_csv_header() { return "estimator,point,variance,ci_low,ci_high"; }

std::string estimate_csv_row(const Estimate& e) {
    std::string row = e.tag + "," + csv::format_double(e.point) + ",";
    if (e.variance)
        row += csv::format_double(*e.variance) + "," + csv::format_double(e.ci_low.value_or(e.point)) + "," +
               csv::format_double(e.ci_high.value_or(e.point));
    else
        row += ",,";
    return row;
}

}  // namespace seqdi
