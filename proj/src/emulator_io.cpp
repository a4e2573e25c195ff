#include "nplmc/emulator.hpp"
#include "nplmc/error.hpp"

#include <nlohmann/json.hpp>

namespace nplmc {

using nlohmann::json;

namespace {

const char *mode_name(EmulatorMode m) {
    return m == EmulatorMode::per_segment ? "per_segment" : "per_slice";
}

json covariates_json(const CovariateModel &c) {
    json mixture = json::array();
    for (const auto &m : c.credit_mixture) {
        mixture.push_back({{"weight", m.weight}, {"mean", m.mean}, {"variance", m.variance}});
    }
    return {{"paid_last_month_prob", c.paid_last_month_prob},
            {"balance_mean", c.balance_mean},
            {"balance_sd", c.balance_sd},
            {"balance_min", c.balance_min},
            {"balance_max", c.balance_max},
            {"segment_probs", c.segment_probs},
            {"credit_mixture", mixture},
            {"eligible_prob", c.eligible_prob}};
}

CovariateModel covariates_from(const json &j) {
    CovariateModel c;
    c.paid_last_month_prob = j.at("paid_last_month_prob").get<double>();
    c.balance_mean = j.at("balance_mean").get<double>();
    c.balance_sd = j.at("balance_sd").get<double>();
    c.balance_min = j.at("balance_min").get<double>();
    c.balance_max = j.at("balance_max").get<double>();
    c.segment_probs = j.at("segment_probs").get<std::vector<double>>();
    c.credit_mixture.clear();
    for (const auto &m : j.at("credit_mixture")) {
        c.credit_mixture.push_back(
            {m.at("weight").get<double>(), m.at("mean").get<double>(), m.at("variance").get<double>()});
    }
    c.eligible_prob = j.at("eligible_prob").get<double>();
    c.validate();
    return c;
}

} // namespace

std::string emulator_to_json(const Emulator &em) {
    json groups = json::array();
    for (std::size_t g = 0; g < em.group_count(); ++g) {
        const auto &m = em.model(g);
        if (!m) {
            groups.push_back(nullptr);
            continue;
        }
        groups.push_back({{"lengthscales", m->hyper().lengthscales},
                          {"signal_variance", m->hyper().signal_variance},
                          {"mean", m->hyper().mean},
                          {"jitter", m->jitter()},
                          {"log_likelihood", m->log_likelihood()},
                          {"inputs", m->inputs()},
                          {"targets", m->targets()},
                          {"noise", m->noise()}});
    }
    const json doc{{"format", "nplmc-emulator"},
                   {"version", Emulator::kFormatVersion},
                   {"mode", mode_name(em.mode())},
                   {"point_prediction", em.point() == PointPrediction::median ? "median" : "mean"},
                   {"horizon", em.horizon()},
                   {"feature_count", em.feature_count()},
                   {"covariates", covariates_json(em.covariates())},
                   {"groups", groups}};
    return doc.dump(1);
}

Emulator emulator_from_json(const std::string &text) {
    try {
        const json doc = json::parse(text);
        if (doc.at("format") != "nplmc-emulator") {
            throw ValidationError("not an emulator document");
        }
        if (doc.at("version").get<int>() != Emulator::kFormatVersion) {
            throw ValidationError("unsupported emulator format version " + doc.at("version").dump());
        }
        const auto mode_s = doc.at("mode").get<std::string>();
        if (mode_s != "per_segment" && mode_s != "per_slice") {
            throw ValidationError("unknown emulator mode " + mode_s);
        }
        Emulator em(mode_s == "per_segment" ? EmulatorMode::per_segment : EmulatorMode::per_slice,
                    covariates_from(doc.at("covariates")), doc.at("horizon").get<int>());
        em.set_point(doc.at("point_prediction") == "mean" ? PointPrediction::mean : PointPrediction::median);
        const auto &groups = doc.at("groups");
        if (groups.size() != em.group_count()) {
            throw ValidationError("emulator document has the wrong number of groups");
        }
        for (std::size_t g = 0; g < groups.size(); ++g) {
            const auto &m = groups[g];
            if (m.is_null()) {
                continue;
            }
            GpHyperparameters h;
            h.lengthscales = m.at("lengthscales").get<std::vector<double>>();
            h.signal_variance = m.at("signal_variance").get<double>();
            em.set_model(g, GpModel(em.feature_count(), m.at("inputs").get<std::vector<double>>(),
                                    m.at("targets").get<std::vector<double>>(),
                                    m.at("noise").get<std::vector<double>>(), std::move(h),
                                    m.at("jitter").get<double>()));
        }
        return em;
    } catch (const json::exception &e) {
        throw ValidationError(std::string("malformed emulator document: ") + e.what());
    }
}

} // namespace nplmc
