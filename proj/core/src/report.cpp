#include "starch/report.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace starch {

namespace {

using nlohmann::json;

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json vec(const Vector& v) {
    json a = json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(number(v(i)));
    return a;
}

json mat(const Matrix& m) {
    json a = json::array();
    for (Index i = 0; i < m.rows(); ++i) a.push_back(vec(m.row(i).transpose()));
    return a;
}

std::string fixed(double v, int prec = 4) {
    if (!std::isfinite(v)) return "NA";
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

}  // namespace

std::string fit_report_json(const GmmFit& fit) {
    json j;
    j["stage"] = stage_name(fit.stage);
    j["vcov_form"] = vcov_form_name(fit.vcov_form);
    j["spec"] = {{"p", fit.spec.p},
                 {"k", fit.spec.k},
                 {"time_effects", fit.spec.has_time_effects},
                 {"unit_effects", fit.spec.has_unit_effects}};
    json params = json::array();
    for (Index i = 0; i < fit.theta.size(); ++i) {
        const double se = i < fit.se.size() ? fit.se(i) : std::nan("");
        params.push_back({{"name", fit.labels[static_cast<std::size_t>(i)]},
                          {"estimate", number(fit.theta(i))},
                          {"se", number(se)},
                          {"t", number(fit.theta(i) / se)}});
    }
    j["parameters"] = params;
    j["estimates"] = vec(fit.theta);
    j["vcov"] = mat(fit.vcov);
    j["objective"] = number(fit.objective);
    j["moments"] = {{"m", fit.m}, {"kq", fit.kq}, {"g", vec(fit.moments)}};
    j["omega"] = {{"rcond", number(fit.omega_rcond)}, {"ridged", fit.omega_ridged}};
    j["noise"] = {{"sigma2", number(fit.noise.sigma2)},
                  {"mu4", number(fit.noise.mu4)},
                  {"eta4", number(fit.noise.eta4)},
                  {"clamped", fit.noise.clamped}};
    j["identification"] = {{"min_singular_value", number(fit.identification.min_singular_value)},
                           {"condition_number", number(fit.identification.condition_number)},
                           {"flagged", fit.identification.flagged}};
    j["stationarity"] = {{"ok", fit.stationarity.ok()},
                         {"detail", fit.stationarity.describe()}};
    j["alpha_hat"] = vec(fit.alpha_hat);
    j["mu_hat"] = vec(fit.mu_hat);
    json ladder = json::array();
    for (const auto& r : fit.ladder)
        ladder.push_back({{"stage", stage_name(r.stage)},
                          {"converged", r.converged},
                          {"iterations", r.iterations},
                          {"objective", number(r.objective)},
                          {"gradient_norm", number(r.grad_norm)},
                          {"start", r.start}});
    j["ladder"] = ladder;
    if (fit.diagnostics) {
        const Diagnostics& d = *fit.diagnostics;
        json moran = json::array();
        for (const auto& p : d.periods)
            moran.push_back({{"moran_i", number(p.moran_i)}, {"p_value", number(p.p_value)}});
        j["diagnostics"] = {{"lags", d.lags},
                            {"acf_rejection_rate", number(d.acf_rejection_rate)},
                            {"moran_rejection_rate", number(d.moran_rejection_rate)},
                            {"moran", moran}};
    }
    j["warnings"] = fit.warnings;
    return j.dump(2) + "\n";
}

std::string fit_report_text(const GmmFit& fit) {
    std::ostringstream os;
    os << "stage: " << stage_name(fit.stage) << "   covariance: " << vcov_form_name(fit.vcov_form)
       << "\n";
    os << "moments: m=" << fit.m << " kq=" << fit.kq << "   objective: " << fixed(fit.objective, 6)
       << "\n";
    os << "sigma2: " << fixed(fit.noise.sigma2) << "   eta4: " << fixed(fit.noise.eta4) << "\n\n";
    os << std::left << std::setw(12) << "parameter" << std::right << std::setw(12) << "estimate"
       << std::setw(12) << "se" << std::setw(10) << "t" << "\n";
    for (Index i = 0; i < fit.theta.size(); ++i) {
        const double se = i < fit.se.size() ? fit.se(i) : std::nan("");
        os << std::left << std::setw(12) << fit.labels[static_cast<std::size_t>(i)] << std::right
           << std::setw(12) << fixed(fit.theta(i)) << std::setw(12) << fixed(se) << std::setw(10)
           << fixed(fit.theta(i) / se, 2) << "\n";
    }
    os << "\nstationarity: " << fit.stationarity.describe() << "\n";
    os << "identification: condition number " << fixed(fit.identification.condition_number, 1)
       << (fit.identification.flagged ? " (flagged)" : "") << "\n";
    os << "ladder:";
    for (const auto& r : fit.ladder)
        os << " " << stage_name(r.stage) << (r.converged ? "" : "(not converged)");
    os << "\n";
    if (fit.diagnostics) os << "\n" << diagnostics_text(*fit.diagnostics);
    for (const auto& w : fit.warnings) os << "warning: " << w << "\n";
    return os.str();
}

Vector read_fit_theta(const std::filesystem::path& path, const ModelSpec& spec) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open fit file: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": invalid JSON: " + e.what());
    }
    if (!j.contains("estimates") || !j["estimates"].is_array())
        throw DataError(path.string() + ": missing 'estimates' array");
    const auto& arr = j["estimates"];
    if (static_cast<int>(arr.size()) != spec.num_params())
        throw DataError(path.string() + ": estimates have length " + std::to_string(arr.size()) +
                        ", expected " + std::to_string(spec.num_params()));
    Vector theta(spec.num_params());
    for (std::size_t i = 0; i < arr.size(); ++i) {
        if (!arr[i].is_number()) throw DataError(path.string() + ": non-numeric estimate");
        theta(static_cast<Index>(i)) = arr[i].get<double>();
    }
    return theta;
}

std::string acf_csv(const Diagnostics& d) {
    std::ostringstream os;
    os << "location";
    for (int h = 1; h <= d.lags; ++h) os << ",acf" << h;
    os << ",ljung_box,p_value\n";
    os << std::setprecision(10);
    for (std::size_t i = 0; i < d.locations.size(); ++i) {
        const auto& loc = d.locations[i];
        os << i;
        for (Index h = 0; h < loc.acf.size(); ++h) os << ',' << loc.acf(h);
        os << ',' << loc.q_stat << ',' << loc.p_value << '\n';
    }
    return os.str();
}

std::string moran_csv(const Diagnostics& d) {
    std::ostringstream os;
    os << "period,moran_i,p_value\n" << std::setprecision(10);
    for (std::size_t t = 0; t < d.periods.size(); ++t)
        os << (t + 1) << ',' << d.periods[t].moran_i << ',' << d.periods[t].p_value << '\n';
    return os.str();
}

std::string diagnostics_text(const Diagnostics& d) {
    std::ostringstream os;
    os << "residual diagnostics (Ljung-Box lags " << d.lags << ")\n";
    os << "  locations with autocorrelated residuals: " << fixed(100.0 * d.acf_rejection_rate, 1)
       << "% of " << d.locations.size() << "\n";
    os << "  periods with spatially autocorrelated residuals: "
       << fixed(100.0 * d.moran_rejection_rate, 1) << "% of " << d.periods.size() << "\n";
    return os.str();
}

}  // namespace starch
