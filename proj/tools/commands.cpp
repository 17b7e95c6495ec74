#include "commands.hpp"

#include "starch/montecarlo.hpp"
#include "starch/panel_io.hpp"
#include "starch/report.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

namespace starch::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------- file helpers

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    out.close();
    if (!out) throw DataError("failed writing " + path.string());
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw DataError("cannot create output directory " + dir.string() +
                        (ec ? ": " + ec.message() : ""));
}

json load_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------- config schema

class ConfigReader {
public:
    ConfigReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) fail("", "top level must be a JSON object");
    }

    bool has(const std::string& key) const {
        used_.insert(key);
        return j_.contains(key);
    }

    [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
        throw DataError(where_ + (key.empty() ? ": " : ": field \"" + key + "\" ") + msg);
    }

    const json& at(const std::string& key) const {
        if (!has(key)) fail(key, "is required");
        return j_.at(key);
    }

    std::int64_t integer(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_number_integer()) fail(key, "must be an integer");
        return v.get<std::int64_t>();
    }

    std::uint64_t seed(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_number_unsigned())
            fail(key, "must be a non-negative integer");
        return v.get<std::uint64_t>();
    }

    double number(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_number()) fail(key, "must be a number");
        return v.get<double>();
    }

    bool boolean(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_boolean()) fail(key, "must be true or false");
        return v.get<bool>();
    }

    std::string string(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_string()) fail(key, "must be a string");
        return v.get<std::string>();
    }

    Vector vector(const std::string& key, const json& v) const {
        if (v.is_number()) return Vector::Constant(1, v.get<double>());
        if (!v.is_array()) fail(key, "must be a number or an array of numbers");
        Vector out(static_cast<Index>(v.size()));
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) fail(key, "has a non-numeric entry at index " + std::to_string(i));
            out(static_cast<Index>(i)) = v[i].get<double>();
        }
        return out;
    }

    void reject_unknown() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key())) fail(it.key(), "unknown field");
    }

    const std::string& where() const { return where_; }

private:
    const json& j_;
    std::string where_;
    mutable std::set<std::string> used_;
};

Theta read_theta(const ConfigReader& cfg, const ModelSpec& spec, const Theta& base) {
    const json& t = cfg.at("theta");
    ConfigReader r(t, cfg.where() + ": theta");
    Theta th = base;
    if (r.has("rho")) th.rho = r.vector("rho", r.at("rho"));
    if (r.has("gamma")) th.gamma = r.number("gamma");
    if (r.has("delta")) th.delta = r.vector("delta", r.at("delta"));
    if (r.has("beta")) th.beta = r.vector("beta", r.at("beta"));
    r.reject_unknown();
    try {
        th.validate(spec);
    } catch (const InvalidArgument& e) {
        cfg.fail("theta", std::string("is invalid: ") + e.what());
    }
    return th;
}

// Experiment description shared by `simulate` and `montecarlo` configs.
ExperimentConfig read_experiment(const json& j, const std::string& where,
                                 std::optional<std::uint64_t> seed_override) {
    ConfigReader cfg(j, where);
    ExperimentConfig c;
    if (cfg.has("preset")) {
        c = preset(cfg.string("preset"));
        if (cfg.has("side") || cfg.has("T") || cfg.has("errors")) {
            const std::string name = c.name;
            const int side = cfg.has("side") ? static_cast<int>(cfg.integer("side")) : c.side;
            const Index T = cfg.has("T") ? static_cast<Index>(cfg.integer("T")) : c.T;
            const ErrorLaw law = cfg.has("errors") ? parse_error_law(cfg.string("errors")) : c.errors;
            c = design_config(c.design, side, T, law);
            c.name = name;
        }
    } else {
        const Design d = parse_design(cfg.string("design"));
        const int side = cfg.has("side") ? static_cast<int>(cfg.integer("side")) : 8;
        const Index T = cfg.has("T") ? static_cast<Index>(cfg.integer("T")) : 20;
        const ErrorLaw law =
            cfg.has("errors") ? parse_error_law(cfg.string("errors")) : ErrorLaw::gaussian();
        if (d == Design::Custom) {
            c.design = d;
            c.side = side;
            c.T = T;
            c.errors = law;
            auto w = std::make_shared<const SpatialWeightSet>(load_weights(cfg.string("weights")));
            c.spec.p = static_cast<int>(w->p());
            c.spec.k = cfg.has("k") ? static_cast<int>(cfg.integer("k")) : 0;
            if (cfg.has("time_effects")) c.spec.has_time_effects = cfg.boolean("time_effects");
            if (cfg.has("unit_effects")) c.spec.has_unit_effects = cfg.boolean("unit_effects");
            c.spec.validate();
            c.weights = std::move(w);
            c.theta0 = read_theta(cfg, c.spec, Theta::zeros(c.spec));
        } else {
            if (side < 2) cfg.fail("side", "must be >= 2");
            c = design_config(d, side, T, law);
        }
    }
    if (cfg.has("theta") && c.design != Design::Custom) c.theta0 = read_theta(cfg, c.spec, c.theta0);
    if (cfg.has("name")) c.name = cfg.string("name");
    if (cfg.has("burn_in")) c.burn_in = static_cast<int>(cfg.integer("burn_in"));
    if (cfg.has("replications")) c.replications = static_cast<int>(cfg.integer("replications"));
    if (cfg.has("workers")) c.workers = static_cast<int>(cfg.integer("workers"));
    if (cfg.has("stage")) c.stage = parse_stage(cfg.string("stage"));
    if (cfg.has("coverage_level")) c.coverage_level = cfg.number("coverage_level");
    if (cfg.has("vcov")) {
        const std::string v = cfg.string("vcov");
        if (v == "auto") c.vcov = VcovForm::Auto;
        else if (v == "large-t") c.vcov = VcovForm::LargeT;
        else if (v == "finite-t") c.vcov = VcovForm::FiniteT;
        else cfg.fail("vcov", "must be auto, large-t or finite-t");
    }
    if (seed_override) {
        c.seed = *seed_override;
        cfg.has("seed");
    } else {
        c.seed = cfg.seed("seed");
    }
    cfg.reject_unknown();
    if (!c.weights) c.weights = design_config(c.design, c.side, c.T, c.errors).weights;
    return c;
}

// ---------------------------------------------------------------- data loading

struct LoadedData {
    PanelFile file;
    std::shared_ptr<const SpatialWeightSet> weights;
};

struct DataFlags {
    std::string panel;
    std::string weights;
    bool no_time_effects = false;
    std::string dummies;
    bool drop_zero_units = false;
};

void add_data_flags(CLI::App* app, DataFlags& f) {
    app->add_option("panel", f.panel, "Long-format panel CSV (unit,time,y,x1..xk)")->required();
    app->add_option("weights", f.weights, "Spatial weights file (triplet format)")->required();
    app->add_flag("--no-time-effects", f.no_time_effects, "Model without time fixed effects");
    app->add_option("--dummies", f.dummies, "Add dummies from the date column: month, year or month,year");
    app->add_flag("--drop-zero-units", f.drop_zero_units, "Drop units with zero outcomes instead of failing");
}

LoadedData load_data(const DataFlags& f) {
    PanelReadOptions ro;
    ro.drop_zero_units = f.drop_zero_units;
    std::stringstream ss(f.dummies);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "month") ro.month_dummies = true;
        else if (item == "year") ro.year_dummies = true;
        else if (!item.empty())
            throw InvalidArgument("--dummies accepts month and year, got '" + item + "'");
    }
    LoadedData d;
    d.file = read_panel_csv(f.panel, ro);
    d.weights = std::make_shared<const SpatialWeightSet>(load_weights(f.weights));
    return d;
}

EstimationData make_data(const LoadedData& d, const DataFlags& f) {
    ModelSpec spec;
    spec.p = static_cast<int>(d.weights->p());
    spec.k = d.file.panel.k();
    spec.has_time_effects = !f.no_time_effects;
    return make_estimation_data(d.file.panel, d.weights, spec);
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
    const ExperimentConfig c = read_experiment(load_json(a.config), a.config, a.seed);
    c.validate();
    DgpConfig dgp;
    dgp.spec = c.spec;
    dgp.theta = c.theta0;
    dgp.weights = c.weights;
    dgp.T = c.T;
    dgp.burn_in = c.burn_in;
    dgp.errors = c.errors;
    dgp.seed = c.seed;
    const SimulatedPanel sim = simulate(dgp);

    const fs::path dir(a.out);
    ensure_dir(dir);
    std::vector<std::string> names;
    for (int j = 0; j < c.spec.k; ++j) names.push_back("x" + std::to_string(j + 1));
    write_panel_csv(sim.panel, dir / "panel.csv", names);
    save_weights(*c.weights, dir / "weights.txt");

    json truth;
    truth["design"] = design_name(c.design);
    truth["seed"] = c.seed;
    truth["n"] = sim.panel.n();
    truth["T"] = c.T;
    truth["burn_in"] = c.burn_in;
    truth["errors"] = c.errors.name();
    truth["spec"] = {{"p", c.spec.p},
                     {"k", c.spec.k},
                     {"time_effects", c.spec.has_time_effects},
                     {"unit_effects", c.spec.has_unit_effects}};
    const Vector th = c.theta0.to_vector();
    truth["labels"] = parameter_labels(c.spec);
    truth["theta"] = std::vector<double>(th.data(), th.data() + th.size());
    truth["mu"] = std::vector<double>(sim.mu.data(), sim.mu.data() + sim.mu.size());
    truth["alpha"] = std::vector<double>(sim.alpha.data(), sim.alpha.data() + sim.alpha.size());
    truth["warnings"] = sim.warnings;
    write_text(dir / "truth.json", truth.dump(2) + "\n");

    out << "wrote " << (dir / "panel.csv").string() << " (n=" << sim.panel.n()
        << ", T=" << sim.panel.T() << ", k=" << sim.panel.k() << ")\n";
    out << "wrote " << (dir / "weights.txt").string() << "\n";
    out << "wrote " << (dir / "truth.json").string() << "\n";
    for (const auto& w : sim.warnings) out << "warning: " << w << "\n";
    return kOk;
}

// ---------------------------------------------------------------- estimate

struct EstimateArgs {
    DataFlags data;
    std::string stage = "best";
    bool finite_t = false;
    bool large_t = false;
    bool no_diagnostics = false;
    std::string out;
    std::string text;
    std::optional<std::uint64_t> seed;
    int permutations = 999;
    int lags = 0;
};

EstimatorOptions estimator_options(const EstimateArgs& a) {
    if (a.finite_t && a.large_t)
        throw InvalidArgument("--finite-t-vcov and --large-t-vcov are mutually exclusive");
    EstimatorOptions opts;
    opts.vcov = a.finite_t ? VcovForm::FiniteT : a.large_t ? VcovForm::LargeT : VcovForm::Auto;
    opts.compute_diagnostics = !a.no_diagnostics;
    opts.diagnostic_options.permutations = a.permutations;
    opts.diagnostic_options.lags = a.lags;
    if (a.seed) opts.diagnostic_options.seed = *a.seed;
    return opts;
}

int cmd_estimate(const EstimateArgs& a, std::ostream& out) {
    const LoadedData d = load_data(a.data);
    const EstimationData data = make_data(d, a.data);
    GmmFit fit = estimate(data, parse_stage(a.stage), estimator_options(a));
    fit.warnings.insert(fit.warnings.begin(), d.file.warnings.begin(), d.file.warnings.end());
    if (!a.out.empty()) write_text(a.out, fit_report_json(fit));
    const std::string text = fit_report_text(fit);
    if (!a.text.empty()) write_text(a.text, text);
    out << text;
    return kOk;
}

// ---------------------------------------------------------------- montecarlo

struct MonteCarloArgs {
    std::vector<std::string> targets;
    bool full = false;
    std::optional<int> replications;
    std::optional<int> workers;
    std::optional<std::uint64_t> seed;
    std::string stage;
    std::string out;
    bool csv = false;
    bool dry_run = false;
};

std::string coverage_table(const std::vector<ExperimentResult>& results) {
    std::ostringstream os;
    os << "experiment,parameter,coverage,mean_se,sd\n";
    char buf[96];
    for (const auto& r : results)
        for (std::size_t i = 0; i < r.labels.size(); ++i) {
            const auto k = static_cast<Index>(i);
            std::snprintf(buf, sizeof buf, "%.4f,%.4f,%.4f", r.coverage(k), r.mean_se(k), r.sd(k));
            os << r.name << ',' << r.labels[i] << ',' << buf << '\n';
        }
    return os.str();
}

int cmd_montecarlo(const MonteCarloArgs& a, std::ostream& out) {
    std::vector<ExperimentConfig> configs;
    for (const auto& t : a.targets) {
        ExperimentConfig c;
        if (fs::is_regular_file(t)) {
            c = read_experiment(load_json(t), t, a.seed);
        } else {
            if (t.find(".json") != std::string::npos) throw DataError("cannot open config " + t);
            c = preset(t);
            if (a.seed) c.seed = *a.seed;
        }
        if (a.full) c.replications = 1000;
        if (a.replications) c.replications = *a.replications;
        if (a.workers) c.workers = *a.workers;
        if (!a.stage.empty()) c.stage = parse_stage(a.stage);
        c.validate();
        configs.push_back(std::move(c));
    }
    if (a.dry_run) {
        for (const auto& c : configs) out << c.name << ": " << c.describe() << "\n";
        return kOk;
    }
    std::vector<ExperimentResult> results;
    for (const auto& c : configs) results.push_back(run_experiment(c));

    const std::string text = emit_table(results, TableFormat::Text);
    const std::string csv = emit_table(results, TableFormat::Csv);
    out << (a.csv ? csv : text);
    for (const auto& r : results) {
        out << r.name << ": " << r.successes << "/" << r.replications << " replications succeeded";
        for (const auto& [why, count] : r.failure_reasons) out << ", " << count << " " << why;
        if (r.unreliable) out << " (unreliable: failure share above 5%)";
        out << "\n";
    }
    if (!a.out.empty()) {
        const fs::path dir(a.out);
        ensure_dir(dir);
        write_text(dir / "table.txt", text);
        write_text(dir / "table.csv", csv);
        write_text(dir / "coverage.csv", coverage_table(results));
        json manifests = json::array();
        for (std::size_t i = 0; i < results.size(); ++i)
            manifests.push_back(json::parse(manifest_json(configs[i], results[i])));
        write_text(dir / "manifest.json", manifests.dump(2) + "\n");
    }
    return kOk;
}

// ---------------------------------------------------------------- diagnose

struct DiagnoseArgs {
    DataFlags data;
    std::string fit;
    std::string out;
    std::optional<std::uint64_t> seed;
    int permutations = 999;
    int lags = 0;
    double level = 0.05;
};

int cmd_diagnose(const DiagnoseArgs& a, std::ostream& out, std::ostream& err) {
    const LoadedData d = load_data(a.data);
    const EstimationData data = make_data(d, a.data);
    DiagnosticOptions dopt;
    dopt.permutations = a.permutations;
    dopt.lags = a.lags;
    dopt.level = a.level;
    if (a.seed) dopt.seed = *a.seed;

    Warnings warnings = d.file.warnings;
    Matrix resid;
    if (!a.fit.empty() && fs::exists(a.fit)) {
        const Vector theta = read_fit_theta(a.fit, data.spec);
        resid = data.pi(data.residuals(theta));
    } else {
        if (!a.fit.empty()) {
            const std::string msg = "fit file " + a.fit + " not found; refitting with the best stage";
            err << "warning: " << msg << "\n";
            warnings.push_back(msg);
        }
        const GmmFit fit = estimate(data, Stage::Best);
        resid = fitted_residuals(data, fit);
    }
    const Diagnostics diag = residual_diagnostics(resid, (*data.weights)[0], dopt);
    const std::string text = diagnostics_text(diag);
    out << text;
    for (std::size_t i = 0; i < d.file.warnings.size(); ++i) out << "warning: " << warnings[i] << "\n";
    if (!a.out.empty()) {
        const fs::path dir(a.out);
        ensure_dir(dir);
        write_text(dir / "acf.csv", acf_csv(diag));
        write_text(dir / "moran.csv", moran_csv(diag));
        std::string report = text;
        for (const auto& w : warnings) report += "warning: " + w + "\n";
        write_text(dir / "diagnostics.txt", report);
    }
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Dynamic spatiotemporal ARCH models: simulation and GMM estimation", "starch"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(version()));

    SimulateArgs sa;
    auto* sim = app.add_subcommand("simulate", "Simulate a panel from a JSON config");
    sim->add_option("config", sa.config, "JSON config (preset or design, seed, ...)")->required();
    sim->add_option("-o,--out", sa.out, "Output directory")->required();
    sim->add_option("--seed", sa.seed, "Override the config seed");

    EstimateArgs ea;
    auto* est = app.add_subcommand("estimate", "Estimate the model by GMM");
    add_data_flags(est, ea.data);
    est->add_option("--stage", ea.stage, "2sls, initial, optimal or best")
        ->check(CLI::IsMember({"2sls", "initial", "optimal", "best"}));
    est->add_flag("--finite-t-vcov", ea.finite_t, "Use the finite-T covariance");
    est->add_flag("--large-t-vcov", ea.large_t, "Use the large-T covariance");
    est->add_flag("--no-diagnostics", ea.no_diagnostics, "Skip residual diagnostics");
    est->add_option("-o,--out", ea.out, "Write the JSON report here");
    est->add_option("--text", ea.text, "Write the text report here");
    est->add_option("--seed", ea.seed, "Seed of the Moran permutation test");
    est->add_option("--permutations", ea.permutations, "Moran permutations")->check(CLI::PositiveNumber);
    est->add_option("--lags", ea.lags, "Ljung-Box lags (0 = automatic)")->check(CLI::NonNegativeNumber);

    MonteCarloArgs ma;
    auto* mc = app.add_subcommand("montecarlo", "Run Monte Carlo experiments");
    mc->add_option("targets", ma.targets, "Preset names or JSON configs")->required();
    mc->add_flag("--full", ma.full, "1000 replications");
    mc->add_option("-r,--replications", ma.replications, "Replications")->check(CLI::PositiveNumber);
    mc->add_option("-j,--workers", ma.workers, "Worker threads")->check(CLI::PositiveNumber);
    mc->add_option("--seed", ma.seed, "Master seed");
    mc->add_option("--stage", ma.stage, "Estimator stage")
        ->check(CLI::IsMember({"2sls", "initial", "optimal", "best"}));
    mc->add_option("-o,--out", ma.out, "Directory for table.txt, table.csv, coverage.csv, manifest.json");
    mc->add_flag("--csv", ma.csv, "Print the CSV table instead of text");
    mc->add_flag("--dry-run", ma.dry_run, "Print the resolved configurations and exit");

    DiagnoseArgs da;
    auto* dg = app.add_subcommand("diagnose", "Residual ACF and Moran's I diagnostics");
    add_data_flags(dg, da.data);
    dg->add_option("--fit", da.fit, "JSON fit report from `estimate` (refit when missing)");
    dg->add_option("-o,--out", da.out, "Directory for acf.csv, moran.csv, diagnostics.txt");
    dg->add_option("--seed", da.seed, "Seed of the Moran permutation test");
    dg->add_option("--permutations", da.permutations, "Moran permutations")->check(CLI::PositiveNumber);
    dg->add_option("--lags", da.lags, "Ljung-Box lags (0 = automatic)")->check(CLI::NonNegativeNumber);
    dg->add_option("--level", da.level, "Test level")->check(CLI::Range(0.0, 1.0));

    std::vector<const char*> argv{"starch"};
    for (const auto& s : args) argv.push_back(s.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (sim->parsed()) return cmd_simulate(sa, out);
        if (est->parsed()) return cmd_estimate(ea, out);
        if (mc->parsed()) return cmd_montecarlo(ma, out);
        if (dg->parsed()) return cmd_diagnose(da, out, err);
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const DataError& e) {
        err << "error: " << e.what() << "\n";
        return kDataError;
    } catch (const NumericalError& e) {
        err << "error: " << e.what() << "\n";
        return kNumericalFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kDataError;
    }
    return kUsage;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, out, err);
}

}  // namespace starch::cli
