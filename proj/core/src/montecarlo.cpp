#include "starch/montecarlo.hpp"

#include "starch/rng.hpp"

#include <boost/math/distributions/normal.hpp>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <iomanip>
#include <sstream>
#include <thread>

#ifndef STARCH_VERSION
#define STARCH_VERSION "0.0.0"
#endif

namespace starch {

const char* version() noexcept { return STARCH_VERSION; }

const char* design_name(Design d) {
    switch (d) {
        case Design::M1: return "M1";
        case Design::M2: return "M2";
        case Design::M3: return "M3";
        default: return "custom";
    }
}

Design parse_design(const std::string& text) {
    if (text == "M1" || text == "m1") return Design::M1;
    if (text == "M2" || text == "m2") return Design::M2;
    if (text == "M3" || text == "m3") return Design::M3;
    if (text == "custom") return Design::Custom;
    throw InvalidArgument("unknown design '" + text + "' (expected M1, M2, M3 or custom)");
}

void ExperimentConfig::validate() const {
    spec.validate();
    theta0.validate(spec);
    if (replications < 1) throw InvalidArgument("replications must be >= 1");
    if (workers < 1) throw InvalidArgument("workers must be >= 1");
    if (T < 2) throw InvalidArgument("T must be >= 2");
    if (burn_in < 0) throw InvalidArgument("burn_in must be >= 0");
    if (side < 2) throw InvalidArgument("invalid lattice: side must be >= 2");
    if (!(coverage_level > 0.0 && coverage_level < 1.0))
        throw InvalidArgument("coverage_level must lie in (0, 1)");
    if (weights && weights->n() != n()) throw InvalidArgument("weights do not match lattice size");
}

std::string ExperimentConfig::describe() const {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "design=" << design_name(design) << ";p=" << spec.p << ";k=" << spec.k
       << ";time_fx=" << spec.has_time_effects << ";unit_fx=" << spec.has_unit_effects
       << ";theta=";
    const Vector th = theta0.to_vector();
    for (Index i = 0; i < th.size(); ++i) os << (i ? "," : "") << th(i);
    os << ";side=" << side << ";T=" << T << ";errors=" << errors.name()
       << ";reps=" << replications << ";stage=" << stage_name(stage)
       << ";vcov=" << vcov_form_name(vcov) << ";seed=" << seed << ";burn_in=" << burn_in
       << ";level=" << coverage_level;
    return os.str();
}

ExperimentConfig design_config(Design design, int side, Index T, const ErrorLaw& errors) {
    ExperimentConfig c;
    c.design = design;
    c.side = side;
    c.T = T;
    c.errors = errors;
    c.spec.k = 2;
    switch (design) {
        case Design::M1:
        case Design::M2: {
            c.spec.p = 1;
            c.spec.has_time_effects = design == Design::M1;
            c.theta0 = Theta::zeros(c.spec);
            c.theta0.rho << 0.2;
            c.theta0.gamma = design == Design::M1 ? 0.2 : 0.8;
            c.theta0.delta << -0.2;
            c.weights = std::make_shared<const SpatialWeightSet>(build_queen_contiguity(side));
            break;
        }
        case Design::M3: {
            c.spec.p = 2;
            c.theta0 = Theta::zeros(c.spec);
            c.theta0.rho << 0.6, 0.2;
            c.theta0.gamma = 0.1;
            c.theta0.delta << 0.01, 0.01;
            c.weights =
                std::make_shared<const SpatialWeightSet>(build_second_order_contiguity(side));
            break;
        }
        default:
            throw InvalidArgument("design_config needs M1, M2 or M3");
    }
    c.theta0.beta << 0.5, 1.0;
    c.name = design_name(design);
    return c;
}

std::vector<std::string> preset_names() {
    std::vector<std::string> out;
    for (int table = 1; table <= 3; ++table)
        for (const char* dist : {"gaussian", "t3"})
            for (const char* size : {"small", "large"})
                out.push_back("table-a" + std::to_string(table) + "-" + dist + "-" + size);
    return out;
}

ExperimentConfig preset(const std::string& name) {
    for (int table = 1; table <= 3; ++table)
        for (const char* dist : {"gaussian", "t3"})
            for (const char* size : {"small", "large"}) {
                const std::string candidate =
                    "table-a" + std::to_string(table) + "-" + dist + "-" + size;
                if (candidate != name) continue;
                const Design d = table == 1 ? Design::M1 : table == 2 ? Design::M2 : Design::M3;
                const bool small = std::string(size) == "small";
                const int side = small ? (d == Design::M3 ? 7 : 8) : 10;
                const Index T = small ? 20 : 40;
                ExperimentConfig c = design_config(d, side, T, parse_error_law(dist));
                c.name = name;
                return c;
            }
    std::string valid;
    for (const auto& p : preset_names()) valid += (valid.empty() ? "" : ", ") + p;
    throw InvalidArgument("unknown preset '" + name + "'; valid presets: " + valid);
}

std::uint64_t replication_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    return derive_seed(seed, index);
}

ReplicationOutcome run_replication(const ExperimentConfig& config, std::uint64_t index) {
    ReplicationOutcome out;
    try {
        DgpConfig dgp;
        dgp.spec = config.spec;
        dgp.theta = config.theta0;
        dgp.weights = config.weights;
        dgp.T = config.T;
        dgp.burn_in = config.burn_in;
        dgp.errors = config.errors;
        dgp.seed = replication_seed(config.seed, index);
        const SimulatedPanel sim = simulate(dgp);
        const EstimationData data = make_estimation_data(sim.panel, config.weights, config.spec);
        EstimatorOptions opts;
        opts.vcov = config.vcov;
        const GmmFit fit = estimate(data, config.stage, opts);
        out.ok = true;
        out.theta = fit.theta;
        out.se = fit.se;
    } catch (const ConvergenceError& e) {
        out.failure = "convergence";
        out.message = e.what();
    } catch (const StationarityError& e) {
        out.failure = "stationarity";
        out.message = e.what();
    } catch (const DivergenceError& e) {
        out.failure = "divergence";
        out.message = e.what();
    } catch (const NumericalError& e) {
        out.failure = "numerical";
        out.message = e.what();
    } catch (const std::exception& e) {
        out.failure = "other";
        out.message = e.what();
    }
    return out;
}

ExperimentResult aggregate(const ExperimentConfig& config, std::vector<ReplicationOutcome> outcomes) {
    ExperimentResult r;
    r.name = config.name;
    {
        std::ostringstream col;
        col << config.errors.name() << " n=" << config.n() << " T=" << config.T;
        r.column = col.str();
    }
    r.labels = parameter_labels(config.spec);
    r.theta0 = config.theta0.to_vector();
    r.seed = config.seed;
    r.config_hash = fnv1a(config.describe());
    const Index K = r.theta0.size();
    r.replications = static_cast<int>(outcomes.size());

    const double z = boost::math::quantile(boost::math::normal(), 0.5 + 0.5 * config.coverage_level);
    Vector sum = Vector::Zero(K), abs_sum = Vector::Zero(K), sq_sum = Vector::Zero(K);
    Vector cover = Vector::Zero(K), cover_n = Vector::Zero(K), se_sum = Vector::Zero(K);
    for (const auto& o : outcomes) {
        if (!o.ok) {
            ++r.failures;
            ++r.failure_reasons[o.failure];
            continue;
        }
        ++r.successes;
        const Vector err = o.theta - r.theta0;
        sum += err;
        abs_sum += err.cwiseAbs();
        sq_sum += err.cwiseProduct(err);
        for (Index i = 0; i < K; ++i) {
            if (i < o.se.size() && std::isfinite(o.se(i))) {
                cover_n(i) += 1.0;
                se_sum(i) += o.se(i);
                if (std::abs(err(i)) <= z * o.se(i)) cover(i) += 1.0;
            }
        }
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (r.successes > 0) {
        const double s = r.successes;
        r.bias = sum / s;
        r.mae = abs_sum / s;
        r.sd = Vector(K);
        for (Index i = 0; i < K; ++i) {
            const double var = r.successes > 1 ? (sq_sum(i) - s * r.bias(i) * r.bias(i)) / (s - 1.0) : 0.0;
            r.sd(i) = std::sqrt(std::max(var, 0.0));
        }
    } else {
        r.bias = r.mae = r.sd = Vector::Constant(K, nan);
    }
    r.coverage = Vector(K);
    r.mean_se = Vector(K);
    for (Index i = 0; i < K; ++i) {
        r.coverage(i) = cover_n(i) > 0 ? cover(i) / cover_n(i) : nan;
        r.mean_se(i) = cover_n(i) > 0 ? se_sum(i) / cover_n(i) : nan;
    }
    r.unreliable = r.replications > 0 &&
                   static_cast<double>(r.failures) > kUnreliableFailureShare * r.replications;
    r.outcomes = std::move(outcomes);
    return r;
}

ExperimentResult run_experiment(const ExperimentConfig& input) {
    ExperimentConfig config = input;
    if (!config.weights) {
        if (config.design == Design::Custom)
            throw InvalidArgument("custom experiments need explicit weights");
        config.weights = design_config(config.design, config.side, config.T, config.errors).weights;
    }
    config.validate();

    const auto start = std::chrono::steady_clock::now();
    const auto reps = static_cast<std::size_t>(config.replications);
    std::vector<ReplicationOutcome> outcomes(reps);
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t i = next.fetch_add(1); i < reps; i = next.fetch_add(1))
            outcomes[i] = run_replication(config, i);
    };
    const int nthreads = std::max(1, std::min<int>(config.workers, config.replications));
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(nthreads));
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    ExperimentResult r = aggregate(config, std::move(outcomes));
    r.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

std::string emit_table(const std::vector<ExperimentResult>& results, TableFormat format) {
    std::ostringstream os;
    const bool csv = format == TableFormat::Csv;
    std::vector<const ExperimentResult*> usable;
    for (const auto& r : results)
        if (r.successes > 0) usable.push_back(&r);
    if (usable.empty()) {
        if (csv)
            os << "block,parameter,value\nno data,,\n";
        else
            os << "no data: no successful replications\n";
        return os.str();
    }
    const auto& labels = usable.front()->labels;
    auto fmt = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", v);
        return std::string(buf);
    };
    if (csv) {
        os << "block,parameter";
        for (const auto* r : usable) os << ',' << r->column;
        os << '\n';
        for (const char* block : {"bias", "mae"}) {
            for (std::size_t i = 0; i < labels.size(); ++i) {
                os << block << ',' << labels[i];
                for (const auto* r : usable) {
                    const Vector& v = std::string(block) == "bias" ? r->bias : r->mae;
                    os << ',' << (i < static_cast<std::size_t>(v.size()) ? fmt(v(static_cast<Index>(i))) : "");
                }
                os << '\n';
            }
        }
        return os.str();
    }
    std::size_t width = 10;
    for (const auto* r : usable) width = std::max(width, r->column.size() + 2);
    for (const char* block : {"Bias", "MAE"}) {
        os << std::left << std::setw(6) << block << std::setw(10) << "";
        for (const auto* r : usable) os << std::right << std::setw(static_cast<int>(width)) << r->column;
        os << '\n';
        for (std::size_t i = 0; i < labels.size(); ++i) {
            os << std::left << std::setw(6) << "" << std::setw(10) << labels[i];
            for (const auto* r : usable) {
                const Vector& v = std::string(block) == "Bias" ? r->bias : r->mae;
                const std::string cell =
                    i < static_cast<std::size_t>(v.size()) ? fmt(v(static_cast<Index>(i))) : "-";
                os << std::right << std::setw(static_cast<int>(width)) << cell;
            }
            os << '\n';
        }
    }
    return os.str();
}

std::uint64_t fnv1a(const std::string& text) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string manifest_json(const ExperimentConfig& config, const ExperimentResult& result) {
    nlohmann::json j;
    j["name"] = config.name;
    j["version"] = version();
    j["seed"] = config.seed;
    char hash[24];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(result.config_hash));
    j["config_hash"] = hash;
    j["config"] = config.describe();
    j["replications"] = result.replications;
    j["successes"] = result.successes;
    j["failures"] = result.failures;
    j["failure_reasons"] = result.failure_reasons;
    j["unreliable"] = result.unreliable;
    j["wall_seconds"] = result.wall_seconds;
    const std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    j["timestamp"] = stamp;
    return j.dump(2) + "\n";
}

}  // namespace starch
