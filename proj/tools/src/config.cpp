#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "simcal/commands.hpp"

namespace simcal::cli {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ConfigError("config " + where + ": " + what);
}

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) fail(where, "expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : obj.items()) {
        if (!ok.count(key)) fail(where + "/" + key, "unknown key");
    }
}

double number(const json& v, const std::string& where) {
    if (!v.is_number()) fail(where, "expected a number");
    return v.get<double>();
}

std::int64_t integer(const json& v, const std::string& where) {
    if (!v.is_number_integer()) fail(where, "expected an integer");
    return v.get<std::int64_t>();
}

std::uint64_t unsigned_integer(const json& v, const std::string& where) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        fail(where, "expected a nonnegative integer");
    }
    return v.get<std::uint64_t>();
}

bool boolean(const json& v, const std::string& where) {
    if (!v.is_boolean()) fail(where, "expected true or false");
    return v.get<bool>();
}

std::string string(const json& v, const std::string& where) {
    if (!v.is_string()) fail(where, "expected a string");
    return v.get<std::string>();
}

template <class T, class Fn>
void read_opt(const json& obj, const char* key, const std::string& where, T& target, Fn convert) {
    if (obj.contains(key)) target = static_cast<T>(convert(obj.at(key), where + "/" + key));
}

std::vector<double> number_list(const json& v, const std::string& where) {
    if (!v.is_array()) fail(where, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t k = 0; k < v.size(); ++k) out.push_back(number(v[k], where + "/" + std::to_string(k)));
    return out;
}

std::vector<std::int64_t> integer_list(const json& v, const std::string& where) {
    if (!v.is_array()) fail(where, "expected an array of integers");
    std::vector<std::int64_t> out;
    for (std::size_t k = 0; k < v.size(); ++k) out.push_back(integer(v[k], where + "/" + std::to_string(k)));
    return out;
}

Table number_table(const json& v, const std::string& where) {
    if (!v.is_array() || v.empty() || !v[0].is_array()) fail(where, "expected a non-empty array of rows");
    const auto rows = static_cast<Eigen::Index>(v.size());
    const auto cols = static_cast<Eigen::Index>(v[0].size());
    Table t(rows, cols);
    for (Eigen::Index j = 0; j < rows; ++j) {
        const std::string row_where = where + "/" + std::to_string(j);
        const auto row = number_list(v[static_cast<std::size_t>(j)], row_where);
        if (static_cast<Eigen::Index>(row.size()) != cols) fail(row_where, "ragged table");
        for (Eigen::Index i = 0; i < cols; ++i) t(j, i) = row[static_cast<std::size_t>(i)];
    }
    return t;
}

Matrix number_matrix(const json& v, const std::string& where) {
    const Table t = number_table(v, where);
    return Matrix(t);
}

void parse_prior(const json& p, const std::string& where, RunConfig& cfg) {
    check_keys(p, where, {"lambda_d", "lambda_p", "rho_design", "rho_outcome", "jitter", "matrices"});
    read_opt(p, "lambda_d", where, cfg.prior.lambda_d, number);
    read_opt(p, "lambda_p", where, cfg.prior.lambda_p, number);
    read_opt(p, "rho_design", where, cfg.prior.rho_design, number);
    read_opt(p, "rho_outcome", where, cfg.prior.rho_outcome, number);
    read_opt(p, "jitter", where, cfg.prior.jitter, number);
    if (p.contains("matrices")) cfg.matrices_path = string(p.at("matrices"), where + "/matrices");
    if (!(cfg.prior.lambda_d > 0.0) || !(cfg.prior.lambda_p > 0.0)) fail(where, "lambda values must be positive");
    if (!(cfg.prior.jitter >= 0.0)) fail(where + "/jitter", "must be nonnegative");
}

void parse_threshold(const json& t, const std::string& where, RunConfig& cfg) {
    check_keys(t, where, {"q", "ell"});
    if (t.contains("q") == t.contains("ell")) fail(where, "give exactly one of 'q' or 'ell'");
    try {
        cfg.threshold = t.contains("q") ? ThresholdSpec::from_level(number(t.at("q"), where + "/q"))
                                        : ThresholdSpec::from_radius(number(t.at("ell"), where + "/ell"));
    } catch (const std::invalid_argument& e) {
        fail(where, e.what());
    }
}

FunctionalSpec parse_functional(const json& f, const std::string& where) {
    check_keys(f, where, {"type", "values", "design", "z", "name"});
    FunctionalSpec spec;
    const std::string type = f.contains("type") ? string(f.at("type"), where + "/type") : "indicators";
    if (type == "indicators") {
        spec.kind = FunctionalSpec::Kind::indicators;
    } else if (type == "expectation") {
        spec.kind = FunctionalSpec::Kind::expectation;
        if (!f.contains("values")) fail(where, "expectation functional needs 'values'");
        spec.values = number_list(f.at("values"), where + "/values");
    } else if (type == "explicit") {
        spec.kind = FunctionalSpec::Kind::explicit_z;
        if (!f.contains("z")) fail(where, "explicit functional needs 'z'");
        spec.z = number_table(f.at("z"), where + "/z");
    } else {
        fail(where + "/type", "expected 'indicators', 'expectation' or 'explicit', got '" + type + "'");
    }
    if (f.contains("design")) spec.design = static_cast<int>(integer(f.at("design"), where + "/design"));
    if (f.contains("name")) spec.name = string(f.at("name"), where + "/name");
    return spec;
}

void parse_solver(const json& s, const std::string& where, SolverOptions& o) {
    check_keys(s, where, {"max_iterations", "gradient_tolerance", "step_rule", "fixed_step", "restarts", "seed",
                          "interior_floor", "barrier_mu0", "barrier_shrink", "barrier_gap_tolerance",
                          "barrier_max_rounds", "max_alternations"});
    read_opt(s, "max_iterations", where, o.max_iterations, integer);
    read_opt(s, "gradient_tolerance", where, o.gradient_tolerance, number);
    if (s.contains("step_rule")) {
        const std::string rule = string(s.at("step_rule"), where + "/step_rule");
        if (rule == "fixed") {
            o.step_rule = StepRule::fixed;
        } else if (rule == "backtracking") {
            o.step_rule = StepRule::backtracking;
        } else {
            fail(where + "/step_rule", "expected 'fixed' or 'backtracking'");
        }
    }
    read_opt(s, "fixed_step", where, o.fixed_step, number);
    read_opt(s, "restarts", where, o.restarts, integer);
    read_opt(s, "seed", where, o.seed, unsigned_integer);
    read_opt(s, "interior_floor", where, o.interior_floor, number);
    read_opt(s, "barrier_mu0", where, o.barrier_mu0, number);
    read_opt(s, "barrier_shrink", where, o.barrier_shrink, number);
    read_opt(s, "barrier_gap_tolerance", where, o.barrier_gap_tolerance, number);
    read_opt(s, "barrier_max_rounds", where, o.barrier_max_rounds, integer);
    read_opt(s, "max_alternations", where, o.max_alternations, integer);
    try {
        o.validate();
    } catch (const std::invalid_argument& e) {
        fail(where, e.what());
    }
}

void parse_sampler(const json& s, const std::string& where, SamplerOptions& o) {
    check_keys(s, where, {"n_draws", "burn_in", "step_scale", "thin", "adapt", "target_acceptance", "seed"});
    read_opt(s, "n_draws", where, o.n_draws, integer);
    read_opt(s, "burn_in", where, o.burn_in, integer);
    read_opt(s, "step_scale", where, o.step_scale, number);
    read_opt(s, "thin", where, o.thin, integer);
    read_opt(s, "adapt", where, o.adapt, boolean);
    read_opt(s, "target_acceptance", where, o.target_acceptance, number);
    read_opt(s, "seed", where, o.seed, unsigned_integer);
}

SchemeConfig parse_scheme(const json& s, const std::string& where) {
    check_keys(s, where, {"pi", "xi", "coords", "sim_counts", "sim_pi", "sim_n"});
    if (!s.contains("pi") || !s.contains("xi")) fail(where, "scheme needs 'pi' and 'xi'");
    SchemeConfig sc;
    sc.scheme.pi = number_table(s.at("pi"), where + "/pi");
    sc.scheme.xi = number_list(s.at("xi"), where + "/xi");
    const auto rows = sc.scheme.pi.rows();
    const auto cols = sc.scheme.pi.cols();
    if (s.contains("coords")) {
        sc.coords = number_list(s.at("coords"), where + "/coords");
    } else {
        for (Eigen::Index j = 0; j < rows; ++j) sc.coords.push_back(static_cast<double>(j));
    }
    if (static_cast<Eigen::Index>(sc.coords.size()) != rows) fail(where + "/coords", "one coordinate per design");
    if (s.contains("sim_counts")) {
        const Table t = number_table(s.at("sim_counts"), where + "/sim_counts");
        if (t.rows() != rows || t.cols() != cols) fail(where + "/sim_counts", "shape must match 'pi'");
        if ((t.array() < 0).any() || (t.array() != t.array().round()).any()) {
            fail(where + "/sim_counts", "counts must be nonnegative integers");
        }
        sc.sim_counts = t.cast<std::int64_t>();
    } else {
        const Table sim_pi = s.contains("sim_pi") ? number_table(s.at("sim_pi"), where + "/sim_pi") : sc.scheme.pi;
        if (sim_pi.rows() != rows || sim_pi.cols() != cols) fail(where + "/sim_pi", "shape must match 'pi'");
        const double sim_n = s.contains("sim_n") ? static_cast<double>(integer(s.at("sim_n"), where + "/sim_n")) : 0.0;
        sc.sim_counts = (sim_pi.array() * sim_n).round().cast<std::int64_t>();
    }
    try {
        sc.scheme.validate();
    } catch (const std::invalid_argument& e) {
        fail(where, e.what());
    }
    return sc;
}

void parse_call_center(const json& c, const std::string& where, CallCenterConfig& o) {
    check_keys(c, where, {"arrival_rate_mean", "arrival_rate_var", "rate_parameterisation", "random_arrival_rate",
                          "service_mean", "abandonment", "abandon_mean", "count_abandoned", "horizon", "warmup",
                          "bins"});
    read_opt(c, "arrival_rate_mean", where, o.arrival_rate_mean, number);
    read_opt(c, "arrival_rate_var", where, o.arrival_rate_var, number);
    if (c.contains("rate_parameterisation")) {
        const std::string v = string(c.at("rate_parameterisation"), where + "/rate_parameterisation");
        if (v == "moments") {
            o.rate_parameterisation = LognormalParameterisation::moments;
        } else if (v == "log_scale") {
            o.rate_parameterisation = LognormalParameterisation::log_scale;
        } else {
            fail(where + "/rate_parameterisation", "expected 'moments' or 'log_scale'");
        }
    }
    read_opt(c, "random_arrival_rate", where, o.random_arrival_rate, boolean);
    read_opt(c, "service_mean", where, o.service_mean, number);
    read_opt(c, "abandonment", where, o.abandonment, boolean);
    read_opt(c, "abandon_mean", where, o.abandon_mean, number);
    read_opt(c, "count_abandoned", where, o.count_abandoned, boolean);
    read_opt(c, "horizon", where, o.horizon, number);
    read_opt(c, "warmup", where, o.warmup, number);
    if (c.contains("bins")) o.bins = number_list(c.at("bins"), where + "/bins");
}

GeneratorConfig parse_generator(const json& g, const std::string& where) {
    check_keys(g, where, {"type", "servers", "sim_reps", "real_reps", "call_center", "breaks"});
    GeneratorConfig gc;
    const std::string type = g.contains("type") ? string(g.at("type"), where + "/type") : "call_center";
    if (type == "call_center") {
        gc.kind = GeneratorConfig::Kind::call_center;
    } else if (type == "true_system") {
        gc.kind = GeneratorConfig::Kind::true_system;
    } else if (type == "multinomial") {
        gc.kind = GeneratorConfig::Kind::multinomial;
    } else {
        fail(where + "/type", "expected 'call_center', 'true_system' or 'multinomial'");
    }
    if (g.contains("servers")) {
        gc.servers.clear();
        for (auto v : integer_list(g.at("servers"), where + "/servers")) gc.servers.push_back(static_cast<int>(v));
        if (gc.servers.empty()) fail(where + "/servers", "at least one server level is required");
    }
    read_opt(g, "sim_reps", where, gc.sim_reps, integer);
    if (gc.sim_reps < 0) fail(where + "/sim_reps", "must be nonnegative");
    if (g.contains("real_reps")) {
        gc.real_reps = integer_list(g.at("real_reps"), where + "/real_reps");
        if (gc.real_reps.size() != gc.servers.size()) fail(where + "/real_reps", "one entry per server level");
    }
    if (g.contains("call_center")) parse_call_center(g.at("call_center"), where + "/call_center", gc.model.base);
    if (g.contains("breaks")) {
        const json& b = g.at("breaks");
        const std::string bw = where + "/breaks";
        check_keys(b, bw, {"interarrival_mean", "duration_mean", "break_trigger_idle", "stop_trigger_idle"});
        read_opt(b, "interarrival_mean", bw, gc.model.break_interarrival_mean, number);
        read_opt(b, "duration_mean", bw, gc.model.break_duration_mean, number);
        read_opt(b, "break_trigger_idle", bw, gc.model.break_trigger_idle, integer);
        read_opt(b, "stop_trigger_idle", bw, gc.model.stop_trigger_idle, integer);
    }
    try {
        gc.model.validate();
    } catch (const std::invalid_argument& e) {
        fail(where, e.what());
    }
    return gc;
}

}  // namespace

std::filesystem::path RunConfig::resolve(const std::string& path) const {
    const std::filesystem::path p(path);
    return p.is_absolute() ? p : base_dir / p;
}

RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    check_keys(root, "/", {"schema_version", "data", "prior", "threshold", "functionals", "solver", "sampler",
                           "convexity", "scheme", "experiment", "generator", "output_dir", "seed", "threads"});
    RunConfig cfg;
    cfg.base_dir = base_dir;
    if (!root.contains("schema_version")) fail("/schema_version", "missing");
    cfg.schema_version = static_cast<int>(integer(root.at("schema_version"), "/schema_version"));
    if (cfg.schema_version != kSchemaVersion) {
        fail("/schema_version", "unsupported version " + std::to_string(cfg.schema_version));
    }
    read_opt(root, "seed", "", cfg.seed, unsigned_integer);
    cfg.solver.seed = cfg.seed;
    cfg.sampler.seed = cfg.seed;
    read_opt(root, "threads", "", cfg.threads, integer);
    if (cfg.threads < 1) fail("/threads", "must be at least 1");
    read_opt(root, "output_dir", "", cfg.output_dir, string);

    if (root.contains("data")) {
        const json& d = root.at("data");
        check_keys(d, "/data", {"designs", "counts", "outcomes"});
        if (d.contains("designs")) cfg.designs_path = string(d.at("designs"), "/data/designs");
        if (d.contains("counts")) {
            const json& c = d.at("counts");
            if (c.is_string()) {
                cfg.count_paths.push_back(c.get<std::string>());
            } else if (c.is_array()) {
                for (std::size_t k = 0; k < c.size(); ++k) {
                    cfg.count_paths.push_back(string(c[k], "/data/counts/" + std::to_string(k)));
                }
            } else {
                fail("/data/counts", "expected a path or an array of paths");
            }
        }
        read_opt(d, "outcomes", "/data", cfg.outcomes, integer);
        if (cfg.designs_path.has_value() != !cfg.count_paths.empty()) {
            fail("/data", "'designs' and 'counts' must be given together");
        }
    }
    if (root.contains("prior")) parse_prior(root.at("prior"), "/prior", cfg);
    if (root.contains("threshold")) parse_threshold(root.at("threshold"), "/threshold", cfg);
    if (root.contains("functionals")) {
        const json& f = root.at("functionals");
        if (!f.is_array()) fail("/functionals", "expected an array");
        for (std::size_t k = 0; k < f.size(); ++k) {
            cfg.functionals.push_back(parse_functional(f[k], "/functionals/" + std::to_string(k)));
        }
    }
    if (root.contains("solver")) parse_solver(root.at("solver"), "/solver", cfg.solver);
    if (root.contains("sampler")) parse_sampler(root.at("sampler"), "/sampler", cfg.sampler);
    if (root.contains("convexity")) {
        check_keys(root.at("convexity"), "/convexity", {"pairs"});
        read_opt(root.at("convexity"), "pairs", "/convexity", cfg.convexity_pairs, integer);
    }
    if (root.contains("scheme")) cfg.scheme = parse_scheme(root.at("scheme"), "/scheme");
    if (root.contains("experiment")) {
        const json& e = root.at("experiment");
        check_keys(e, "/experiment", {"replications", "n", "n_ladder"});
        read_opt(e, "replications", "/experiment", cfg.experiment.replications, integer);
        read_opt(e, "n", "/experiment", cfg.experiment.n, integer);
        if (e.contains("n_ladder")) cfg.experiment.n_ladder = integer_list(e.at("n_ladder"), "/experiment/n_ladder");
        if (cfg.experiment.replications < 1) fail("/experiment/replications", "must be at least 1");
    }
    if (root.contains("generator")) cfg.generator = parse_generator(root.at("generator"), "/generator");

    // Referenced files must exist now, not halfway through a batch.
    const auto require = [&](const std::string& path, const std::string& where) {
        if (!std::filesystem::exists(cfg.resolve(path))) fail(where, "file '" + path + "' does not exist");
    };
    if (cfg.designs_path) require(*cfg.designs_path, "/data/designs");
    for (std::size_t k = 0; k < cfg.count_paths.size(); ++k) {
        require(cfg.count_paths[k], "/data/counts/" + std::to_string(k));
    }
    if (cfg.matrices_path) {
        require(*cfg.matrices_path, "/prior/matrices");
        std::ifstream in(cfg.resolve(*cfg.matrices_path));
        json m;
        try {
            m = json::parse(in);
        } catch (const json::parse_error& e) {
            fail("/prior/matrices", std::string("not valid JSON: ") + e.what());
        }
        check_keys(m, "matrices", {"R_d", "R_p"});
        if (m.contains("R_d")) cfg.prior.R_d = number_matrix(m.at("R_d"), "matrices/R_d");
        if (m.contains("R_p")) cfg.prior.R_p = number_matrix(m.at("R_p"), "matrices/R_p");
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str(), path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

ProblemData load_configured_problem(const RunConfig& cfg, std::vector<DesignPoint>* designs) {
    if (!cfg.designs_path) throw ConfigError("config /data: this command needs 'designs' and 'counts'");
    const auto points = read_designs_file(cfg.resolve(*cfg.designs_path).string());
    std::vector<std::string> paths;
    for (const auto& p : cfg.count_paths) paths.push_back(cfg.resolve(p).string());
    auto tables = read_counts_files(paths, points, cfg.outcomes);
    std::vector<double> coords;
    for (const auto& d : points) coords.push_back(d.coord);
    if (designs) *designs = points;
    return ProblemData(std::move(coords), std::move(tables.real), std::move(tables.sim));
}

}  // namespace simcal::cli
