#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "simcal/commands.hpp"

namespace simcal::cli {
namespace {

using nlohmann::ordered_json;

// Non-finite values (unsolved bounds) are written as null.
ordered_json num(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

double num_from(const ordered_json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
}

bool same_number(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

ordered_json table_json(const Table& t) {
    ordered_json rows = ordered_json::array();
    for (Eigen::Index j = 0; j < t.rows(); ++j) {
        ordered_json row = ordered_json::array();
        for (Eigen::Index i = 0; i < t.cols(); ++i) row.push_back(num(t(j, i)));
        rows.push_back(std::move(row));
    }
    return rows;
}

Table table_from(const ordered_json& v) {
    if (v.empty()) return Table(0, 0);
    Table t(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(v[0].size()));
    for (Eigen::Index j = 0; j < t.rows(); ++j)
        for (Eigen::Index i = 0; i < t.cols(); ++i) t(j, i) = num_from(v[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]);
    return t;
}

template <class T>
ordered_json opt(const std::optional<T>& v) {
    return v ? ordered_json(*v) : ordered_json(nullptr);
}

template <class T>
std::optional<T> opt_from(const ordered_json& obj, const char* key) {
    if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
    return obj.at(key).get<T>();
}

ordered_json interval_json(const IntervalRecord& r) {
    ordered_json j;
    j["design_id"] = opt(r.design_id);
    j["functional"] = r.functional;
    j["q"] = opt(r.q);
    j["ell"] = num(r.ell);
    j["log_c"] = num(r.log_c);
    j["lower"] = num(r.lower);
    j["upper"] = num(r.upper);
    j["mode_value"] = num(r.mode_value);
    j["feasibility_residual"] = num(r.feasibility_residual);
    j["status"] = r.status;
    j["lower_status"] = r.lower_status;
    j["upper_status"] = r.upper_status;
    j["iterations"] = r.iterations;
    if (!r.message.empty()) j["message"] = r.message;
    return j;
}

IntervalRecord interval_from(const ordered_json& j) {
    IntervalRecord r;
    r.design_id = opt_from<std::int64_t>(j, "design_id");
    r.functional = j.at("functional").get<std::string>();
    r.q = opt_from<double>(j, "q");
    r.ell = num_from(j.at("ell"));
    r.log_c = num_from(j.at("log_c"));
    r.lower = num_from(j.at("lower"));
    r.upper = num_from(j.at("upper"));
    r.mode_value = num_from(j.at("mode_value"));
    r.feasibility_residual = num_from(j.at("feasibility_residual"));
    r.status = j.at("status").get<std::string>();
    r.lower_status = j.at("lower_status").get<std::string>();
    r.upper_status = j.at("upper_status").get<std::string>();
    r.iterations = j.at("iterations").get<int>();
    r.message = j.value("message", "");
    return r;
}

}  // namespace

bool IntervalRecord::operator==(const IntervalRecord& o) const {
    return design_id == o.design_id && functional == o.functional && q == o.q && same_number(ell, o.ell) &&
           same_number(log_c, o.log_c) && same_number(lower, o.lower) && same_number(upper, o.upper) &&
           same_number(mode_value, o.mode_value) && same_number(feasibility_residual, o.feasibility_residual) &&
           status == o.status && lower_status == o.lower_status && upper_status == o.upper_status &&
           iterations == o.iterations && message == o.message;
}

bool ModeRecord::operator==(const ModeRecord& o) const {
    const auto eq = [](const Table& a, const Table& b) {
        return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
    };
    return eq(d_star, o.d_star) && eq(p_star, o.p_star) && eq(p_tilde_star, o.p_tilde_star) &&
           log_post_star == o.log_post_star && iterations == o.iterations && converged == o.converged &&
           kkt_residual == o.kkt_residual;
}

bool ExperimentReport::same_results(const ExperimentReport& o) const {
    return schema_version == o.schema_version && command == o.command && seed == o.seed &&
           intervals == o.intervals && sampler == o.sampler && coverage == o.coverage &&
           consistency == o.consistency && convexity == o.convexity && mode == o.mode && outputs == o.outputs;
}

std::string report_to_json(const ExperimentReport& r) {
    ordered_json j;
    j["schema_version"] = r.schema_version;
    j["command"] = r.command;
    j["seed"] = r.seed;
    j["intervals"] = ordered_json::array();
    for (const auto& row : r.intervals) j["intervals"].push_back(interval_json(row));
    if (!r.sampler.empty()) {
        j["sampler_comparison"] = ordered_json::array();
        for (const auto& s : r.sampler) {
            j["sampler_comparison"].push_back({{"design_id", opt(s.design_id)},
                                               {"functional", s.functional},
                                               {"opt_lower", num(s.opt_lower)},
                                               {"opt_upper", num(s.opt_upper)},
                                               {"sample_lower", num(s.sample_lower)},
                                               {"sample_upper", num(s.sample_upper)},
                                               {"alpha", num(s.alpha)},
                                               {"effective_sample_size", num(s.effective_sample_size)}});
        }
    }
    if (r.coverage) {
        const auto& c = *r.coverage;
        j["coverage"] = {{"n", c.n},
                         {"replications", c.replications},
                         {"ell", num(c.ell)},
                         {"true_value", num(c.true_value)},
                         {"upper_coverage", num(c.upper_coverage)},
                         {"lower_coverage", num(c.lower_coverage)},
                         {"two_sided_coverage", num(c.two_sided_coverage)},
                         {"upper_se", num(c.upper_se)},
                         {"lower_se", num(c.lower_se)},
                         {"failures", c.failures}};
    }
    if (r.consistency) {
        const auto& c = *r.consistency;
        ordered_json rows = ordered_json::array();
        for (const auto& row : c.rows) {
            rows.push_back({{"n", row.n},
                            {"replications", row.replications},
                            {"mean_gap_upper", num(row.mean_gap_upper)},
                            {"mean_gap_lower", num(row.mean_gap_lower)},
                            {"slope_ratio", num(row.slope_ratio)},
                            {"mean_width", num(row.mean_width)},
                            {"mean_center_error", num(row.mean_center_error)},
                            {"contain_fraction", num(row.contain_fraction)},
                            {"ranking_fraction", row.ranking_fraction ? num(*row.ranking_fraction) : ordered_json(nullptr)},
                            {"failures", row.failures}});
        }
        j["consistency"] = {{"ell", num(c.ell)},
                            {"true_value", num(c.true_value)},
                            {"target_slope", num(c.target_slope)},
                            {"rows", rows}};
    }
    if (r.convexity) {
        const auto& c = *r.convexity;
        j["convexity"] = {{"log_c", num(c.log_c)},
                          {"pass_fraction", num(c.pass_fraction)},
                          {"pairs_tested", c.pairs_tested},
                          {"feasible_points", c.feasible_points},
                          {"degenerate", c.degenerate}};
    }
    if (r.mode) {
        const auto& m = *r.mode;
        j["mode"] = {{"log_post_star", num(m.log_post_star)},
                     {"iterations", m.iterations},
                     {"converged", m.converged},
                     {"kkt_residual", num(m.kkt_residual)},
                     {"d_star", table_json(m.d_star)},
                     {"p_star", table_json(m.p_star)},
                     {"p_tilde_star", table_json(m.p_tilde_star)}};
    }
    j["outputs"] = r.outputs;
    j["metadata"] = {{"version", r.metadata.version},
                     {"timestamp", r.metadata.timestamp},
                     {"runtime_seconds", r.metadata.runtime_seconds},
                     {"threads", r.metadata.threads}};
    return j.dump(2) + "\n";
}

ExperimentReport report_from_json(const std::string& text) {
    const ordered_json j = ordered_json::parse(text);
    ExperimentReport r;
    r.schema_version = j.at("schema_version").get<int>();
    r.command = j.at("command").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& row : j.at("intervals")) r.intervals.push_back(interval_from(row));
    if (j.contains("sampler_comparison")) {
        for (const auto& s : j.at("sampler_comparison")) {
            SamplerRecord rec;
            rec.design_id = opt_from<std::int64_t>(s, "design_id");
            rec.functional = s.at("functional").get<std::string>();
            rec.opt_lower = num_from(s.at("opt_lower"));
            rec.opt_upper = num_from(s.at("opt_upper"));
            rec.sample_lower = num_from(s.at("sample_lower"));
            rec.sample_upper = num_from(s.at("sample_upper"));
            rec.alpha = num_from(s.at("alpha"));
            rec.effective_sample_size = num_from(s.at("effective_sample_size"));
            r.sampler.push_back(std::move(rec));
        }
    }
    if (j.contains("coverage")) {
        const auto& c = j.at("coverage");
        CoverageStats s;
        s.n = c.at("n").get<std::int64_t>();
        s.replications = c.at("replications").get<int>();
        s.ell = num_from(c.at("ell"));
        s.true_value = num_from(c.at("true_value"));
        s.upper_coverage = num_from(c.at("upper_coverage"));
        s.lower_coverage = num_from(c.at("lower_coverage"));
        s.two_sided_coverage = num_from(c.at("two_sided_coverage"));
        s.upper_se = num_from(c.at("upper_se"));
        s.lower_se = num_from(c.at("lower_se"));
        s.failures = c.at("failures").get<int>();
        r.coverage = s;
    }
    if (j.contains("consistency")) {
        const auto& c = j.at("consistency");
        ConsistencyStats s;
        s.ell = num_from(c.at("ell"));
        s.true_value = num_from(c.at("true_value"));
        s.target_slope = num_from(c.at("target_slope"));
        for (const auto& row : c.at("rows")) {
            ConsistencyRow cr;
            cr.n = row.at("n").get<std::int64_t>();
            cr.replications = row.at("replications").get<int>();
            cr.mean_gap_upper = num_from(row.at("mean_gap_upper"));
            cr.mean_gap_lower = num_from(row.at("mean_gap_lower"));
            cr.slope_ratio = num_from(row.at("slope_ratio"));
            cr.mean_width = num_from(row.at("mean_width"));
            cr.mean_center_error = num_from(row.at("mean_center_error"));
            cr.contain_fraction = num_from(row.at("contain_fraction"));
            if (!row.at("ranking_fraction").is_null()) cr.ranking_fraction = row.at("ranking_fraction").get<double>();
            cr.failures = row.at("failures").get<int>();
            s.rows.push_back(cr);
        }
        r.consistency = s;
    }
    if (j.contains("convexity")) {
        const auto& c = j.at("convexity");
        r.convexity = ConvexityRecord{num_from(c.at("log_c")), num_from(c.at("pass_fraction")),
                                      c.at("pairs_tested").get<int>(), c.at("feasible_points").get<int>(),
                                      c.at("degenerate").get<bool>()};
    }
    if (j.contains("mode")) {
        const auto& m = j.at("mode");
        ModeRecord rec;
        rec.log_post_star = num_from(m.at("log_post_star"));
        rec.iterations = m.at("iterations").get<int>();
        rec.converged = m.at("converged").get<bool>();
        rec.kkt_residual = num_from(m.at("kkt_residual"));
        rec.d_star = table_from(m.at("d_star"));
        rec.p_star = table_from(m.at("p_star"));
        rec.p_tilde_star = table_from(m.at("p_tilde_star"));
        r.mode = rec;
    }
    r.outputs = j.at("outputs").get<std::vector<std::string>>();
    const auto& meta = j.at("metadata");
    r.metadata.version = meta.at("version").get<std::string>();
    r.metadata.timestamp = meta.at("timestamp").get<std::string>();
    r.metadata.runtime_seconds = meta.at("runtime_seconds").get<double>();
    r.metadata.threads = meta.at("threads").get<int>();
    return r;
}

void write_intervals_csv(const std::vector<IntervalRecord>& rows, std::ostream& out) {
    out << "design_id,functional,q,ell,log_c,lower,upper,mode_value,status,iterations\n";
    const auto old = out.precision(17);
    for (const auto& r : rows) {
        if (r.design_id) out << *r.design_id;
        out << ",\"" << r.functional << "\",";
        if (r.q) out << *r.q;
        out << ',' << r.ell << ',' << r.log_c << ',' << r.lower << ',' << r.upper << ',' << r.mode_value << ','
            << r.status << ',' << r.iterations << '\n';
    }
    out.precision(old);
}

}  // namespace simcal::cli
