#include "simcal/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

namespace simcal {
namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos
                                                                                             : comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ParseError(where + ": " + what);
}

std::int64_t parse_int(const std::string& field, const std::string& where, const char* column) {
    std::int64_t v = 0;
    const auto* end = field.data() + field.size();
    const auto res = std::from_chars(field.data(), end, v);
    if (field.empty() || res.ec != std::errc() || res.ptr != end) {
        fail(where, std::string("column '") + column + "': expected an integer, got '" + field + "'");
    }
    return v;
}

double parse_double(const std::string& field, const std::string& where, const char* column) {
    // from_chars for double is not available on every standard library we target.
    std::istringstream ss(field);
    ss.imbue(std::locale::classic());
    double v = 0.0;
    ss >> v;
    if (field.empty() || ss.fail() || !ss.eof()) {
        fail(where, std::string("column '") + column + "': expected a number, got '" + field + "'");
    }
    return v;
}

// Reads the header, then calls `row` for each non-blank data line.
template <class RowFn>
void for_each_row(std::istream& in, const std::string& name, const std::vector<std::string>& header, RowFn row) {
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_fields(line);
        const std::string where = name + ":" + std::to_string(line_no);
        if (!have_header) {
            if (fields != header) {
                std::string expected;
                for (const auto& h : header) expected += (expected.empty() ? "" : ",") + h;
                fail(where, "expected header '" + expected + "'");
            }
            have_header = true;
            continue;
        }
        if (fields.size() != header.size()) {
            fail(where, "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
        }
        row(fields, where);
    }
    if (!have_header) fail(name, "missing header");
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    return in;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    return out;
}

}  // namespace

std::vector<DesignPoint> read_designs(std::istream& in, const std::string& source_name) {
    std::vector<DesignPoint> out;
    std::set<std::int64_t> seen;
    for_each_row(in, source_name, {"design_id", "coord"}, [&](const auto& f, const std::string& where) {
        const auto id = parse_int(f[0], where, "design_id");
        const double coord = parse_double(f[1], where, "coord");
        if (!seen.insert(id).second) fail(where, "duplicate design_id " + std::to_string(id));
        out.push_back({id, coord});
    });
    if (out.empty()) fail(source_name, "no design points");
    return out;
}

std::vector<DesignPoint> read_designs_file(const std::string& path) {
    auto in = open_in(path);
    return read_designs(in, path);
}

void write_designs(std::ostream& out, const std::vector<DesignPoint>& designs) {
    out << "design_id,coord\n";
    out.precision(17);
    for (const auto& d : designs) out << d.id << ',' << d.coord << '\n';
}

void write_designs_file(const std::string& path, const std::vector<DesignPoint>& designs) {
    auto out = open_out(path);
    write_designs(out, designs);
}

std::vector<CountRecord> read_count_records(std::istream& in, const std::string& source_name) {
    std::vector<CountRecord> out;
    for_each_row(in, source_name, {"design_id", "outcome_id", "count", "source"},
                 [&](const auto& f, const std::string& where) {
                     CountRecord r;
                     r.design_id = parse_int(f[0], where, "design_id");
                     r.outcome_id = parse_int(f[1], where, "outcome_id");
                     r.count = parse_int(f[2], where, "count");
                     if (f[3] == "real") {
                         r.source = CountSource::real;
                     } else if (f[3] == "sim") {
                         r.source = CountSource::sim;
                     } else {
                         fail(where, "column 'source': expected 'real' or 'sim', got '" + f[3] + "'");
                     }
                     if (r.outcome_id < 0) fail(where, "column 'outcome_id': must be nonnegative");
                     if (r.count < 0) fail(where, "column 'count': must be nonnegative");
                     r.origin = where;
                     out.push_back(std::move(r));
                 });
    return out;
}

CountTables assemble_counts(const std::vector<CountRecord>& records, const std::vector<DesignPoint>& designs,
                            int outcomes) {
    std::map<std::int64_t, Eigen::Index> row_of;
    for (std::size_t j = 0; j < designs.size(); ++j) row_of[designs[j].id] = static_cast<Eigen::Index>(j);

    std::int64_t m = outcomes;
    if (m <= 0) {
        m = 0;
        for (const auto& r : records) m = std::max(m, r.outcome_id + 1);
    }
    if (m < 2) throw ParseError("count data must cover at least two outcome categories");

    const auto s = static_cast<Eigen::Index>(designs.size());
    CountTables t{CountTable::Zero(s, m), CountTable::Zero(s, m)};
    std::set<std::tuple<std::int64_t, std::int64_t, int>> seen;
    for (const auto& r : records) {
        const auto it = row_of.find(r.design_id);
        if (it == row_of.end()) fail(r.origin, "unknown design_id " + std::to_string(r.design_id));
        if (r.outcome_id >= m) fail(r.origin, "outcome_id " + std::to_string(r.outcome_id) + " out of range");
        if (!seen.insert({r.design_id, r.outcome_id, static_cast<int>(r.source)}).second) {
            fail(r.origin, "duplicate cell for design " + std::to_string(r.design_id) + ", outcome " +
                               std::to_string(r.outcome_id));
        }
        auto& table = r.source == CountSource::real ? t.real : t.sim;
        table(it->second, r.outcome_id) = r.count;
    }
    return t;
}

CountTables read_counts_files(const std::vector<std::string>& paths, const std::vector<DesignPoint>& designs,
                              int outcomes) {
    std::vector<CountRecord> all;
    for (const auto& path : paths) {
        auto in = open_in(path);
        auto recs = read_count_records(in, path);
        all.insert(all.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
    }
    return assemble_counts(all, designs, outcomes);
}

void write_counts(std::ostream& out, const std::vector<DesignPoint>& designs, const CountTable& real,
                  const CountTable& sim) {
    const auto s = static_cast<Eigen::Index>(designs.size());
    if (real.rows() != s || sim.rows() != s || real.cols() != sim.cols()) {
        throw std::invalid_argument("count tables do not match the design list");
    }
    out << "design_id,outcome_id,count,source\n";
    const auto emit = [&](const CountTable& t, const char* tag) {
        for (Eigen::Index j = 0; j < s; ++j) {
            for (Eigen::Index i = 0; i < t.cols(); ++i) {
                out << designs[static_cast<std::size_t>(j)].id << ',' << i << ',' << t(j, i) << ',' << tag << '\n';
            }
        }
    };
    emit(real, "real");
    emit(sim, "sim");
}

void write_counts_file(const std::string& path, const std::vector<DesignPoint>& designs, const CountTable& real,
                       const CountTable& sim) {
    auto out = open_out(path);
    write_counts(out, designs, real, sim);
}

ProblemData load_problem(const std::string& designs_path, const std::vector<std::string>& count_paths,
                         int outcomes) {
    const auto designs = read_designs_file(designs_path);
    auto tables = read_counts_files(count_paths, designs, outcomes);
    std::vector<double> coords;
    coords.reserve(designs.size());
    for (const auto& d : designs) coords.push_back(d.coord);
    return ProblemData(std::move(coords), std::move(tables.real), std::move(tables.sim));
}

}  // namespace simcal
