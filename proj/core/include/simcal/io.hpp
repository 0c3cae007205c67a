#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "simcal/posterior.hpp"

namespace simcal {

/// Raised for malformed input files; the message carries file and row context.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DesignPoint {
    std::int64_t id;
    double coord;
};

/// `design_id,coord` rows, in file order.
std::vector<DesignPoint> read_designs(std::istream& in, const std::string& source_name = "<stream>");
std::vector<DesignPoint> read_designs_file(const std::string& path);
void write_designs(std::ostream& out, const std::vector<DesignPoint>& designs);

struct CountTables {
    CountTable real;
    CountTable sim;
};

enum class CountSource { real, sim };

struct CountRecord {
    std::int64_t design_id;
    std::int64_t outcome_id;
    std::int64_t count;
    CountSource source;
    std::string origin;  // "file:row" for error messages
};

/// `design_id,outcome_id,count,source` rows. Outcome ids are 0-based.
std::vector<CountRecord> read_count_records(std::istream& in, const std::string& source_name = "<stream>");

/// Cells not listed are zero; a cell listed twice is an error. `outcomes` = 0
/// infers m as the largest outcome id + 1.
CountTables assemble_counts(const std::vector<CountRecord>& records, const std::vector<DesignPoint>& designs,
                            int outcomes = 0);
CountTables read_counts_files(const std::vector<std::string>& paths, const std::vector<DesignPoint>& designs,
                              int outcomes = 0);

/// Writes every cell of both tables (zeros included) so the file fixes m.
void write_counts(std::ostream& out, const std::vector<DesignPoint>& designs, const CountTable& real,
                  const CountTable& sim);
void write_counts_file(const std::string& path, const std::vector<DesignPoint>& designs, const CountTable& real,
                       const CountTable& sim);
void write_designs_file(const std::string& path, const std::vector<DesignPoint>& designs);

ProblemData load_problem(const std::string& designs_path, const std::vector<std::string>& count_paths,
                         int outcomes = 0);

}  // namespace simcal
