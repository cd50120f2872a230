#pragma once

// File I/O: whitespace-separated point-cloud files and CSV result tables.

#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "frpe/core.hpp"

namespace frpe {

// Reads one point per line, coordinates separated by whitespace. Blank lines
// and lines starting with '#' are skipped. The first data line fixes the
// dimension; every later line must match it.
inline PointCloud load_point_cloud(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open point cloud file: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::size_t first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream fields(line);
        std::vector<double> row;
        double value = 0.0;
        while (fields >> value) row.push_back(value);
        if (!fields.eof())
            throw std::invalid_argument("cannot parse point cloud file: bad number at line " +
                                        std::to_string(line_no));
        if (row.empty()) continue;
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::invalid_argument(
                "ragged point cloud file: line " + std::to_string(line_no) + " has " +
                std::to_string(row.size()) + " columns, expected " +
                std::to_string(rows.front().size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::invalid_argument("empty point cloud file: " + path);
    Matrix coords(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t a = 0; a < rows[i].size(); ++a) coords(i, a) = rows[i][a];
    return PointCloud{std::move(coords)};  // validates d in {1,2,3} and finiteness
}

// uniform unit cube by default; optionally standard Gaussian coordinates
inline PointCloud synthetic_cloud(std::size_t l, std::size_t d, RngSeed seed,
                                  bool gaussian = false) {
    Matrix coords(l, d);
    Rng rng(seed);
    for (std::size_t i = 0; i < coords.size(); ++i)
        coords.data()[i] = gaussian ? rng.normal() : rng.uniform01();
    return PointCloud{std::move(coords)};
}

// ============================================================================
// CSV with a leading '#' configuration comment

struct CsvTable {
    std::string config_comment;  // written as "# <comment>"
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline std::string csv_num(double x) {
    std::ostringstream out;
    out.precision(10);
    out << x;
    return out.str();
}

inline void write_csv(std::ostream& out, const CsvTable& table) {
    if (!table.config_comment.empty()) out << "# " << table.config_comment << "\n";
    for (std::size_t j = 0; j < table.header.size(); ++j)
        out << table.header[j] << (j + 1 < table.header.size() ? "," : "");
    out << "\n";
    for (const auto& row : table.rows) {
        for (std::size_t j = 0; j < row.size(); ++j)
            out << row[j] << (j + 1 < row.size() ? "," : "");
        out << "\n";
    }
}

inline void write_csv_file(const std::string& path, const CsvTable& table) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot open output file: " + path);
    write_csv(out, table);
    if (!out) throw std::runtime_error("failed writing output file: " + path);
}

}  // namespace frpe
