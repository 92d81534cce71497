#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "vacflow/errors.hpp"

namespace vacflow {

// 17 significant digits: round-trip exact for doubles, locale independent.
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw numerical_error("cannot open output file: " + path);
    return f;
}

// Minimal CSV writer with fixed column order and %.17g numbers.
class CsvWriter {
  public:
    explicit CsvWriter(const std::string& path) : f_(open_out(path)) {}

    void comment(const std::string& line) { f_ << "# " << line << "\n"; }
    void header(const std::vector<std::string>& cols) {
        for (size_t i = 0; i < cols.size(); ++i) f_ << (i ? "," : "") << cols[i];
        f_ << "\n";
    }
    void row(const std::vector<double>& vals) {
        for (size_t i = 0; i < vals.size(); ++i) f_ << (i ? "," : "") << fmt17(vals[i]);
        f_ << "\n";
    }
    void row_mixed(const std::vector<std::string>& vals) {
        for (size_t i = 0; i < vals.size(); ++i) f_ << (i ? "," : "") << vals[i];
        f_ << "\n";
    }

  private:
    std::ofstream f_;
};

} // namespace vacflow
