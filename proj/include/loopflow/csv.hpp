#pragma once

#include <cstdio>
#include <fstream>
#include <string>

#include "loopflow/errors.hpp"

namespace loopflow {

/// 15 significant digits, '.' decimal separator; the fixed numeric format of
/// every CSV artifact.
inline std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.15g", v);
    return buf;
}

/// Line-oriented CSV writer with LF endings regardless of platform.
class CsvWriter {
   public:
    explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw FileNotFound(path);
    }

    void raw_line(const std::string& line) { out_ << line << "\n"; }

    void field(const std::string& text) {
        if (!first_) out_ << ",";
        out_ << text;
        first_ = false;
    }
    void field(double v) { field(format_number(v)); }
    void field(long v) { field(std::to_string(v)); }

    void end_line() {
        out_ << "\n";
        first_ = true;
    }

   private:
    std::ofstream out_;
    bool          first_ = true;
};

}  // namespace loopflow
