#pragma once

#include "ngsplat/io/fsio.hpp"

#include <cstdio>
#include <string>
#include <vector>

namespace ngs {

// Minimal CSV builder with a deterministic float format (%.9g), so repeated
// runs produce byte-identical files.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> columns) {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (i) buffer_ += ',';
            buffer_ += columns[i];
        }
        buffer_ += '\n';
    }

    static std::string format(double v) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.9g", v);
        return buf;
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) buffer_ += ',';
            buffer_ += cells[i];
        }
        buffer_ += '\n';
    }

    const std::string& text() const { return buffer_; }

    void save(const std::filesystem::path& path) const { atomic_write_file(path, buffer_); }

private:
    std::string buffer_;
};

}  // namespace ngs
