#include "semcom/csv.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

namespace semcom {

std::string format_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : os_(path, std::ios::binary), columns_(header.size()) {
    if (!os_) throw std::runtime_error("CsvWriter: cannot open " + path);
    if (header.empty()) throw std::invalid_argument("CsvWriter: empty header");
    for (size_t i = 0; i < header.size(); ++i) {
        if (i) os_ << ',';
        os_ << header[i];
    }
    os_ << '\n';
}

CsvWriter::~CsvWriter() { close(); }

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_)
        throw std::invalid_argument("CsvWriter: inconsistent column count");
    for (size_t i = 0; i < cells.size(); ++i) {
        if (i) os_ << ',';
        os_ << cells[i];
    }
    os_ << '\n';
    if (!os_) throw std::runtime_error("CsvWriter: write failed");
}

void CsvWriter::close() {
    if (os_.is_open()) os_.close();
}

}  // namespace semcom
