#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace semcom {

/// Locale-independent numeric formatting: shortest representation that
/// round-trips at 17 significant digits; infinities render as "inf"/"-inf".
std::string format_number(double v);

/// CSV writer with a fixed header, UTF-8, "\n" line endings. Writing the same
/// rows twice produces identical bytes.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header);
    ~CsvWriter();

    void row(const std::vector<std::string>& cells);
    void close();

private:
    std::ofstream os_;
    size_t columns_;
};

}  // namespace semcom
