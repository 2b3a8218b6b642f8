#include "graphon_lq/csv.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <system_error>

#include "graphon_lq/errors.hpp"

namespace glq {

std::string csv_number(double value) {
    // 17 significant digits round-trip every double; to_chars never consults
    // the locale, so the byte sequence is platform-stable for a given value.
    char buffer[64];
    const auto result =
        std::to_chars(buffer, buffer + sizeof(buffer), value, std::chars_format::general, 17);
    return {buffer, result.ptr};
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    const std::filesystem::path target(path);
    if (target.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(target.parent_path(), ec);
        if (ec)
            throw config_error("cannot create directory " + target.parent_path().string() + ": " +
                               ec.message());
    }
    std::ofstream out(target, std::ios::binary);
    if (!out) throw config_error("cannot open " + path + " for writing");

    std::string line;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i > 0) line += ',';
        line += header[i];
    }
    line += '\n';
    out << line;

    for (const auto& row : rows) {
        if (row.size() != header.size())
            throw config_error("row width " + std::to_string(row.size()) + " does not match the " +
                               std::to_string(header.size()) + "-column header of " + path);
        line.clear();
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i > 0) line += ',';
            line += csv_number(row[i]);
        }
        line += '\n';
        out << line;
    }
    out.flush();
    if (!out) throw config_error("write to " + path + " failed");
}

}  // namespace glq
