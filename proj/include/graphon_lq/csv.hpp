// ---------------------------------------------------------------------------
// csv.hpp
//
// Deterministic CSV output. Numbers are formatted with 17 significant digits
// through std::to_chars, which is locale-independent and enough to
// round-trip any double, so a data file is a pure function of the run:
// identical configs and seeds produce byte-identical files. No timestamps,
// hostnames, or version strings belong in these tables.
// ---------------------------------------------------------------------------
#pragma once

#include <string>
#include <vector>

namespace glq {

// One double in "general" format, 17 significant digits, locale-free.
// Non-finite values render as inf/-inf/nan (plotters and diff both cope).
[[nodiscard]] std::string csv_number(double value);

// Writes `header` then the numeric rows to `path` (LF line endings, parent
// directories created). Throws config_error when the file cannot be written
// or a row's width differs from the header's.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

}  // namespace glq
