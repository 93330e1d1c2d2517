#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace coadapt {

/// Quotes a field per RFC 4180 when it contains a comma, quote or newline.
std::string csv_field(std::string_view s);

/// Splits one CSV line, honoring quoted fields. Throws std::invalid_argument
/// on an unterminated quote.
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace coadapt
