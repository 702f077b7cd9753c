#pragma once

#include <string>
#include <vector>

namespace margmc::csv {

/// Splits one CSV record; double-quoted fields may contain commas and "" escapes.
/// Surrounding spaces of unquoted fields and a trailing '\r' are removed.
std::vector<std::string> split(const std::string& line);

/// Quotes `field` when it contains a comma, quote or newline.
std::string quote(const std::string& field);

}  // namespace margmc::csv
