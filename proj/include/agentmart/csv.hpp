#pragma once

// Minimal RFC 4180 reader and writer.

#include <string>
#include <string_view>
#include <vector>

namespace agentmart::csv {

using Row = std::vector<std::string>;

// Splits text into records. Quoted fields may contain commas, doubled
// quotes and newlines. Lines starting with '#' outside quotes are skipped,
// as are blank lines.
std::vector<Row> parse(std::string_view text);

std::string quote(std::string_view field);
std::string join(const Row& fields);

}  // namespace agentmart::csv
