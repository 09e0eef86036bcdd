#pragma once

// Standalone SVG charts for result tables.

#include <string>
#include <string_view>
#include <vector>

#include "negmt/report.hpp"

namespace negmt {

enum class ChartKind { kBars, kLines };

std::string_view to_string(ChartKind kind);
ChartKind parse_chart_kind(std::string_view name);

/// Text columns form the x-axis categories (joined with " / "); each entry of
/// `series` (default: every numeric column) becomes one bar group member or
/// one line. Throws ValidationError on an empty table, an unknown or
/// non-numeric series column, or a table without numeric columns.
std::string emit_chart(const Table& table, ChartKind kind,
                       const std::vector<std::string>& series = {});

}  // namespace negmt
