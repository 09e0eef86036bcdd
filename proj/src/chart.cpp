#include "negmt/chart.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>

#include "negmt/errors.hpp"
#include "negmt/text.hpp"

namespace negmt {

std::string_view to_string(ChartKind kind) { return kind == ChartKind::kBars ? "bars" : "lines"; }

ChartKind parse_chart_kind(std::string_view name) {
  if (name == "bars") return ChartKind::kBars;
  if (name == "lines") return ChartKind::kLines;
  throw UsageError("unknown chart kind '" + std::string(name) + "' (expected bars or lines)");
}

namespace {

constexpr double kWidth = 760, kHeight = 440;
constexpr double kLeft = 70, kRight = 170, kTop = 40, kBottom = 90;
constexpr const char* kPalette[] = {"#4e79a7", "#f28e2b", "#59a14f", "#e15759",
                                    "#76b7b2", "#edc948", "#b07aa1", "#9c755f"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  if (s == "-0.00") s = "0.00";
  return s;
}

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::optional<double> numeric(const Cell& c) {
  if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&c)) {
    if (std::isfinite(*d)) return *d;
  }
  return std::nullopt;
}

bool is_text(const Cell& c) { return std::holds_alternative<std::string>(c); }

/// Step of 1, 2 or 5 times a power of ten giving about five intervals.
double nice_step(double span) {
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10.0 * mag;
}

}  // namespace

std::string emit_chart(const Table& table, ChartKind kind, const std::vector<std::string>& series) {
  if (table.rows.empty()) throw ValidationError("cannot chart table '" + table.name + "': it is empty");

  std::vector<std::size_t> label_cols, value_cols;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    const bool text = std::any_of(table.rows.begin(), table.rows.end(),
                                  [&](const auto& r) { return is_text(r[c]); });
    if (text) label_cols.push_back(c);
  }
  if (series.empty()) {
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      if (std::find(label_cols.begin(), label_cols.end(), c) == label_cols.end()) {
        value_cols.push_back(c);
      }
    }
    // With no text column, the first numeric column (e.g. a layer index) is the x axis.
    if (label_cols.empty() && value_cols.size() > 1) {
      label_cols.push_back(value_cols.front());
      value_cols.erase(value_cols.begin());
    }
  } else {
    for (const auto& s : series) {
      const auto c = table.column_index(s);
      if (std::find(label_cols.begin(), label_cols.end(), c) != label_cols.end()) {
        throw ValidationError("column '" + s + "' of table '" + table.name + "' is not numeric");
      }
      value_cols.push_back(c);
    }
    if (label_cols.empty()) {
      for (std::size_t c = 0; c < table.columns.size(); ++c) {
        if (std::find(value_cols.begin(), value_cols.end(), c) == value_cols.end()) {
          label_cols.push_back(c);
          break;
        }
      }
    }
  }
  if (value_cols.empty()) {
    throw ValidationError("cannot chart table '" + table.name + "': no numeric column to plot");
  }

  std::vector<std::string> categories;
  for (const auto& row : table.rows) {
    std::vector<std::string> parts;
    for (auto c : label_cols) parts.push_back(format_cell(row[c]));
    if (label_cols.size() == 1 && !is_text(row[label_cols[0]])) {
      if (auto v = numeric(row[label_cols[0]])) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%g", *v);
        parts = {buf};
      }
    }
    categories.push_back(text::join(parts, " / "));
  }

  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (const auto& row : table.rows) {
    for (auto c : value_cols) {
      if (auto v = numeric(row[c])) {
        lo = std::min(lo, *v);
        hi = std::max(hi, *v);
        any = true;
      }
    }
  }
  if (!any) throw ValidationError("cannot chart table '" + table.name + "': no numeric values");
  if (hi - lo < 1e-12) hi = lo + 1.0;
  const double step = nice_step(hi - lo);
  lo = std::floor(lo / step) * step;
  hi = std::ceil(hi / step) * step;

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  const auto y_of = [&](double v) { return kTop + ph * (hi - v) / (hi - lo); };
  const double band = pw / static_cast<double>(categories.size());
  const auto x_center = [&](std::size_t i) { return kLeft + band * (static_cast<double>(i) + 0.5); };

  std::string x_label;
  {
    std::vector<std::string> names;
    for (auto c : label_cols) names.push_back(table.columns[c]);
    x_label = text::join(names, " / ");
  }
  std::string y_label = value_cols.size() == 1 ? table.columns[value_cols[0]] : "value";

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" +
         num(kHeight) + "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
         escape(table.name) + "</text>\n";

  for (double t = lo; t <= hi + step * 1e-9; t += step) {
    const double y = y_of(t);
    svg += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(y) + "\" x2=\"" + num(kLeft + pw) +
           "\" y2=\"" + num(y) + "\" stroke=\"#dddddd\"/>\n";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", std::abs(t) < step * 1e-9 ? 0.0 : t);
    svg += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(y + 4) + "\" text-anchor=\"end\">" + buf +
           "</text>\n";
  }
  svg += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(kLeft) + "\" y2=\"" +
         num(kTop + ph) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(y_of(lo)) + "\" x2=\"" + num(kLeft + pw) +
         "\" y2=\"" + num(y_of(lo)) + "\" stroke=\"black\"/>\n";

  for (std::size_t i = 0; i < categories.size(); ++i) {
    const double x = x_center(i), y = kTop + ph + 14;
    svg += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"end\" transform=\"rotate(-30 " +
           num(x) + " " + num(y) + ")\">" + escape(categories[i]) + "</text>\n";
  }
  svg += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kHeight - 8) +
         "\" text-anchor=\"middle\">" + escape(x_label) + "</text>\n";
  svg += "<text x=\"18\" y=\"" + num(kTop + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
         num(kTop + ph / 2) + ")\">" + escape(y_label) + "</text>\n";

  const double zero_y = y_of(std::clamp(0.0, lo, hi));
  for (std::size_t s = 0; s < value_cols.size(); ++s) {
    const std::string color = kPalette[s % std::size(kPalette)];
    const auto c = value_cols[s];
    if (kind == ChartKind::kBars) {
      const double group = band * 0.8;
      const double bw = group / static_cast<double>(value_cols.size());
      for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto v = numeric(table.rows[i][c]);
        if (!v) continue;
        const double x = x_center(i) - group / 2 + bw * static_cast<double>(s);
        const double y = y_of(*v);
        svg += "<rect x=\"" + num(x) + "\" y=\"" + num(std::min(y, zero_y)) + "\" width=\"" + num(bw) +
               "\" height=\"" + num(std::abs(zero_y - y)) + "\" fill=\"" + color + "\"/>\n";
      }
    } else {
      std::string path;
      bool pen_down = false;
      for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto v = numeric(table.rows[i][c]);
        if (!v) {
          pen_down = false;
          continue;
        }
        path += (pen_down ? " L " : (path.empty() ? "M " : " M ")) + num(x_center(i)) + " " + num(y_of(*v));
        pen_down = true;
        svg += "<circle cx=\"" + num(x_center(i)) + "\" cy=\"" + num(y_of(*v)) + "\" r=\"3\" fill=\"" +
               color + "\"/>\n";
      }
      if (!path.empty()) {
        svg += "<path d=\"" + path + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
      }
    }
    const double ly = kTop + 10 + 20 * static_cast<double>(s);
    const double lx = kLeft + pw + 16;
    svg += "<rect x=\"" + num(lx) + "\" y=\"" + num(ly - 9) + "\" width=\"12\" height=\"12\" fill=\"" +
           color + "\"/>\n";
    svg += "<text x=\"" + num(lx + 18) + "\" y=\"" + num(ly + 1) + "\">" + escape(table.columns[c]) +
           "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace negmt
