#pragma once

// Result tables, reports with provenance, and all-or-nothing output writing.

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace negmt {

inline constexpr int kReportSchemaVersion = 1;

/// Toolkit version compiled into the library.
std::string toolkit_version();

/// Empty cells (std::monostate) render as "" in CSV and null in JSON.
using Cell = std::variant<std::monostate, std::string, std::int64_t, double>;

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  /// Appends a row; throws ValidationError when its width differs from `columns`.
  void add_row(std::vector<Cell> row);
  std::size_t column_index(const std::string& column) const;
};

/// Fixed six-decimal rendering so output does not depend on locale or platform.
std::string format_cell(const Cell& cell);

std::string to_csv(const Table& table);
/// Reads a CSV written by to_csv. Cells that parse fully as integers or
/// decimals become numbers.
Table table_from_csv(const std::string& name, const std::string& csv);

struct Provenance {
  /// Input path (as given) -> lowercase hex SHA-256 of its bytes.
  std::map<std::string, std::string> input_digests;
  std::string toolkit_version;
  std::map<std::string, std::uint64_t> seeds;
};

struct Report {
  int schema_version = kReportSchemaVersion;
  std::string command;
  std::vector<std::string> arguments;
  std::vector<Table> tables;
  Provenance provenance;
  std::vector<std::string> warnings;
  std::vector<std::string> notes;
  /// Extra scalar results, e.g. the overall mismatch rate.
  std::map<std::string, Cell> summary;

  const Table* find_table(const std::string& name) const;
};

/// Pretty-printed JSON with sorted keys and a trailing newline.
std::string to_json(const Report& report);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

/// Collects outputs and publishes them together. Each file is first written
/// next to its destination under a temporary name; commit() renames them all
/// into place. Destroying an uncommitted writer removes the temporaries.
class OutputWriter {
 public:
  OutputWriter() = default;
  OutputWriter(const OutputWriter&) = delete;
  OutputWriter& operator=(const OutputWriter&) = delete;
  ~OutputWriter();

  void add(const std::string& path, const std::string& contents);
  /// Reserves a temporary for `path` that the caller streams into; returns
  /// the temporary's path.
  std::string stage(const std::string& path);
  void commit();
  void discard();
  std::vector<std::string> destinations() const;

 private:
  struct Entry {
    std::string destination;
    std::string temporary;
  };
  std::vector<Entry> entries_;
  bool committed_ = false;
};

}  // namespace negmt
