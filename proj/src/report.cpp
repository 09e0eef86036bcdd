#include "negmt/report.hpp"

#include <openssl/evp.h>
#include <unistd.h>

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <nlohmann/json.hpp>
#include <sstream>

#include "negmt/errors.hpp"

#ifndef NEGMT_VERSION
#define NEGMT_VERSION "0.0.0"
#endif

namespace negmt {

namespace fs = std::filesystem;

std::string toolkit_version() { return NEGMT_VERSION; }

void Table::add_row(std::vector<Cell> row) {
  if (row.size() != columns.size()) {
    throw ValidationError("table '" + name + "': row has " + std::to_string(row.size()) +
                          " cells, expected " + std::to_string(columns.size()));
  }
  rows.push_back(std::move(row));
}

std::size_t Table::column_index(const std::string& column) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == column) return i;
  }
  throw ValidationError("table '" + name + "' has no column '" + column + "'");
}

std::string format_cell(const Cell& cell) {
  struct Visitor {
    std::string operator()(std::monostate) const { return {}; }
    std::string operator()(const std::string& s) const { return s; }
    std::string operator()(std::int64_t v) const { return std::to_string(v); }
    std::string operator()(double v) const {
      if (std::isnan(v)) return "nan";
      if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.6f", v);
      std::string s = buf;
      if (s == "-0.000000") s = "0.000000";
      return s;
    }
  };
  return std::visit(Visitor{}, cell);
}

namespace {

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& csv) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string cell;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < csv.size(); ++i) {
    const char c = csv[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < csv.size() && csv[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(cell));
      cell.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < csv.size() && csv[i + 1] == '\n') ++i;
      if (any || !cell.empty()) {
        row.push_back(std::move(cell));
        rows.push_back(std::move(row));
      }
      row.clear();
      cell.clear();
      any = false;
    } else {
      cell += c;
      any = true;
    }
  }
  if (quoted) throw ParseError(rows.size() + 1, "unterminated quoted CSV cell");
  if (any || !cell.empty()) {
    row.push_back(std::move(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

Cell parse_cell(const std::string& s) {
  if (s.empty()) return std::monostate{};
  std::int64_t i = 0;
  auto [pi, ei] = std::from_chars(s.data(), s.data() + s.size(), i);
  if (ei == std::errc{} && pi == s.data() + s.size()) return i;
  double d = 0.0;
  auto [pd, ed] = std::from_chars(s.data(), s.data() + s.size(), d);
  if (ed == std::errc{} && pd == s.data() + s.size()) return d;
  return s;
}

nlohmann::json cell_json(const Cell& cell) {
  struct Visitor {
    nlohmann::json operator()(std::monostate) const { return nullptr; }
    nlohmann::json operator()(const std::string& s) const { return s; }
    nlohmann::json operator()(std::int64_t v) const { return v; }
    nlohmann::json operator()(double v) const {
      if (!std::isfinite(v)) return nullptr;
      return v;
    }
  };
  return std::visit(Visitor{}, cell);
}

std::string hex(const unsigned char* bytes, unsigned int len) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[bytes[i] >> 4];
    out += kHex[bytes[i] & 0xf];
  }
  return out;
}

}  // namespace

std::string to_csv(const Table& table) {
  std::string out;
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    if (i) out += ',';
    out += csv_escape(table.columns[i]);
  }
  out += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += csv_escape(format_cell(row[i]));
    }
    out += '\n';
  }
  return out;
}

Table table_from_csv(const std::string& name, const std::string& csv) {
  auto rows = parse_csv(csv);
  if (rows.empty()) throw ValidationError("table '" + name + "': CSV has no header");
  Table t;
  t.name = name;
  t.columns = rows.front();
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != t.columns.size()) {
      throw ParseError(r + 1, "expected " + std::to_string(t.columns.size()) + " cells, got " +
                                  std::to_string(rows[r].size()));
    }
    std::vector<Cell> row;
    for (const auto& s : rows[r]) row.push_back(parse_cell(s));
    t.rows.push_back(std::move(row));
  }
  return t;
}

const Table* Report::find_table(const std::string& name) const {
  for (const auto& t : tables) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::string to_json(const Report& report) {
  nlohmann::json j;
  j["schema_version"] = report.schema_version;
  j["command"] = report.command;
  j["arguments"] = report.arguments;
  nlohmann::json tables = nlohmann::json::array();
  for (const auto& t : report.tables) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : t.rows) {
      nlohmann::json r = nlohmann::json::array();
      for (const auto& c : row) r.push_back(cell_json(c));
      rows.push_back(std::move(r));
    }
    tables.push_back({{"name", t.name}, {"columns", t.columns}, {"rows", std::move(rows)}});
  }
  j["tables"] = std::move(tables);
  j["provenance"] = {{"input_digests", report.provenance.input_digests},
                     {"toolkit_version", report.provenance.toolkit_version},
                     {"seeds", report.provenance.seeds}};
  j["warnings"] = report.warnings;
  j["notes"] = report.notes;
  nlohmann::json summary = nlohmann::json::object();
  for (const auto& [k, v] : report.summary) summary[k] = cell_json(v);
  j["summary"] = std::move(summary);
  return j.dump(2) + "\n";
}

std::string sha256_hex(const std::string& bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  return hex(md.data(), len);
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto got = in.gcount();
    if (got > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(got));
  }
  if (in.bad()) throw IoError("read error on '" + path + "'");
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  return hex(md.data(), len);
}

OutputWriter::~OutputWriter() {
  if (!committed_) discard();
}

std::string OutputWriter::stage(const std::string& path) {
  for (const auto& e : entries_) {
    if (e.destination == path) throw UsageError("output '" + path + "' is written twice");
  }
  const fs::path dest(path);
  if (dest.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(dest.parent_path(), ec);
    if (ec) throw IoError("cannot create directory '" + dest.parent_path().string() + "'");
  }
  std::string tmp = path + ".tmp" + std::to_string(::getpid()) + "." +
                    std::to_string(entries_.size());
  entries_.push_back({path, tmp});
  return tmp;
}

void OutputWriter::add(const std::string& path, const std::string& contents) {
  const std::string tmp = stage(path);
  std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + tmp + "' for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  out.close();
  if (!out) throw IoError("write to '" + tmp + "' failed");
}

void OutputWriter::commit() {
  for (const auto& e : entries_) {
    std::error_code ec;
    fs::rename(e.temporary, e.destination, ec);
    if (ec) throw IoError("cannot move output into place at '" + e.destination + "': " + ec.message());
  }
  committed_ = true;
}

void OutputWriter::discard() {
  for (const auto& e : entries_) {
    std::error_code ec;
    fs::remove(e.temporary, ec);
  }
  entries_.clear();
}

std::vector<std::string> OutputWriter::destinations() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.destination);
  return out;
}

}  // namespace negmt
