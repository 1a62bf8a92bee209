// Copyright 2026 The Crosstab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crosstab/core/error.hpp"
#include "crosstab/tabular/dataset.hpp"

namespace crosstab {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// RFC 4180 reader: quoted fields, doubled quotes, CRLF tolerated.
inline CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record[0].empty())) {
      if (table.header.empty()) {
        table.header = std::move(record);
      } else {
        table.rows.push_back(std::move(record));
      }
    }
    record.clear();
  };
  char c;
  while (in.get(c)) {
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started || !field.empty()) throw DataError("stray quote inside CSV field");
        quoted = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (quoted) throw DataError("unterminated quoted CSV field");
  if (field_started || !field.empty() || !record.empty()) end_record();
  return table;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

// Shortest representation that parses back to the same double.
inline std::string format_number(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

inline std::optional<double> parse_number(const std::string& text) {
  std::size_t b = text.find_first_not_of(" \t");
  std::size_t e = text.find_last_not_of(" \t");
  if (b == std::string::npos) return std::nullopt;
  const char* first = text.data() + b;
  const char* last = text.data() + e + 1;
  if (*first == '+') ++first;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return value;
}

// Per-table descriptor:
//   {"name": optional, "metadata": text, "target": column name,
//    "columns": [{"name", "kind", "label_map": {raw: full text}, "categories": [...]}]}
struct ColumnDescriptor {
  std::string name;
  ColumnKind kind = ColumnKind::numerical;
  std::map<std::string, std::string> label_map;
  std::vector<std::string> categories;
};

struct SchemaDescriptor {
  std::string name;
  std::string metadata;
  std::string target;
  std::vector<ColumnDescriptor> columns;

  static SchemaDescriptor from_json(const nlohmann::json& j) {
    SchemaDescriptor d;
    try {
      d.name = j.value("name", std::string{});
      d.metadata = j.at("metadata").get<std::string>();
      d.target = j.value("target", std::string{});
      for (const auto& col : j.at("columns")) {
        ColumnDescriptor c;
        c.name = col.at("name").get<std::string>();
        c.kind = parse_column_kind(col.at("kind").get<std::string>());
        if (col.contains("label_map")) {
          c.label_map = col.at("label_map").get<std::map<std::string, std::string>>();
        }
        if (col.contains("categories")) {
          c.categories = col.at("categories").get<std::vector<std::string>>();
        }
        d.columns.push_back(std::move(c));
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("malformed schema descriptor: ") + e.what());
    }
    if (d.metadata.empty()) throw DataError("schema descriptor needs nonempty metadata");
    return d;
  }

  static SchemaDescriptor load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open schema descriptor " + path.string());
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("schema descriptor " + path.string() + " is not JSON: " + e.what());
    }
  }

  const ColumnDescriptor* find(const std::string& column) const {
    for (const auto& c : columns) {
      if (c.name == column) return &c;
    }
    return nullptr;
  }
};

// Descriptor for an existing table; categories are listed explicitly so the
// round trip preserves category order.
inline nlohmann::json schema_to_json(const TableDataset& table) {
  nlohmann::json cols = nlohmann::json::array();
  std::string target;
  for (const auto& c : table.columns()) {
    nlohmann::json col{{"name", c.name}, {"kind", std::string(to_string(c.kind))}};
    if (c.is_categorical()) col["categories"] = c.categories;
    if (c.target) target = c.name;
    cols.push_back(std::move(col));
  }
  nlohmann::json j{{"metadata", table.metadata()}, {"columns", std::move(cols)}};
  if (!table.name().empty()) j["name"] = table.name();
  if (!target.empty()) j["target"] = target;
  return j;
}

inline TableDataset table_from_csv(const CsvTable& csv, const SchemaDescriptor& desc) {
  if (csv.header.empty()) throw DataError("CSV is empty");
  if (csv.rows.empty()) throw DataError("CSV has a header but no rows");
  for (const auto& h : csv.header) {
    if (!desc.find(h)) throw DataError("CSV column '" + h + "' is missing from the descriptor");
  }
  std::vector<std::size_t> source;
  for (const auto& c : desc.columns) {
    auto it = std::find(csv.header.begin(), csv.header.end(), c.name);
    if (it == csv.header.end()) throw DataError("descriptor column '" + c.name + "' not in CSV");
    source.push_back(static_cast<std::size_t>(it - csv.header.begin()));
  }
  if (!desc.target.empty() && !desc.find(desc.target)) {
    throw DataError("target '" + desc.target + "' is not a described column");
  }

  auto full_label = [](const ColumnDescriptor& c, const std::string& raw) {
    auto it = c.label_map.find(raw);
    return it == c.label_map.end() ? raw : it->second;
  };

  std::vector<ColumnSchema> schema;
  for (std::size_t k = 0; k < desc.columns.size(); ++k) {
    const ColumnDescriptor& c = desc.columns[k];
    ColumnSchema s{c.name, c.kind, {}, c.name == desc.target};
    if (c.kind == ColumnKind::categorical) {
      std::vector<std::string> seen;
      for (const auto& row : csv.rows) {
        if (source[k] >= row.size()) continue;
        const std::string label = full_label(c, row[source[k]]);
        if (!label.empty() && std::find(seen.begin(), seen.end(), label) == seen.end()) {
          seen.push_back(label);
        }
      }
      if (!c.categories.empty()) {
        for (const auto& l : seen) {
          if (std::find(c.categories.begin(), c.categories.end(), l) == c.categories.end()) {
            throw DataError("value '" + l + "' of column '" + c.name +
                            "' is not among its declared categories");
          }
        }
        s.categories = c.categories;
      } else {
        std::sort(seen.begin(), seen.end());
        s.categories = std::move(seen);
      }
    }
    schema.push_back(std::move(s));
  }

  TableDataset table(desc.metadata, std::move(schema));
  table.set_name(desc.name);
  std::vector<Value> values(desc.columns.size());
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    if (row.size() != csv.header.size()) {
      throw DataError("CSV row " + std::to_string(r + 1) + " has " + std::to_string(row.size()) +
                      " fields, header has " + std::to_string(csv.header.size()));
    }
    for (std::size_t k = 0; k < desc.columns.size(); ++k) {
      const std::string& raw = row[source[k]];
      const ColumnDescriptor& c = desc.columns[k];
      if (raw.empty()) {
        throw DataError("missing value at row " + std::to_string(r + 1) + ", column '" + c.name +
                        "'");
      }
      if (c.kind == ColumnKind::numerical) {
        auto x = parse_number(raw);
        if (!x) {
          throw DataError("non-numeric value '" + raw + "' at row " + std::to_string(r + 1) +
                          ", column '" + c.name + "'");
        }
        values[k] = *x;
      } else {
        values[k] = full_label(c, raw);
      }
    }
    table.add_row(values);
  }
  return table;
}

inline TableDataset load_csv(const std::filesystem::path& path, const SchemaDescriptor& desc) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open CSV " + path.string());
  return table_from_csv(read_csv(in), desc);
}

inline void write_csv(std::ostream& out, const TableDataset& table) {
  const auto& cols = table.columns();
  for (std::size_t c = 0; c < cols.size(); ++c) {
    out << (c ? "," : "") << csv_escape(cols[c].name);
  }
  out << '\n';
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c) out << ',';
      if (cols[c].is_numerical()) {
        out << format_number(table.number(r, c));
      } else {
        out << csv_escape(table.label(r, c));
      }
    }
    out << '\n';
  }
}

// Writes via a sibling temporary file and rename so readers never observe a
// partial file.
template <typename Writer>
void write_atomically(const std::filesystem::path& path, Writer&& writer) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    writer(out);
    out.flush();
    if (!out) throw Error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline void save_csv(const std::filesystem::path& path, const TableDataset& table) {
  write_atomically(path, [&](std::ostream& out) { write_csv(out, table); });
}

inline void save_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_atomically(path, [&](std::ostream& out) { out << j.dump(2) << '\n'; });
}

inline nlohmann::json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(path.string() + " is not valid JSON: " + e.what());
  }
}

}  // namespace crosstab
