#pragma once

// Flow-record ingestion: schema files, CSV loading with malformed-row
// accounting, one-hot encoding, z-score normalization, stratified splits,
// over/under-sampling and Gaussian synthetic datasets.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "imba_ids/core_math.hpp"
#include "imba_ids/errors.hpp"
#include "imba_ids/ini.hpp"
#include "imba_ids/metrics.hpp"
#include "imba_ids/model.hpp"

namespace imba_ids {

enum class ColumnKind { numeric, categorical, ignore, label };

inline std::optional<ColumnKind> parse_column_kind(std::string_view s) {
  if (s == "numeric") return ColumnKind::numeric;
  if (s == "categorical") return ColumnKind::categorical;
  if (s == "ignore") return ColumnKind::ignore;
  if (s == "label") return ColumnKind::label;
  return std::nullopt;
}

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
};

/// Dataset schema, usually read from an INI file:
///
///   [dataset]
///   label = label
///   classes = Benign, DoS, Probe
///   benign = Benign
///   header = true
///   default_kind = numeric
///   malformed_threshold = 0.01
///
///   [columns]
///   protocol_type = categorical
///
///   [label_map]
///   smurf. = DoS
///
/// `header = false` makes [columns] the positional column order (the label
/// column must then be listed with kind `label`). `default_kind` applies to
/// header columns missing from [columns]. Column kinds are numeric,
/// categorical, ignore or label. [label_map] maps raw label strings to class
/// names. Comments must sit on their own line.
///
/// Internally classes are reordered so that the benign class has index 0.
struct DatasetSchema {
  std::vector<ColumnSpec> columns;  // declared columns, in file order when header = false
  std::string label_column = "label";
  std::vector<std::string> classes;  // internal order, benign first
  std::string benign_class;
  bool has_header = true;
  std::optional<ColumnKind> default_kind;
  double malformed_threshold = 0.01;
  std::map<std::string, std::string> label_map;

  std::size_t num_classes() const noexcept { return classes.size(); }

  std::optional<Label> class_index(std::string_view name) const {
    for (std::size_t k = 0; k < classes.size(); ++k)
      if (classes[k] == name) return k;
    return std::nullopt;
  }

  // Raw label string -> class index (after the fine-label map).
  std::optional<Label> resolve_label(std::string_view raw) const {
    if (auto it = label_map.find(std::string(raw)); it != label_map.end()) return class_index(it->second);
    return class_index(raw);
  }

  const std::string& decode_label(Label index) const { return classes.at(index); }

  void validate() const {
    if (classes.empty()) throw ConfigError("dataset.classes", "no classes declared");
    std::set<std::string> unique(classes.begin(), classes.end());
    if (unique.size() != classes.size()) throw ConfigError("dataset.classes", "class names must be unique");
    if (classes.front() != benign_class) {
      throw ConfigError("dataset.benign", "benign class '" + benign_class + "' is not a declared class");
    }
    for (const auto& [raw, cls] : label_map) {
      if (!class_index(cls)) throw ConfigError("label_map." + raw, "maps to unknown class '" + cls + "'");
    }
    if (!has_header) {
      bool found_label = false;
      for (const auto& c : columns) found_label |= c.name == label_column;
      if (!found_label) {
        throw ConfigError("columns." + label_column, "label column must be listed when header = false");
      }
    }
    if (!(malformed_threshold >= 0.0 && malformed_threshold <= 1.0)) {
      throw ConfigError("dataset.malformed_threshold", "must be in [0, 1]");
    }
  }

  static DatasetSchema from_ini(const ini::Tree& tree) {
    DatasetSchema s;
    if (auto v = ini::find(tree, "dataset", "label")) s.label_column = *v;
    auto classes = ini::find(tree, "dataset", "classes");
    if (!classes) throw ConfigError("dataset.classes", "missing required key");
    auto benign = ini::find(tree, "dataset", "benign");
    if (!benign) throw ConfigError("dataset.benign", "missing required key");
    s.benign_class = *benign;
    auto listed = ini::split_list(*classes);
    if (std::set<std::string>(listed.begin(), listed.end()).size() != listed.size()) {
      throw ConfigError("dataset.classes", "class names must be unique");
    }
    if (std::find(listed.begin(), listed.end(), s.benign_class) == listed.end()) {
      throw ConfigError("dataset.benign", "benign class '" + s.benign_class + "' is not a declared class");
    }
    s.classes.push_back(s.benign_class);
    for (const auto& c : listed)
      if (c != s.benign_class) s.classes.push_back(c);
    if (auto v = ini::find(tree, "dataset", "header")) {
      auto b = ini::parse_bool(*v);
      if (!b) throw ConfigError("dataset.header", "expected true or false");
      s.has_header = *b;
    }
    if (auto v = ini::find(tree, "dataset", "default_kind")) {
      s.default_kind = parse_column_kind(*v);
      if (!s.default_kind) throw ConfigError("dataset.default_kind", "unknown kind '" + *v + "'");
    }
    if (auto v = ini::find(tree, "dataset", "malformed_threshold")) {
      auto d = ini::parse_double(*v);
      if (!d) throw ConfigError("dataset.malformed_threshold", "not a number");
      s.malformed_threshold = *d;
    }
    if (auto sec = tree.find("columns"); sec != tree.not_found()) {
      for (const auto& [name, value] : sec->second) {
        auto kind = parse_column_kind(ini::trim(value.data()));
        if (!kind) throw ConfigError("columns." + name, "unknown kind '" + value.data() + "'");
        s.columns.push_back({name, *kind});
      }
    }
    if (auto sec = tree.find("label_map"); sec != tree.not_found()) {
      for (const auto& [raw, cls] : sec->second) s.label_map[raw] = std::string(ini::trim(cls.data()));
    }
    s.validate();
    return s;
  }

  static DatasetSchema load(const std::string& path) { return from_ini(ini::load(path)); }

  std::string to_ini() const {
    std::ostringstream out;
    out << "[dataset]\nlabel = " << label_column << "\nclasses = ";
    for (std::size_t k = 0; k < classes.size(); ++k) out << (k ? ", " : "") << classes[k];
    out << "\nbenign = " << benign_class << "\nheader = " << (has_header ? "true" : "false") << "\n";
    if (default_kind) {
      out << "default_kind = "
          << (*default_kind == ColumnKind::numeric       ? "numeric"
              : *default_kind == ColumnKind::categorical ? "categorical"
                                                         : "ignore")
          << "\n";
    }
    out << "malformed_threshold = " << malformed_threshold << "\n";
    if (!columns.empty()) {
      out << "\n[columns]\n";
      for (const auto& c : columns) {
        const char* kind = c.kind == ColumnKind::numeric       ? "numeric"
                           : c.kind == ColumnKind::categorical ? "categorical"
                           : c.kind == ColumnKind::label       ? "label"
                                                               : "ignore";
        out << c.name << " = " << kind << "\n";
      }
    }
    if (!label_map.empty()) {
      out << "\n[label_map]\n";
      for (const auto& [raw, cls] : label_map) out << raw << " = " << cls << "\n";
    }
    return out.str();
  }
};

struct RawColumn {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;  // numeric or categorical
  std::vector<double> numbers;
  std::vector<std::string> categories;
};

struct RawTable {
  std::vector<RawColumn> features;
  std::vector<std::string> labels;  // raw label strings
  std::size_t malformed_rows = 0;

  std::size_t rows() const noexcept { return labels.size(); }

  RawTable select(std::span<const std::size_t> indices) const {
    RawTable out;
    out.malformed_rows = malformed_rows;
    for (const auto& col : features) {
      RawColumn c{col.name, col.kind, {}, {}};
      for (std::size_t i : indices) {
        if (col.kind == ColumnKind::numeric) c.numbers.push_back(col.numbers.at(i));
        else c.categories.push_back(col.categories.at(i));
      }
      out.features.push_back(std::move(c));
    }
    for (std::size_t i : indices) out.labels.push_back(labels.at(i));
    return out;
  }
};

namespace detail {

inline void split_csv_line(std::string_view line, std::vector<std::string_view>& cells) {
  cells.clear();
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    cells.push_back(ini::trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
}

}  // namespace detail

/// Reads a comma-separated file described by `schema`. Rows with the wrong
/// number of cells or a non-finite / non-numeric value in a numeric column
/// are counted as malformed and skipped; if more than
/// schema.malformed_threshold of the rows are malformed the load aborts.
inline RawTable load_csv(std::istream& in, const DatasetSchema& schema,
                         const std::string& origin = "<stream>") {
  struct Slot {
    std::size_t cell;
    ColumnKind kind;
    std::size_t feature;  // index into RawTable::features
  };
  RawTable table;
  std::vector<Slot> slots;
  std::size_t label_cell = 0;
  std::size_t expected_cells = 0;
  std::string line;
  std::vector<std::string_view> cells;

  auto add_feature = [&](const std::string& name, ColumnKind kind, std::size_t cell) {
    if (kind == ColumnKind::ignore) return;
    if (kind == ColumnKind::label) {
      if (name != schema.label_column) {
        throw ConfigError("columns." + name, "only '" + schema.label_column + "' may have kind label");
      }
      return;
    }
    slots.push_back({cell, kind, table.features.size()});
    table.features.push_back({name, kind, {}, {}});
  };

  if (schema.has_header) {
    if (!std::getline(in, line)) throw DataError(origin + ": missing header row");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    detail::split_csv_line(line, cells);
    std::vector<std::string> header(cells.begin(), cells.end());
    expected_cells = header.size();
    std::map<std::string, ColumnKind> declared;
    for (const auto& c : schema.columns) declared[c.name] = c.kind;
    bool found_label = false;
    for (std::size_t k = 0; k < header.size(); ++k) {
      if (header[k] == schema.label_column) {
        label_cell = k;
        found_label = true;
        continue;
      }
      auto it = declared.find(header[k]);
      if (it != declared.end()) {
        add_feature(header[k], it->second, k);
      } else if (schema.default_kind) {
        add_feature(header[k], *schema.default_kind, k);
      } else {
        throw ConfigError("columns." + header[k], "column in " + origin + " is not declared in the schema");
      }
    }
    if (!found_label) throw DataError(origin + ": label column '" + schema.label_column + "' not in header");
    for (const auto& c : schema.columns) {
      if (std::find(header.begin(), header.end(), c.name) == header.end()) {
        throw DataError(origin + ": schema column '" + c.name + "' not in header");
      }
    }
  } else {
    expected_cells = schema.columns.size();
    for (std::size_t k = 0; k < schema.columns.size(); ++k) {
      if (schema.columns[k].name == schema.label_column) label_cell = k;
      else add_feature(schema.columns[k].name, schema.columns[k].kind, k);
    }
  }

  std::size_t good = 0;
  std::vector<double> parsed(slots.size());
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (ini::trim(line).empty()) continue;
    detail::split_csv_line(line, cells);
    bool ok = cells.size() == expected_cells && !cells[label_cell].empty();
    for (std::size_t s = 0; ok && s < slots.size(); ++s) {
      if (slots[s].kind != ColumnKind::numeric) continue;
      auto v = ini::parse_double(cells[slots[s].cell]);
      ok = v && std::isfinite(*v);
      if (ok) parsed[s] = *v;
    }
    if (!ok) {
      ++table.malformed_rows;
      continue;
    }
    for (std::size_t s = 0; s < slots.size(); ++s) {
      auto& col = table.features[slots[s].feature];
      if (slots[s].kind == ColumnKind::numeric) col.numbers.push_back(parsed[s]);
      else col.categories.emplace_back(cells[slots[s].cell]);
    }
    table.labels.emplace_back(cells[label_cell]);
    ++good;
  }
  const double total = static_cast<double>(good + table.malformed_rows);
  if (static_cast<double>(table.malformed_rows) > schema.malformed_threshold * total) {
    throw DataError(origin + ": " + std::to_string(table.malformed_rows) + " of " +
                    std::to_string(good + table.malformed_rows) +
                    " rows are malformed, above the threshold of " +
                    std::to_string(schema.malformed_threshold * 100.0) + "%");
  }
  return table;
}

inline RawTable load_csv(const std::string& path, const DatasetSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file " + path);
  return load_csv(in, schema, path);
}

// Maps raw label strings to class indices; the error lists every unknown label.
inline LabelVector resolve_labels(const RawTable& table, const DatasetSchema& schema) {
  LabelVector labels;
  labels.reserve(table.rows());
  std::set<std::string> unknown;
  for (const auto& raw : table.labels) {
    auto idx = schema.resolve_label(raw);
    if (!idx) {
      unknown.insert(raw);
      continue;
    }
    labels.push_back(*idx);
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& u : unknown) list += (list.empty() ? "" : ", ") + ("'" + u + "'");
    throw DataError("unknown label(s): " + list);
  }
  return labels;
}

inline std::vector<std::size_t> count_classes(std::span<const Label> labels, std::size_t num_classes) {
  std::vector<std::size_t> counts(num_classes, 0);
  for (Label y : labels) {
    if (y >= num_classes) throw std::out_of_range("count_classes: label out of range");
    ++counts[y];
  }
  return counts;
}

struct EncodedDataset {
  Matrix features;                        // n x d_enc
  LabelVector labels;                     // class indices, benign = 0
  std::vector<std::string> class_names;   // benign first
  std::vector<std::string> column_names;  // one per encoded column
  std::vector<bool> numeric_columns;      // false for one-hot indicator columns

  std::size_t rows() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return features.cols(); }
  std::size_t num_classes() const noexcept { return class_names.size(); }

  std::vector<std::size_t> class_counts() const { return count_classes(labels, num_classes()); }

  EncodedDataset subset(std::span<const std::size_t> indices) const {
    EncodedDataset out;
    out.class_names = class_names;
    out.column_names = column_names;
    out.numeric_columns = numeric_columns;
    std::vector<double> values;
    values.reserve(indices.size() * dim());
    for (std::size_t i : indices) {
      if (i >= rows()) throw std::out_of_range("EncodedDataset::subset: row index out of range");
      auto r = features.row(i);
      values.insert(values.end(), r.begin(), r.end());
      out.labels.push_back(labels[i]);
    }
    out.features = Matrix(indices.size(), dim(), std::move(values));
    return out;
  }

  void validate() const {
    if (features.rows() != labels.size()) throw ShapeError("EncodedDataset: feature/label row mismatch");
    if (column_names.size() != dim() || numeric_columns.size() != dim()) {
      throw ShapeError("EncodedDataset: column metadata does not match feature width");
    }
    for (Label y : labels)
      if (y >= num_classes()) throw std::out_of_range("EncodedDataset: label out of range");
    for (double v : features.values())
      if (std::isnan(v)) throw DataError("EncodedDataset: NaN feature value");
  }
};

/// Categorical vocabularies fitted on training data. Categoricals are one-hot
/// encoded in sorted vocabulary order; categories unseen at fit time encode
/// to all zeros.
struct Encoder {
  struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    std::vector<std::string> vocabulary;
  };
  std::vector<Column> columns;
  std::vector<std::string> class_names;

  static Encoder fit(const RawTable& table, const DatasetSchema& schema) {
    Encoder enc;
    enc.class_names = schema.classes;
    for (const auto& col : table.features) {
      Column c{col.name, col.kind, {}};
      if (col.kind == ColumnKind::categorical) {
        std::set<std::string> vocab(col.categories.begin(), col.categories.end());
        c.vocabulary.assign(vocab.begin(), vocab.end());
      }
      enc.columns.push_back(std::move(c));
    }
    return enc;
  }

  std::size_t encoded_dim() const {
    std::size_t d = 0;
    for (const auto& c : columns) d += c.kind == ColumnKind::numeric ? 1 : c.vocabulary.size();
    return d;
  }

  EncodedDataset encode(const RawTable& table, const DatasetSchema& schema) const {
    if (table.features.size() != columns.size()) {
      throw ShapeError("encode: table has " + std::to_string(table.features.size()) +
                       " feature columns, encoder expects " + std::to_string(columns.size()));
    }
    if (schema.classes != class_names) throw DataError("encode: schema classes differ from the encoder's");
    EncodedDataset ds;
    ds.class_names = class_names;
    ds.labels = resolve_labels(table, schema);
    const std::size_t n = table.rows();
    const std::size_t d = encoded_dim();
    std::vector<std::size_t> offsets;
    for (const auto& c : columns) {
      offsets.push_back(ds.column_names.size());
      if (c.kind == ColumnKind::numeric) {
        ds.column_names.push_back(c.name);
        ds.numeric_columns.push_back(true);
      } else {
        for (const auto& v : c.vocabulary) {
          ds.column_names.push_back(c.name + "=" + v);
          ds.numeric_columns.push_back(false);
        }
      }
    }
    ds.features = Matrix(n, d);
    for (std::size_t k = 0; k < columns.size(); ++k) {
      const auto& src = table.features[k];
      if (src.name != columns[k].name || src.kind != columns[k].kind) {
        throw DataError("encode: column " + std::to_string(k) + " is '" + src.name +
                        "' but the encoder expects '" + columns[k].name + "'");
      }
      if (columns[k].kind == ColumnKind::numeric) {
        for (std::size_t i = 0; i < n; ++i) ds.features(i, offsets[k]) = src.numbers[i];
        continue;
      }
      const auto& vocab = columns[k].vocabulary;
      for (std::size_t i = 0; i < n; ++i) {
        auto it = std::lower_bound(vocab.begin(), vocab.end(), src.categories[i]);
        if (it != vocab.end() && *it == src.categories[i]) {
          ds.features(i, offsets[k] + static_cast<std::size_t>(it - vocab.begin())) = 1.0;
        }
      }
    }
    ds.validate();
    return ds;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["classes"] = class_names;
    auto cols = nlohmann::ordered_json::array();
    for (const auto& c : columns) {
      cols.push_back({{"name", c.name},
                      {"kind", c.kind == ColumnKind::numeric ? "numeric" : "categorical"},
                      {"vocabulary", c.vocabulary}});
    }
    j["columns"] = cols;
    return j;
  }

  static Encoder from_json(const nlohmann::json& j) {
    Encoder enc;
    enc.class_names = j.at("classes").get<std::vector<std::string>>();
    for (const auto& c : j.at("columns")) {
      const auto kind = c.at("kind").get<std::string>();
      enc.columns.push_back({c.at("name").get<std::string>(),
                             kind == "numeric" ? ColumnKind::numeric : ColumnKind::categorical,
                             c.at("vocabulary").get<std::vector<std::string>>()});
    }
    return enc;
  }
};

inline EncodedDataset encode(const RawTable& table, const DatasetSchema& schema) {
  return Encoder::fit(table, schema).encode(table, schema);
}

inline constexpr double kStdFloor = 1e-9;

// Per-column z-score statistics. Only numeric columns are transformed.
struct Normalizer {
  std::vector<double> mean;
  std::vector<double> stddev;  // floored at kStdFloor
  std::vector<bool> numeric_columns;

  static Normalizer fit(const EncodedDataset& train) {
    Normalizer norm;
    const std::size_t d = train.dim();
    const std::size_t n = train.rows();
    norm.mean.assign(d, 0.0);
    norm.stddev.assign(d, 1.0);
    norm.numeric_columns = train.numeric_columns;
    if (n == 0) return norm;
    for (std::size_t j = 0; j < d; ++j) {
      if (!train.numeric_columns[j]) continue;
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) sum += train.features(i, j);
      const double mu = sum / static_cast<double>(n);
      double sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double dev = train.features(i, j) - mu;
        sq += dev * dev;
      }
      norm.mean[j] = mu;
      norm.stddev[j] = std::max(std::sqrt(sq / static_cast<double>(n)), kStdFloor);
    }
    return norm;
  }

  EncodedDataset apply(EncodedDataset ds) const {
    if (ds.dim() != mean.size()) {
      throw ShapeError("Normalizer: dataset has " + std::to_string(ds.dim()) +
                       " columns, normalizer was fitted on " + std::to_string(mean.size()));
    }
    for (std::size_t i = 0; i < ds.rows(); ++i) {
      auto row = ds.features.row(i);
      for (std::size_t j = 0; j < row.size(); ++j)
        if (numeric_columns[j]) row[j] = (row[j] - mean[j]) / stddev[j];
    }
    return ds;
  }

  nlohmann::ordered_json to_json() const {
    return {{"mean", mean}, {"stddev", stddev}, {"numeric", numeric_columns}};
  }

  static Normalizer from_json(const nlohmann::json& j) {
    Normalizer n;
    n.mean = j.at("mean").get<std::vector<double>>();
    n.stddev = j.at("stddev").get<std::vector<double>>();
    n.numeric_columns = j.at("numeric").get<std::vector<bool>>();
    return n;
  }
};

inline Normalizer fit_normalizer(const EncodedDataset& train) { return Normalizer::fit(train); }
inline EncodedDataset apply_normalizer(EncodedDataset ds, const Normalizer& norm) {
  return norm.apply(std::move(ds));
}

struct SplitRatio {
  std::size_t train_parts = 5;
  std::size_t test_parts = 1;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::vector<std::string> warnings;
};

/// Splits every class independently: round(n_c * test / (train + test)) rows
/// go to test. Classes with fewer than 2 rows go entirely to train with a
/// warning. Both index lists come back shuffled.
inline SplitIndices stratified_split_indices(std::span<const Label> labels, std::size_t num_classes,
                                             SplitRatio ratio, Rng& rng) {
  if (ratio.train_parts == 0 || ratio.test_parts == 0) {
    throw std::invalid_argument("stratified_split: ratio parts must be >= 1");
  }
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) throw std::out_of_range("stratified_split: label out of range");
    by_class[labels[i]].push_back(i);
  }
  SplitIndices out;
  const double test_fraction =
      static_cast<double>(ratio.test_parts) / static_cast<double>(ratio.train_parts + ratio.test_parts);
  for (std::size_t k = 0; k < num_classes; ++k) {
    auto& rows = by_class[k];
    if (rows.empty()) continue;
    if (rows.size() < 2) {
      out.warnings.push_back("class " + std::to_string(k) + " has " + std::to_string(rows.size()) +
                             " row(s); placed in train only");
      out.train.insert(out.train.end(), rows.begin(), rows.end());
      continue;
    }
    rng.shuffle(rows);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(rows.size())));
    out.test.insert(out.test.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_test));
    out.train.insert(out.train.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_test), rows.end());
  }
  rng.shuffle(out.train);
  rng.shuffle(out.test);
  return out;
}

struct SplitResult {
  EncodedDataset train;
  EncodedDataset test;
  std::vector<std::string> warnings;
};

inline SplitResult stratified_split(const EncodedDataset& ds, SplitRatio ratio, Rng& rng) {
  auto idx = stratified_split_indices(ds.labels, ds.num_classes(), ratio, rng);
  return {ds.subset(idx.train), ds.subset(idx.test), std::move(idx.warnings)};
}

// Brings every class to n_max rows by duplicating randomly chosen rows
// (sampling with replacement); originals are all kept. Output is shuffled.
inline EncodedDataset oversample(const EncodedDataset& train, Rng& rng) {
  std::vector<std::vector<std::size_t>> by_class(train.num_classes());
  for (std::size_t i = 0; i < train.rows(); ++i) by_class[train.labels[i]].push_back(i);
  std::size_t n_max = 0;
  for (std::size_t k = 0; k < by_class.size(); ++k) {
    if (by_class[k].empty()) {
      throw DataError("oversample: class '" + train.class_names[k] + "' has no instances");
    }
    n_max = std::max(n_max, by_class[k].size());
  }
  std::vector<std::size_t> picked;
  picked.reserve(n_max * by_class.size());
  for (const auto& rows : by_class) {
    picked.insert(picked.end(), rows.begin(), rows.end());
    for (std::size_t extra = rows.size(); extra < n_max; ++extra) picked.push_back(rows[rng.below(rows.size())]);
  }
  rng.shuffle(picked);
  return train.subset(picked);
}

// Reduces every non-empty class to n_min rows (over non-empty classes) by
// uniform sampling without replacement. Output is shuffled.
inline EncodedDataset undersample(const EncodedDataset& train, Rng& rng) {
  std::vector<std::vector<std::size_t>> by_class(train.num_classes());
  for (std::size_t i = 0; i < train.rows(); ++i) by_class[train.labels[i]].push_back(i);
  std::size_t n_min = 0;
  for (const auto& rows : by_class)
    if (!rows.empty()) n_min = n_min == 0 ? rows.size() : std::min(n_min, rows.size());
  std::vector<std::size_t> picked;
  for (auto& rows : by_class) {
    rng.shuffle(rows);
    picked.insert(picked.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(std::min(n_min, rows.size())));
  }
  rng.shuffle(picked);
  return train.subset(picked);
}

// ---------------------------------------------------------------------------
// Synthetic Gaussian-cluster data
// ---------------------------------------------------------------------------

struct SynthClass {
  std::string name;
  std::size_t count = 0;
  std::vector<double> mean;    // length dim
  std::vector<double> stddev;  // length dim (diagonal covariance)
};

struct SynthSpec {
  std::size_t dim = 0;
  std::vector<SynthClass> classes;  // first class is benign
  std::uint64_t seed = 0;

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& c : classes) n += c.count;
    return n;
  }

  void validate() const {
    if (dim == 0) throw ConfigError("synth.dim", "must be >= 1");
    if (classes.empty()) throw ConfigError("synth", "no classes declared");
    std::set<std::string> names;
    for (const auto& c : classes) {
      const std::string key = "class." + c.name;
      if (!names.insert(c.name).second) throw ConfigError(key, "duplicate class name");
      if (c.count == 0) throw ConfigError(key + ".count", "must be >= 1");
      if (c.mean.size() != dim) throw ConfigError(key + ".mean", "expected " + std::to_string(dim) + " values");
      if (c.stddev.size() != dim) throw ConfigError(key + ".std", "expected " + std::to_string(dim) + " values");
      for (double s : c.stddev)
        if (!(s >= 0.0)) throw ConfigError(key + ".std", "standard deviations must be >= 0");
    }
  }

  /// INI form:
  ///   [synth]
  ///   dim = 20
  ///   seed = 7
  ///   [class.Benign]
  ///   count = 9000
  ///   mean = 0
  ///   std = 1
  ///
  /// One [class.NAME] section per class, benign first. `mean` and `std` take
  /// either one value (broadcast) or `dim` comma-separated values.
  static SynthSpec from_ini(const ini::Tree& tree) {
    SynthSpec spec;
    auto dim = ini::find(tree, "synth", "dim");
    if (!dim) throw ConfigError("synth.dim", "missing required key");
    auto d = ini::parse_u64(*dim);
    if (!d) throw ConfigError("synth.dim", "not an integer");
    spec.dim = *d;
    if (auto s = ini::find(tree, "synth", "seed")) {
      auto v = ini::parse_u64(*s);
      if (!v) throw ConfigError("synth.seed", "not an integer");
      spec.seed = *v;
    }
    auto broadcast = [&](std::vector<double> v, const std::string& key) {
      if (v.size() == 1) v.assign(spec.dim, v.front());
      if (v.size() != spec.dim) throw ConfigError(key, "expected 1 or " + std::to_string(spec.dim) + " values");
      return v;
    };
    for (const auto& [section, body] : tree) {
      if (section.rfind("class.", 0) != 0) continue;
      SynthClass c;
      c.name = section.substr(6);
      auto count = body.get_optional<std::string>("count");
      if (!count) throw ConfigError(section + ".count", "missing required key");
      auto n = ini::parse_u64(*count);
      if (!n) throw ConfigError(section + ".count", "not an integer");
      c.count = *n;
      c.mean = broadcast(ini::parse_double_list(body.get<std::string>("mean", "0"), section + ".mean"),
                         section + ".mean");
      c.stddev = broadcast(ini::parse_double_list(body.get<std::string>("std", "1"), section + ".std"),
                           section + ".std");
      spec.classes.push_back(std::move(c));
    }
    spec.validate();
    return spec;
  }

  static SynthSpec load(const std::string& path) { return from_ini(ini::load(path)); }

  DatasetSchema schema() const {
    DatasetSchema s;
    s.label_column = "label";
    for (const auto& c : classes) s.classes.push_back(c.name);
    s.benign_class = classes.front().name;
    s.has_header = true;
    s.default_kind = ColumnKind::numeric;
    return s;
  }
};

/// Draws every class from its diagonal Gaussian. Rows are shuffled.
inline EncodedDataset synth_generate(const SynthSpec& spec, Rng& rng) {
  spec.validate();
  EncodedDataset ds;
  for (const auto& c : spec.classes) ds.class_names.push_back(c.name);
  for (std::size_t j = 0; j < spec.dim; ++j) {
    ds.column_names.push_back("f" + std::to_string(j));
    ds.numeric_columns.push_back(true);
  }
  const std::size_t n = spec.total();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  ds.features = Matrix(n, spec.dim);
  ds.labels.assign(n, 0);
  std::size_t next = 0;
  for (std::size_t k = 0; k < spec.classes.size(); ++k) {
    const auto& c = spec.classes[k];
    for (std::size_t i = 0; i < c.count; ++i, ++next) {
      auto row = ds.features.row(order[next]);
      for (std::size_t j = 0; j < spec.dim; ++j) row[j] = c.mean[j] + c.stddev[j] * rng.normal();
      ds.labels[order[next]] = k;
    }
  }
  return ds;
}

/// Long-tail benchmark: five classes with counts 9000/400/300/200/100 in 20
/// dimensions. The benign class sits at the origin; attack class k is shifted
/// by `separation` along coordinates 2k-2 and 2k-1, so every attack cluster
/// overlaps the benign cluster and its neighbours. Unit variance everywhere.
inline SynthSpec long_tail_benchmark(std::uint64_t seed = 0, double separation = 2.0) {
  SynthSpec spec;
  spec.dim = 20;
  spec.seed = seed;
  const std::vector<std::pair<std::string, std::size_t>> classes = {
      {"Benign", 9000}, {"DoS", 400}, {"Probe", 300}, {"U2R", 200}, {"R2L", 100}};
  for (std::size_t k = 0; k < classes.size(); ++k) {
    SynthClass c{classes[k].first, classes[k].second, std::vector<double>(spec.dim, 0.0),
                 std::vector<double>(spec.dim, 1.0)};
    if (k > 0) {
      c.mean[2 * k - 2] = separation;
      c.mean[2 * k - 1] = separation;
    }
    spec.classes.push_back(std::move(c));
  }
  return spec;
}

/// Three well separated clusters (means 8 units apart along distinct axes,
/// unit variance). Linearly separable for practical purposes. 6000 rows per
/// class give the default 10x100 net at step size 1e-4 enough updates to
/// separate them within 10 epochs.
inline SynthSpec separable_benchmark(std::uint64_t seed = 0, std::size_t per_class = 6000) {
  SynthSpec spec;
  spec.dim = 4;
  spec.seed = seed;
  const char* names[] = {"Benign", "AttackA", "AttackB"};
  for (std::size_t k = 0; k < 3; ++k) {
    SynthClass c{names[k], per_class, std::vector<double>(spec.dim, 0.0), std::vector<double>(spec.dim, 1.0)};
    if (k > 0) c.mean[k - 1] = 8.0;
    spec.classes.push_back(std::move(c));
  }
  return spec;
}

// Shortest round-trip decimal form of a double.
inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

// Writes features and the class name as CSV with a header row.
inline void write_csv(const EncodedDataset& ds, std::ostream& out, const std::string& label_column = "label") {
  for (const auto& name : ds.column_names) out << name << ',';
  out << label_column << '\n';
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    for (double v : ds.features.row(i)) out << format_double(v) << ',';
    out << ds.class_names[ds.labels[i]] << '\n';
  }
}

}  // namespace imba_ids
