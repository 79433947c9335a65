#include "modal_attrib/table.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "modal_attrib/errors.hpp"
#include "modal_attrib/io.hpp"

namespace modal_attrib {

using nlohmann::json;

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::text: return "text";
    case Modality::visual: return "visual";
    case Modality::audio: return "audio";
    case Modality::meta: return "meta";
  }
  return "meta";
}

std::string_view to_string(ColumnKind k) {
  switch (k) {
    case ColumnKind::probabilistic: return "probabilistic";
    case ColumnKind::continuous: return "continuous";
    case ColumnKind::binary: return "binary";
  }
  return "continuous";
}

std::string_view to_string(TargetTransform t) {
  return t == TargetTransform::log1p ? "log1p" : "none";
}

std::string_view to_string(MissingPolicy p) {
  return p == MissingPolicy::drop_row ? "drop_row" : "fill_zero";
}

Modality parse_modality(std::string_view s) {
  if (s == "text") return Modality::text;
  if (s == "visual") return Modality::visual;
  if (s == "audio") return Modality::audio;
  if (s == "meta") return Modality::meta;
  throw SchemaError("unknown modality '" + std::string(s) + "'");
}

ColumnKind parse_column_kind(std::string_view s) {
  if (s == "probabilistic") return ColumnKind::probabilistic;
  if (s == "continuous") return ColumnKind::continuous;
  if (s == "binary") return ColumnKind::binary;
  throw SchemaError("unknown column kind '" + std::string(s) + "'");
}

TargetTransform parse_target_transform(std::string_view s) {
  if (s == "log1p") return TargetTransform::log1p;
  if (s == "none") return TargetTransform::none;
  throw SchemaError("unknown target transform '" + std::string(s) + "'");
}

MissingPolicy parse_missing_policy(std::string_view s) {
  if (s == "drop_row") return MissingPolicy::drop_row;
  if (s == "fill_zero") return MissingPolicy::fill_zero;
  throw ConfigError("unknown missing policy '" + std::string(s) + "'");
}

double ColumnScaling::to_raw(double normalized) const {
  if (lo == hi) return lo;
  return lo + normalized * (hi - lo) / 100.0;
}

// ---------------------------------------------------------------------------
// Schema

std::optional<std::size_t> Schema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t Schema::require_index(std::string_view name) const {
  if (auto idx = index_of(name)) return *idx;
  throw SchemaError("unknown feature '" + std::string(name) + "'");
}

std::vector<std::string> Schema::names() const {
  std::vector<std::string> out;
  out.reserve(columns.size());
  for (const auto& c : columns) out.push_back(c.name);
  return out;
}

std::string fingerprint_names(const std::vector<std::string>& names) {
  std::string joined;
  for (const auto& n : names) {
    joined += n;
    joined.push_back('\x1f');
  }
  return io::sha256_hex(joined).substr(0, 16);
}

std::string Schema::fingerprint() const { return fingerprint_names(names()); }

void Schema::validate() const {
  std::unordered_set<std::string> seen;
  if (target.name.empty()) throw SchemaError("schema target name is empty");
  if (target.name == "row_id") throw SchemaError("target column may not be named row_id");
  for (const auto& c : columns) {
    if (c.name.empty()) throw SchemaError("schema has a column with an empty name");
    if (c.name == "row_id" || c.name == target.name) {
      throw SchemaError("column '" + c.name + "' collides with a reserved column");
    }
    if (!seen.insert(c.name).second) throw SchemaError("duplicate column '" + c.name + "'");
    if (c.declared_range) {
      const auto [lo, hi] = *c.declared_range;
      if (!(lo <= hi)) throw SchemaError("column '" + c.name + "' has an inverted range");
      if (c.kind == ColumnKind::probabilistic && (lo != 0.0 || hi != 100.0)) {
        throw SchemaError("probabilistic column '" + c.name + "' must have range [0, 100]");
      }
    }
  }
  if (target.transform == TargetTransform::log1p &&
      target.source_transform == TargetTransform::log1p) {
    throw SchemaError("target '" + target.name + "' is already log1p-transformed");
  }
}

Schema parse_schema_json(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("schema is not valid JSON: ") + e.what());
  }
  Schema schema;
  try {
    const auto& target = doc.at("target");
    schema.target.name = target.at("name").get<std::string>();
    schema.target.transform =
        parse_target_transform(target.value("transform", std::string("log1p")));
    schema.target.source_transform =
        parse_target_transform(target.value("source_transform", std::string("none")));
    for (const auto& col : doc.at("columns")) {
      ColumnSpec spec;
      spec.name = col.at("name").get<std::string>();
      spec.modality = parse_modality(col.at("modality").get<std::string>());
      spec.kind = parse_column_kind(col.at("kind").get<std::string>());
      if (col.contains("range") && !col.at("range").is_null()) {
        const auto& r = col.at("range");
        if (!r.is_array() || r.size() != 2) {
          throw SchemaError("column '" + spec.name + "' range must be [lo, hi]");
        }
        spec.declared_range = Range{r[0].get<double>(), r[1].get<double>()};
      } else if (spec.kind == ColumnKind::probabilistic) {
        spec.declared_range = Range{0.0, 100.0};
      }
      schema.columns.push_back(std::move(spec));
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed schema: ") + e.what());
  }
  schema.validate();
  return schema;
}

Schema read_schema(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const IoError& e) {
    throw SchemaError(std::string("cannot read schema: ") + e.what());
  }
  return parse_schema_json(text);
}

std::string schema_to_json(const Schema& schema, const std::vector<ColumnScaling>* scaling) {
  json doc;
  doc["target"] = {{"name", schema.target.name},
                   {"transform", std::string(to_string(schema.target.transform))}};
  if (schema.target.source_transform != TargetTransform::none) {
    doc["target"]["source_transform"] = std::string(to_string(schema.target.source_transform));
  }
  json cols = json::array();
  for (std::size_t i = 0; i < schema.columns.size(); ++i) {
    const auto& c = schema.columns[i];
    json col = {{"name", c.name},
                {"modality", std::string(to_string(c.modality))},
                {"kind", std::string(to_string(c.kind))}};
    if (c.declared_range) col["range"] = {c.declared_range->first, c.declared_range->second};
    if (scaling && i < scaling->size()) {
      const auto& s = (*scaling)[i];
      col["raw_range"] = {s.lo, s.hi};
    }
    cols.push_back(std::move(col));
  }
  doc["columns"] = std::move(cols);
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// FeatureTable

FeatureTable::FeatureTable(Schema schema, Matrix values, std::vector<double> target,
                           std::vector<std::string> row_ids, TargetTransform target_transform,
                           std::vector<ColumnScaling> scaling)
    : schema_(std::move(schema)),
      values_(std::move(values)),
      target_(std::move(target)),
      row_ids_(std::move(row_ids)),
      target_transform_(target_transform),
      scaling_(std::move(scaling)) {
  schema_.validate();
  const std::size_t n = values_.rows();
  if (values_.cols() != schema_.size()) {
    throw SchemaError("table has " + std::to_string(values_.cols()) + " columns, schema has " +
                      std::to_string(schema_.size()));
  }
  if (target_.size() != n || row_ids_.size() != n) {
    throw SchemaError("table target/row_id length does not match row count");
  }
  if (scaling_.empty()) scaling_.assign(schema_.size(), ColumnScaling{});
  if (scaling_.size() != schema_.size()) throw SchemaError("scaling metadata size mismatch");

  std::unordered_set<std::string> ids;
  for (const auto& id : row_ids_) {
    if (!ids.insert(id).second) throw DuplicateIdError("duplicate row_id '" + id + "'");
  }
  for (std::size_t r = 0; r < n; ++r) {
    if (!std::isfinite(target_[r])) {
      throw ParseError("non-finite target at row '" + row_ids_[r] + "'");
    }
  }
  for (std::size_t c = 0; c < schema_.size(); ++c) {
    const auto& spec = schema_.columns[c];
    const Range range = spec.declared_range.value_or(Range{0.0, 100.0});
    for (std::size_t r = 0; r < n; ++r) {
      const double v = values_(r, c);
      if (!std::isfinite(v)) {
        throw ParseError("non-finite value in column '" + spec.name + "' row '" + row_ids_[r] + "'");
      }
      if (v < range.first || v > range.second) {
        throw SchemaError("value " + io::format_double(v) + " in column '" + spec.name +
                          "' outside its range");
      }
      if (spec.kind == ColumnKind::binary && v != 0.0 && v != 100.0) {
        throw SchemaError("binary column '" + spec.name + "' holds non-binary value " +
                          io::format_double(v));
      }
    }
  }
}

FeatureTable FeatureTable::select_rows(const std::vector<std::size_t>& indices) const {
  std::vector<double> target;
  std::vector<std::string> ids;
  target.reserve(indices.size());
  ids.reserve(indices.size());
  for (auto i : indices) {
    target.push_back(target_.at(i));
    ids.push_back(row_ids_.at(i));
  }
  return FeatureTable(schema_, values_.select_rows(indices), std::move(target), std::move(ids),
                      target_transform_, scaling_);
}

// ---------------------------------------------------------------------------
// normalize

FeatureTable normalize(const RawTable& raw, const NormalizeOptions& options,
                       NormalizeReport* report) {
  raw.schema.validate();
  const std::size_t n = raw.values.rows();
  const std::size_t p = raw.schema.size();
  if (raw.values.cols() != p) throw SchemaError("raw table width does not match schema");

  Schema schema = raw.schema;
  Matrix values = raw.values;
  std::vector<ColumnScaling> scaling(p);
  std::size_t clamped = 0;

  for (std::size_t c = 0; c < p; ++c) {
    auto& spec = schema.columns[c];
    for (std::size_t r = 0; r < n; ++r) {
      if (!std::isfinite(values(r, c))) {
        throw ParseError("non-finite value in column '" + spec.name + "' at row " +
                         std::to_string(r + 1));
      }
    }
    if (spec.declared_range && spec.kind != ColumnKind::binary) {
      const auto [lo, hi] = *spec.declared_range;
      for (std::size_t r = 0; r < n; ++r) {
        double& v = values(r, c);
        if (v >= lo && v <= hi) continue;
        if (!options.clamp) {
          throw SchemaError("value " + io::format_double(v) + " in column '" + spec.name +
                            "' outside declared range [" + io::format_double(lo) + ", " +
                            io::format_double(hi) + "]");
        }
        v = std::clamp(v, lo, hi);
        ++clamped;
      }
    }

    switch (spec.kind) {
      case ColumnKind::probabilistic:
        break;
      case ColumnKind::binary: {
        bool unit = true;     // values in {0, 1}
        bool percent = true;  // values in {0, 100}
        for (std::size_t r = 0; r < n; ++r) {
          const double v = values(r, c);
          unit = unit && (v == 0.0 || v == 1.0);
          percent = percent && (v == 0.0 || v == 100.0);
        }
        if (!unit && !percent) {
          throw SchemaError("binary column '" + spec.name + "' holds values outside {0,1} or {0,100}");
        }
        if (!percent) {
          for (std::size_t r = 0; r < n; ++r) values(r, c) *= 100.0;
          scaling[c] = ColumnScaling{0.0, 1.0};
        }
        break;
      }
      case ColumnKind::continuous: {
        if (n == 0) break;
        double lo = values(0, c);
        double hi = lo;
        for (std::size_t r = 1; r < n; ++r) {
          lo = std::min(lo, values(r, c));
          hi = std::max(hi, values(r, c));
        }
        scaling[c] = ColumnScaling{lo, hi};
        if (lo == hi) {
          for (std::size_t r = 0; r < n; ++r) values(r, c) = 50.0;
        } else if (!(lo == 0.0 && hi == 100.0)) {
          const double span = hi - lo;
          for (std::size_t r = 0; r < n; ++r) {
            // Pin the extremes so rounding never leaves [0, 100].
            const double v = values(r, c);
            values(r, c) = v == lo ? 0.0 : v == hi ? 100.0 : std::clamp((v - lo) / span * 100.0, 0.0, 100.0);
          }
        }
        break;
      }
    }
    spec.declared_range = Range{0.0, 100.0};
  }

  if (report) report->clamped_cells += clamped;
  return FeatureTable(std::move(schema), std::move(values), raw.target, raw.row_ids,
                      raw.target_transform, std::move(scaling));
}

FeatureTable normalize(const FeatureTable& table) {
  RawTable raw{table.schema(), table.values(), table.target(), table.row_ids(),
               table.target_transform()};
  FeatureTable out = normalize(raw);
  // Already on the 0-100 scale: keep the original raw-unit metadata.
  return FeatureTable(out.schema(), out.values(), out.target(), out.row_ids(),
                      out.target_transform(), table.scaling());
}

// ---------------------------------------------------------------------------
// ingest

namespace {

bool is_missing(std::string_view cell) {
  const auto first = cell.find_first_not_of(" \t");
  return first == std::string_view::npos;
}

}  // namespace

IngestResult ingest_text(std::string_view csv_text, const Schema& schema,
                         const IngestOptions& options) {
  schema.validate();
  const io::CsvDocument doc = io::parse_csv(csv_text);

  const auto id_col = doc.find("row_id");
  if (!id_col) throw SchemaError("feature CSV lacks the required column 'row_id'");
  const auto target_col = doc.find(schema.target.name);
  if (!target_col) throw SchemaError("feature CSV lacks target column '" + schema.target.name + "'");

  std::vector<std::size_t> feature_cols;
  for (const auto& spec : schema.columns) {
    auto idx = doc.find(spec.name);
    if (!idx) throw SchemaError("feature CSV lacks schema column '" + spec.name + "'");
    feature_cols.push_back(*idx);
  }
  {
    std::set<std::string> seen;
    for (const auto& h : doc.header) {
      if (!seen.insert(h).second) throw SchemaError("feature CSV repeats column '" + h + "'");
      if (h != "row_id" && h != schema.target.name && !schema.index_of(h)) {
        throw SchemaError("feature CSV column '" + h + "' is not in the schema");
      }
    }
  }

  IngestReport report;
  report.rows_read = doc.rows.size();
  const std::size_t p = schema.size();
  std::vector<double> cells;
  std::vector<double> target;
  std::vector<std::string> ids;
  std::unordered_set<std::string> id_set;

  for (std::size_t r = 0; r < doc.rows.size(); ++r) {
    const auto& row = doc.rows[r];
    const std::string& id = row[*id_col];
    if (is_missing(id)) throw ParseError("row " + std::to_string(r + 1) + " has an empty row_id");
    if (!id_set.insert(id).second) throw DuplicateIdError("duplicate row_id '" + id + "'");

    auto parse_cell = [&](std::size_t col, const std::string& name) -> std::optional<double> {
      const std::string& cell = row[col];
      if (is_missing(cell)) return std::nullopt;
      auto v = io::parse_double(cell);
      if (!v) {
        throw ParseError("unparseable numeric cell '" + cell + "' at row " + std::to_string(r + 1) +
                         ", column '" + name + "'");
      }
      return v;
    };

    std::vector<double> row_values(p);
    bool drop = false;
    std::size_t filled = 0;
    for (std::size_t c = 0; c < p; ++c) {
      auto v = parse_cell(feature_cols[c], schema.columns[c].name);
      if (!v) {
        if (options.missing_policy == MissingPolicy::drop_row) {
          drop = true;
          break;
        }
        ++filled;
        v = 0.0;
      }
      row_values[c] = *v;
    }
    if (drop) {
      ++report.dropped;
      continue;
    }
    auto y = parse_cell(*target_col, schema.target.name);
    if (!y) {
      if (options.missing_policy == MissingPolicy::drop_row) {
        ++report.dropped;
        continue;
      }
      ++filled;
      y = 0.0;
    }
    if (!std::isfinite(*y)) {
      throw ParseError("non-finite target at row " + std::to_string(r + 1));
    }
    double value = *y;
    if (schema.target.transform == TargetTransform::log1p) {
      if (value < 0.0) {
        throw SchemaError("negative target " + io::format_double(value) + " at row " +
                          std::to_string(r + 1) + " cannot be log1p-transformed");
      }
      value = std::log1p(value);
    }
    report.filled_cells += filled;
    cells.insert(cells.end(), row_values.begin(), row_values.end());
    target.push_back(value);
    ids.push_back(id);
  }

  report.rows_kept = ids.size();
  const TargetTransform applied = schema.target.transform == TargetTransform::log1p
                                      ? TargetTransform::log1p
                                      : schema.target.source_transform;
  RawTable raw{schema, Matrix(ids.size(), p, std::move(cells)), std::move(target), std::move(ids),
               applied};
  NormalizeReport norm_report;
  FeatureTable table = normalize(raw, NormalizeOptions{options.clamp}, &norm_report);
  report.clamped_cells = norm_report.clamped_cells;
  return IngestResult{std::move(table), report};
}

IngestResult ingest(const std::filesystem::path& csv_path,
                    const std::filesystem::path& schema_path, const IngestOptions& options) {
  const Schema schema = read_schema(schema_path);
  IngestResult result = ingest_text(io::read_file(csv_path), schema, options);

  // Restore raw-unit scaling recorded by write_table, if any.
  json doc = json::parse(io::read_file(schema_path));
  std::vector<ColumnScaling> scaling = result.table.scaling();
  bool restored = false;
  const auto& cols = doc.at("columns");
  for (std::size_t c = 0; c < cols.size() && c < scaling.size(); ++c) {
    if (cols[c].contains("raw_range")) {
      scaling[c] = ColumnScaling{cols[c]["raw_range"][0].get<double>(),
                                 cols[c]["raw_range"][1].get<double>()};
      restored = true;
    }
  }
  if (restored) {
    const FeatureTable& t = result.table;
    result.table = FeatureTable(t.schema(), t.values(), t.target(), t.row_ids(),
                                t.target_transform(), std::move(scaling));
  }
  return result;
}

std::string table_to_csv(const FeatureTable& table) {
  std::vector<std::string> header{"row_id"};
  for (const auto& c : table.schema().columns) header.push_back(c.name);
  header.push_back(table.schema().target.name);
  std::string out = io::csv_line(header);
  std::vector<std::string> cells(header.size());
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    cells[0] = table.row_ids()[r];
    for (std::size_t c = 0; c < table.n_cols(); ++c) {
      cells[c + 1] = io::format_double(table.values()(r, c));
    }
    cells.back() = io::format_double(table.target()[r]);
    out += io::csv_line(cells);
  }
  return out;
}

void write_table(const FeatureTable& table, const std::filesystem::path& csv_path,
                 const std::filesystem::path& schema_path) {
  Schema schema = table.schema();
  schema.target.transform = TargetTransform::none;
  schema.target.source_transform = table.target_transform();
  io::write_file(csv_path, table_to_csv(table));
  io::write_file(schema_path, schema_to_json(schema, &table.scaling()));
}

// ---------------------------------------------------------------------------
// split

SplitIndex split(std::size_t n_rows, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train fraction must lie in (0, 1), got " + io::format_double(train_fraction));
  }
  if (n_rows < 5) throw ConfigError("split needs at least 5 rows, got " + std::to_string(n_rows));

  std::vector<std::size_t> order(n_rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n_rows)));
  n_train = std::clamp<std::size_t>(n_train, 1, n_rows - 1);

  SplitIndex out;
  out.seed = seed;
  out.train_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.test_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(out.train_rows.begin(), out.train_rows.end());
  std::sort(out.test_rows.begin(), out.test_rows.end());
  return out;
}

}  // namespace modal_attrib
