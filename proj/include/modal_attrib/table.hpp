#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "modal_attrib/matrix.hpp"

namespace modal_attrib {

enum class Modality { text, visual, audio, meta };
enum class ColumnKind { probabilistic, continuous, binary };
enum class TargetTransform { none, log1p };
enum class MissingPolicy { drop_row, fill_zero };

std::string_view to_string(Modality m);
std::string_view to_string(ColumnKind k);
std::string_view to_string(TargetTransform t);
std::string_view to_string(MissingPolicy p);
Modality parse_modality(std::string_view s);
ColumnKind parse_column_kind(std::string_view s);
TargetTransform parse_target_transform(std::string_view s);
MissingPolicy parse_missing_policy(std::string_view s);

using Range = std::pair<double, double>;

struct ColumnSpec {
  std::string name;
  Modality modality = Modality::meta;
  ColumnKind kind = ColumnKind::continuous;
  std::optional<Range> declared_range;

  bool operator==(const ColumnSpec&) const = default;
};

struct TargetSpec {
  std::string name;
  // Transform applied to the raw target column at ingest.
  TargetTransform transform = TargetTransform::log1p;
  // Transform already carried by the stored values (set when a normalized
  // table is written back out, so re-ingest does not apply it twice).
  TargetTransform source_transform = TargetTransform::none;

  bool operator==(const TargetSpec&) const = default;
};

// Affine map from raw units onto the 0-100 scale: normalized = (raw - lo) *
// 100 / (hi - lo). lo == hi marks a constant column mapped to 50.
struct ColumnScaling {
  double lo = 0.0;
  double hi = 100.0;

  double to_raw(double normalized) const;
  bool operator==(const ColumnScaling&) const = default;
};

struct Schema {
  TargetSpec target;
  std::vector<ColumnSpec> columns;

  std::size_t size() const noexcept { return columns.size(); }
  std::optional<std::size_t> index_of(std::string_view name) const;
  std::size_t require_index(std::string_view name) const;  // SchemaError if absent
  std::vector<std::string> names() const;

  // Order-sensitive hash of column names, stable across runs and platforms.
  std::string fingerprint() const;

  // Unique names, probabilistic columns ranged [0, 100], ranges ordered.
  void validate() const;

  bool operator==(const Schema&) const = default;
};

std::string fingerprint_names(const std::vector<std::string>& names);

Schema parse_schema_json(std::string_view json_text);
Schema read_schema(const std::filesystem::path& path);
std::string schema_to_json(const Schema& schema,
                           const std::vector<ColumnScaling>* scaling = nullptr);

// Table before normalization: arbitrary ranges, no invariants beyond shape.
struct RawTable {
  Schema schema;
  Matrix values;
  std::vector<double> target;
  std::vector<std::string> row_ids;
  TargetTransform target_transform = TargetTransform::none;
};

// Normalized multimodal feature table. Immutable after construction; the
// constructor enforces every invariant.
class FeatureTable {
 public:
  FeatureTable() = default;
  FeatureTable(Schema schema, Matrix values, std::vector<double> target,
               std::vector<std::string> row_ids,
               TargetTransform target_transform = TargetTransform::none,
               std::vector<ColumnScaling> scaling = {});

  const Schema& schema() const noexcept { return schema_; }
  const Matrix& values() const noexcept { return values_; }
  const std::vector<double>& target() const noexcept { return target_; }
  const std::vector<std::string>& row_ids() const noexcept { return row_ids_; }
  TargetTransform target_transform() const noexcept { return target_transform_; }
  const std::vector<ColumnScaling>& scaling() const noexcept { return scaling_; }

  std::size_t n_rows() const noexcept { return values_.rows(); }
  std::size_t n_cols() const noexcept { return values_.cols(); }

  FeatureTable select_rows(const std::vector<std::size_t>& indices) const;

 private:
  Schema schema_;
  Matrix values_;
  std::vector<double> target_;
  std::vector<std::string> row_ids_;
  TargetTransform target_transform_ = TargetTransform::none;
  std::vector<ColumnScaling> scaling_;
};

struct NormalizeOptions {
  // Clamp out-of-range probabilistic / declared-range values instead of failing.
  bool clamp = false;
};

struct NormalizeReport {
  std::size_t clamped_cells = 0;
};

FeatureTable normalize(const RawTable& raw, const NormalizeOptions& options = {},
                       NormalizeReport* report = nullptr);
FeatureTable normalize(const FeatureTable& table);

struct IngestOptions {
  MissingPolicy missing_policy = MissingPolicy::drop_row;
  bool clamp = false;
};

struct IngestReport {
  std::size_t rows_read = 0;
  std::size_t rows_kept = 0;
  std::size_t dropped = 0;
  std::size_t filled_cells = 0;
  std::size_t clamped_cells = 0;
};

struct IngestResult {
  FeatureTable table;
  IngestReport report;
};

IngestResult ingest_text(std::string_view csv_text, const Schema& schema,
                         const IngestOptions& options = {});
IngestResult ingest(const std::filesystem::path& csv_path,
                    const std::filesystem::path& schema_path,
                    const IngestOptions& options = {});

// Writes the table as feature CSV plus schema JSON such that ingest()
// reproduces it bit-identically.
std::string table_to_csv(const FeatureTable& table);
void write_table(const FeatureTable& table, const std::filesystem::path& csv_path,
                 const std::filesystem::path& schema_path);

struct SplitIndex {
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
  std::uint64_t seed = 0;

  bool operator==(const SplitIndex&) const = default;
};

// Seeded uniform permutation, prefix of round(fraction * n) rows to train.
// Both index lists are returned sorted ascending.
SplitIndex split(std::size_t n_rows, double train_fraction, std::uint64_t seed);
inline SplitIndex split(const FeatureTable& table, double train_fraction, std::uint64_t seed) {
  return split(table.n_rows(), train_fraction, seed);
}

}  // namespace modal_attrib
