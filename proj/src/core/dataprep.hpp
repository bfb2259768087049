#pragma once

// Table ingestion and preparation: cleansing of exported DfT sheets, median
// imputation, year-keyed outer merge, robust (median / IQR) scaling and the
// supervised lookback-window framing with train/test splits.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "numkernel.hpp"

namespace roadfc {

struct RawTable {
  std::string source_name;
  std::vector<std::vector<std::string>> cells;
};

RawTable read_raw_table(const std::filesystem::path& path);

/// Year-keyed table of named double columns. NaN marks a missing value until
/// impute() runs.
class SeriesTable {
 public:
  SeriesTable() = default;
  explicit SeriesTable(std::vector<int> years) : years_(std::move(years)) {}

  std::size_t rows() const noexcept { return years_.size(); }
  const std::vector<int>& years() const noexcept { return years_; }
  const std::vector<std::string>& names() const noexcept { return names_; }

  bool has_column(std::string_view name) const;
  const Vec& column(std::string_view name) const;
  Vec& column(std::string_view name);
  void add_column(std::string name, Vec values);

  bool has_missing() const;
  /// Throws InvalidArgument unless years are strictly increasing and every
  /// column has one value per row.
  void validate_shape() const;

  bool operator==(const SeriesTable&) const = default;

 private:
  std::vector<int> years_;
  std::vector<std::string> names_;
  std::vector<Vec> columns_;
};

/// Text to number: trims whitespace, drops every comma, parses the rest as a
/// decimal number. Anything unparseable becomes 0.
double parse_value(std::string_view text);

/// Removes a bracketed annotation, greedy from the first '[' to the last ']'.
std::string strip_annotations(std::string_view text);

/// Drops the first skip_rows rows, keeps the first headers.size() columns
/// under the given names and converts every cell. The first header is the
/// year column. Cells empty after annotation stripping become missing; rows
/// whose year cell is not a positive integer are dropped.
SeriesTable cleanse_table(const RawTable& raw, std::size_t skip_rows,
                          std::span<const std::string> headers);

/// Treats +-inf and NaN as missing and fills each gap with its column median.
SeriesTable impute(SeriesTable table);

/// Outer join on year. Years absent from a source leave that source's
/// columns missing (NaN); run impute() afterwards.
SeriesTable merge_on_year(std::span<const SeriesTable> tables);
SeriesTable merge_on_year(const SeriesTable& a, const SeriesTable& b, const SeriesTable& c);

void write_series_csv(const SeriesTable& table, const std::filesystem::path& path);
std::string series_csv_text(const SeriesTable& table);
/// Reads a table written by write_series_csv (header row "year,...").
SeriesTable read_series_csv(const std::filesystem::path& path);

struct ColumnScale {
  std::string name;
  double center = 0.0;  // median
  double scale = 1.0;   // IQR, or 1 when the IQR is zero
  bool degenerate = false;

  double apply(double x) const;
  double invert(double z) const;
};

struct RobustScaleParams {
  std::vector<ColumnScale> columns;

  const ColumnScale& at(std::string_view name) const;
};

RobustScaleParams fit_robust_scale(const SeriesTable& table, std::span<const std::string> cols);
/// Scales the fitted columns, leaving others untouched. Non-finite results
/// are replaced by 0.
SeriesTable apply_scale(SeriesTable table, const RobustScaleParams& params);
SeriesTable invert_scale(SeriesTable table, const RobustScaleParams& params);

struct Sample {
  std::vector<Vec> window;  // L rows of D features, oldest first
  double target = 0.0;
  int target_year = 0;
  std::size_t target_row = 0;
};

struct WindowedDataset {
  std::size_t lookback = 0;
  std::vector<std::string> feature_names;
  std::string target_name;
  std::vector<Sample> samples;
  std::vector<std::string> warnings;
};

/// Sample k pairs feature rows k..k+L-1 with the target at row k+L.
WindowedDataset make_windows(const SeriesTable& table, std::span<const std::string> feature_cols,
                             std::string_view target_col, std::size_t lookback);

enum class SplitMode { Chronological, Shuffled };

std::string_view to_string(SplitMode mode);
SplitMode split_mode_from_string(std::string_view name);

struct DatasetSplit {
  std::vector<Sample> train;
  std::vector<Sample> test;
};

/// train size = floor(fraction * count). Chronological keeps the earliest
/// samples in train; shuffled permutes with `seed` first.
DatasetSplit split(const WindowedDataset& data, double train_fraction, SplitMode mode,
                   std::uint64_t seed = 0);

// Column layouts of the three exported DfT sheets.
extern const std::vector<std::string> kCollisionsHeaders;
extern const std::vector<std::string> kCasualtiesHeaders;
extern const std::vector<std::string> kVehiclesHeaders;

}  // namespace roadfc
