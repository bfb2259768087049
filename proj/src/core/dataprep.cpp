#include "dataprep.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <utility>

#include "csv.hpp"
#include "error.hpp"

namespace roadfc {

const std::vector<std::string> kCollisionsHeaders = {"year", "fatal", "fsc_unadjusted",
                                                     "fsc_adjusted", "all_collisions"};
const std::vector<std::string> kCasualtiesHeaders = {
    "year",
    "pedestrians_killed",
    "pedal_cyclists_killed",
    "motorcyclists_killed",
    "car_occupants_killed",
    "other_road_users_killed",
    "all_road_users_killed",
    "all_road_users_all_severities"};
const std::vector<std::string> kVehiclesHeaders = {
    "year",         "pedal_cycles",         "motorcycles",          "cars",
    "buses_or_coaches", "light_goods_vehicles", "heavy_goods_vehicles", "other_vehicles",
    "unknown_vehicles", "all_vehicles"};

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

bool is_space(char ch) {
  return ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' || ch == '\f' || ch == '\v';
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace

RawTable read_raw_table(const std::filesystem::path& path) {
  return RawTable{path.filename().string(), csv::read_file(path)};
}

bool SeriesTable::has_column(std::string_view name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

const Vec& SeriesTable::column(std::string_view name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw InvalidArgument("unknown column '" + std::string(name) + "'");
  return columns_[static_cast<std::size_t>(it - names_.begin())];
}

Vec& SeriesTable::column(std::string_view name) {
  return const_cast<Vec&>(std::as_const(*this).column(name));
}

void SeriesTable::add_column(std::string name, Vec values) {
  if (name == "year") throw InvalidArgument("'year' is the key column, not a data column");
  if (has_column(name)) throw InvalidArgument("duplicate column '" + name + "'");
  if (values.size() != years_.size()) {
    throw InvalidArgument("column '" + name + "' has " + std::to_string(values.size()) +
                          " values for " + std::to_string(years_.size()) + " rows");
  }
  names_.push_back(std::move(name));
  columns_.push_back(std::move(values));
}

bool SeriesTable::has_missing() const {
  for (const auto& col : columns_) {
    for (double v : col) {
      if (!std::isfinite(v)) return true;
    }
  }
  return false;
}

void SeriesTable::validate_shape() const {
  for (std::size_t r = 1; r < years_.size(); ++r) {
    if (years_[r] <= years_[r - 1]) {
      throw InvalidArgument("years not strictly increasing at " + std::to_string(years_[r]));
    }
  }
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    if (columns_[c].size() != years_.size()) {
      throw InvalidArgument("column '" + names_[c] + "' length mismatch");
    }
  }
}

double parse_value(std::string_view text) {
  std::string cleaned;
  for (char ch : trim(text)) {
    if (ch != ',') cleaned.push_back(ch);
  }
  std::string_view s = cleaned;
  // from_chars rejects a leading '+', which Python's float() accepts.
  bool negate = false;
  if (!s.empty() && (s.front() == '+' || s.front() == '-')) {
    negate = s.front() == '-';
    s.remove_prefix(1);
  }
  if (s.empty() || s.front() == '+' || s.front() == '-') return 0.0;
  double value = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    // Overflowing literals behave like float(): +-inf.
    if (res.ec == std::errc::result_out_of_range && res.ptr == s.data() + s.size()) {
      value = std::numeric_limits<double>::infinity();
    } else {
      return 0.0;
    }
  }
  return negate ? -value : value;
}

std::string strip_annotations(std::string_view text) {
  const auto open = text.find('[');
  if (open == std::string_view::npos) return std::string(text);
  const auto close = text.rfind(']');
  if (close == std::string_view::npos || close < open) return std::string(text);
  std::string out(text.substr(0, open));
  out.append(text.substr(close + 1));
  return out;
}

namespace {

std::optional<int> parse_year(std::string_view cell) {
  const std::string stripped = strip_annotations(cell);
  if (trim(stripped).empty()) return std::nullopt;
  const double v = parse_value(stripped);
  if (!(v >= 1.0 && v <= 9999.0) || v != std::floor(v)) return std::nullopt;
  return static_cast<int>(v);
}

}  // namespace

SeriesTable cleanse_table(const RawTable& raw, std::size_t skip_rows,
                          std::span<const std::string> headers) {
  if (headers.empty() || headers.front() != "year") {
    throw InvalidArgument("first header must be 'year'");
  }
  if (raw.cells.size() <= skip_rows) {
    throw InputError(raw.source_name + ": has " + std::to_string(raw.cells.size()) +
                     " rows, cannot skip " + std::to_string(skip_rows));
  }

  std::vector<int> years;
  std::vector<Vec> values(headers.size() - 1);
  for (std::size_t r = skip_rows; r < raw.cells.size(); ++r) {
    const auto& row = raw.cells[r];
    const bool blank = std::all_of(row.begin(), row.end(),
                                   [](const std::string& c) { return trim(c).empty(); });
    if (blank) continue;
    const auto year = parse_year(row[0]);
    if (!year) continue;
    if (row.size() < headers.size()) {
      std::string expected;
      for (const auto& h : headers) expected += (expected.empty() ? "" : ", ") + h;
      throw InputError(raw.source_name + ": row " + std::to_string(r + 1) + " has " +
                       std::to_string(row.size()) + " columns, expected at least " +
                       std::to_string(headers.size()) + " [" + expected + "]");
    }
    years.push_back(*year);
    for (std::size_t c = 1; c < headers.size(); ++c) {
      const std::string cell = strip_annotations(row[c]);
      values[c - 1].push_back(trim(cell).empty() ? kMissing : parse_value(cell));
    }
  }
  if (years.empty()) throw InputError(raw.source_name + ": no data rows after cleansing");

  // Sort by year; duplicates are an input error.
  std::vector<std::size_t> order(years.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return years[a] < years[b]; });
  std::vector<int> sorted_years;
  for (std::size_t k : order) sorted_years.push_back(years[k]);
  for (std::size_t k = 1; k < sorted_years.size(); ++k) {
    if (sorted_years[k] == sorted_years[k - 1]) {
      throw InputError(raw.source_name + ": duplicate year " + std::to_string(sorted_years[k]));
    }
  }
  SeriesTable table(std::move(sorted_years));
  for (std::size_t c = 1; c < headers.size(); ++c) {
    Vec col;
    col.reserve(order.size());
    for (std::size_t k : order) col.push_back(values[c - 1][k]);
    table.add_column(headers[c], std::move(col));
  }
  return table;
}

SeriesTable impute(SeriesTable table) {
  for (const auto& name : table.names()) {
    Vec& col = table.column(name);
    Vec present;
    for (double v : col) {
      if (std::isfinite(v)) present.push_back(v);
    }
    if (present.empty()) throw InputError("column '" + name + "' has no finite values");
    if (present.size() == col.size()) continue;
    const double fill = median(present);
    for (double& v : col) {
      if (!std::isfinite(v)) v = fill;
    }
  }
  return table;
}

SeriesTable merge_on_year(std::span<const SeriesTable> tables) {
  std::set<int> all_years;
  std::set<std::string> seen;
  for (const auto& t : tables) {
    t.validate_shape();
    all_years.insert(t.years().begin(), t.years().end());
    for (const auto& name : t.names()) {
      if (!seen.insert(name).second) {
        throw InputError("duplicate column '" + name + "' across merged tables");
      }
    }
  }
  std::vector<int> years(all_years.begin(), all_years.end());
  std::map<int, std::size_t> row_of;
  for (std::size_t r = 0; r < years.size(); ++r) row_of[years[r]] = r;

  SeriesTable merged(years);
  for (const auto& t : tables) {
    for (const auto& name : t.names()) {
      Vec col(years.size(), kMissing);
      const Vec& src = t.column(name);
      for (std::size_t r = 0; r < t.rows(); ++r) col[row_of.at(t.years()[r])] = src[r];
      merged.add_column(name, std::move(col));
    }
  }
  return merged;
}

SeriesTable merge_on_year(const SeriesTable& a, const SeriesTable& b, const SeriesTable& c) {
  const SeriesTable all[] = {a, b, c};
  return merge_on_year(std::span<const SeriesTable>(all));
}

std::string series_csv_text(const SeriesTable& table) {
  std::string out = "year";
  for (const auto& name : table.names()) out += "," + csv::escape(name);
  out += "\n";
  for (std::size_t r = 0; r < table.rows(); ++r) {
    out += std::to_string(table.years()[r]);
    for (const auto& name : table.names()) {
      out += ",";
      out += csv::format_double(table.column(name)[r]);
    }
    out += "\n";
  }
  return out;
}

void write_series_csv(const SeriesTable& table, const std::filesystem::path& path) {
  csv::write_text(path, series_csv_text(table));
}

SeriesTable read_series_csv(const std::filesystem::path& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty() || rows.front().empty() || rows.front().front() != "year") {
    throw InputError(path.string() + ": expected a header row starting with 'year'");
  }
  const auto& header = rows.front();
  std::vector<int> years;
  std::vector<Vec> cols(header.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      throw InputError(path.string() + ": row " + std::to_string(r + 1) + " has " +
                       std::to_string(row.size()) + " fields, header has " +
                       std::to_string(header.size()));
    }
    const auto year = parse_year(row[0]);
    if (!year) throw InputError(path.string() + ": bad year '" + row[0] + "'");
    years.push_back(*year);
    for (std::size_t c = 1; c < row.size(); ++c) cols[c - 1].push_back(parse_value(row[c]));
  }
  SeriesTable table(std::move(years));
  for (std::size_t c = 1; c < header.size(); ++c) table.add_column(header[c], std::move(cols[c - 1]));
  try {
    table.validate_shape();
  } catch (const InvalidArgument& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return table;
}

double ColumnScale::apply(double x) const {
  const double z = (x - center) / scale;
  return std::isfinite(z) ? z : 0.0;
}

double ColumnScale::invert(double z) const { return z * scale + center; }

const ColumnScale& RobustScaleParams::at(std::string_view name) const {
  for (const auto& c : columns) {
    if (c.name == name) return c;
  }
  throw InvalidArgument("no scale fitted for column '" + std::string(name) + "'");
}

RobustScaleParams fit_robust_scale(const SeriesTable& table, std::span<const std::string> cols) {
  RobustScaleParams params;
  for (const auto& name : cols) {
    const Vec& values = table.column(name);
    for (double v : values) {
      if (!std::isfinite(v)) throw InvalidArgument("column '" + name + "' is not finite");
    }
    ColumnScale cs;
    cs.name = name;
    cs.center = median(values);
    const double iqr = quantile(values, 0.75) - quantile(values, 0.25);
    cs.degenerate = !(iqr > 0.0);
    cs.scale = cs.degenerate ? 1.0 : iqr;
    params.columns.push_back(std::move(cs));
  }
  return params;
}

SeriesTable apply_scale(SeriesTable table, const RobustScaleParams& params) {
  for (const auto& cs : params.columns) {
    for (double& v : table.column(cs.name)) v = cs.apply(v);
  }
  return table;
}

SeriesTable invert_scale(SeriesTable table, const RobustScaleParams& params) {
  for (const auto& cs : params.columns) {
    for (double& v : table.column(cs.name)) v = cs.invert(v);
  }
  return table;
}

WindowedDataset make_windows(const SeriesTable& table, std::span<const std::string> feature_cols,
                             std::string_view target_col, std::size_t lookback) {
  if (lookback < 1) throw InvalidArgument("lookback must be >= 1");
  if (feature_cols.empty()) throw InvalidArgument("no feature columns selected");
  const std::size_t n = table.rows();
  if (lookback >= n) {
    throw InvalidArgument("lookback " + std::to_string(lookback) + " needs more than " +
                          std::to_string(lookback) + " rows, table has " + std::to_string(n));
  }
  std::vector<const Vec*> features;
  for (const auto& name : feature_cols) features.push_back(&table.column(name));
  const Vec& target = table.column(target_col);

  WindowedDataset data;
  data.lookback = lookback;
  data.feature_names.assign(feature_cols.begin(), feature_cols.end());
  data.target_name = std::string(target_col);
  for (std::size_t r = 1; r < n; ++r) {
    if (table.years()[r] != table.years()[r - 1] + 1) {
      data.warnings.push_back("year gap between " + std::to_string(table.years()[r - 1]) +
                              " and " + std::to_string(table.years()[r]));
    }
  }
  data.samples.reserve(n - lookback);
  for (std::size_t k = 0; k + lookback < n; ++k) {
    Sample s;
    s.window.reserve(lookback);
    for (std::size_t r = k; r < k + lookback; ++r) {
      Vec row(features.size());
      for (std::size_t f = 0; f < features.size(); ++f) row[f] = (*features[f])[r];
      s.window.push_back(std::move(row));
    }
    s.target_row = k + lookback;
    s.target = target[s.target_row];
    s.target_year = table.years()[s.target_row];
    data.samples.push_back(std::move(s));
  }
  return data;
}

std::string_view to_string(SplitMode mode) {
  return mode == SplitMode::Chronological ? "chrono" : "shuffled";
}

SplitMode split_mode_from_string(std::string_view name) {
  if (name == "chrono" || name == "chronological") return SplitMode::Chronological;
  if (name == "shuffled") return SplitMode::Shuffled;
  throw InvalidArgument("unknown split mode '" + std::string(name) + "'");
}

DatasetSplit split(const WindowedDataset& data, double train_fraction, SplitMode mode,
                   std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidArgument("train fraction must lie in (0, 1)");
  }
  const std::size_t count = data.samples.size();
  // The small epsilon keeps e.g. 0.7 * 10 from flooring to 6.
  const auto n_train =
      static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(count) + 1e-9));
  if (n_train == 0 || n_train >= count) {
    throw InvalidArgument("train fraction " + csv::format_double(train_fraction) + " of " +
                          std::to_string(count) + " samples leaves an empty side");
  }
  std::vector<std::size_t> order(count);
  for (std::size_t k = 0; k < count; ++k) order[k] = k;
  if (mode == SplitMode::Shuffled) {
    Rng rng(seed);
    shuffle_indices(rng, order);
  }
  DatasetSplit out;
  out.train.reserve(n_train);
  out.test.reserve(count - n_train);
  for (std::size_t k = 0; k < count; ++k) {
    (k < n_train ? out.train : out.test).push_back(data.samples[order[k]]);
  }
  return out;
}

}  // namespace roadfc
