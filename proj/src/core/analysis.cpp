#include "analysis.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"

namespace roadfc {

const std::vector<std::string> kVehicleTypeColumns = {
    "pedal_cycles",         "motorcycles",          "cars",           "buses_or_coaches",
    "light_goods_vehicles", "heavy_goods_vehicles", "other_vehicles", "unknown_vehicles"};

namespace {

void check_pair(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) {
    throw InvalidArgument("metric length mismatch: " + std::to_string(y.size()) + " vs " +
                          std::to_string(yhat.size()));
  }
  if (y.empty()) throw InvalidArgument("metric of empty input");
}

}  // namespace

double rmse(std::span<const double> y, std::span<const double> yhat) {
  check_pair(y, yhat);
  double acc = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) acc += (y[k] - yhat[k]) * (y[k] - yhat[k]);
  return std::sqrt(acc / static_cast<double>(y.size()));
}

double mae(std::span<const double> y, std::span<const double> yhat) {
  check_pair(y, yhat);
  double acc = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) acc += std::abs(y[k] - yhat[k]);
  return acc / static_cast<double>(y.size());
}

EvalReport evaluate(std::span<const double> y, std::span<const double> yhat) {
  EvalReport r;
  r.rmse = rmse(y, yhat);
  r.mae = mae(y, yhat);
  r.n = y.size();
  r.residuals.resize(y.size());
  for (std::size_t k = 0; k < y.size(); ++k) r.residuals[k] = y[k] - yhat[k];
  return r;
}

std::string decade_label(int year) { return std::to_string(year - year % 10) + "s"; }

double TrendReport::decade_mean_of(int year) const { return decade_means.at(decade_label(year)); }

TrendReport trend(const SeriesTable& table, std::string_view column, std::size_t rolling_window) {
  if (rolling_window < 1) throw InvalidArgument("rolling window must be >= 1");
  TrendReport rep;
  rep.column = std::string(column);
  rep.rolling_window = rolling_window;
  rep.years = table.years();
  rep.values = table.column(column);
  const std::size_t n = rep.values.size();

  // Window [k - (w-1)/2, k + w/2], clipped to the table.
  const std::size_t back = (rolling_window - 1) / 2;
  const std::size_t ahead = rolling_window / 2;
  rep.rolling.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t lo = k >= back ? k - back : 0;
    const std::size_t hi = std::min(n - 1, k + ahead);
    double acc = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) acc += rep.values[j];
    rep.rolling[k] = acc / static_cast<double>(hi - lo + 1);
  }

  std::map<std::string, std::pair<double, std::size_t>> sums;
  for (std::size_t k = 0; k < n; ++k) {
    auto& [sum, count] = sums[decade_label(rep.years[k])];
    sum += rep.values[k];
    ++count;
  }
  for (const auto& [label, sc] : sums) {
    rep.decade_means[label] = sc.first / static_cast<double>(sc.second);
  }
  return rep;
}

CorrReport vehicle_correlations(const SeriesTable& table, std::span<const double> predictions,
                                std::size_t first_row) {
  if (predictions.empty() || first_row + predictions.size() > table.rows()) {
    throw InvalidArgument("predictions (" + std::to_string(predictions.size()) +
                          " values from row " + std::to_string(first_row) +
                          ") do not align with a table of " + std::to_string(table.rows()) +
                          " rows");
  }
  CorrReport rep;
  for (const auto& name : kVehicleTypeColumns) {
    const Vec& col = table.column(name);
    const std::span<const double> span(col.data() + first_row, predictions.size());
    CorrEntry e;
    e.column = name;
    e.n = predictions.size();
    try {
      e.r = pearson(span, predictions);
    } catch (const InvalidArgument&) {
      e.r.reset();
    }
    rep.entries.push_back(std::move(e));
  }
  // Defined entries by r descending, then undefined; ties keep column order.
  std::stable_sort(rep.entries.begin(), rep.entries.end(),
                   [](const CorrEntry& a, const CorrEntry& b) {
                     if (a.r.has_value() != b.r.has_value()) return a.r.has_value();
                     return a.r.has_value() && *a.r > *b.r;
                   });
  for (std::size_t k = 0; k < rep.entries.size(); ++k) rep.entries[k].rank = k + 1;
  return rep;
}

}  // namespace roadfc
