#pragma once

// Evaluation metrics, yearly trend summaries and vehicle-type correlation
// against model predictions.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dataprep.hpp"
#include "numkernel.hpp"

namespace roadfc {

double rmse(std::span<const double> y, std::span<const double> yhat);
double mae(std::span<const double> y, std::span<const double> yhat);

struct EvalReport {
  double rmse = 0.0;
  double mae = 0.0;
  std::size_t n = 0;
  Vec residuals;  // y - yhat
};

EvalReport evaluate(std::span<const double> y, std::span<const double> yhat);

struct TrendReport {
  std::string column;
  std::size_t rolling_window = 1;
  std::vector<int> years;
  Vec values;
  Vec rolling;                                 // centered, truncated at the edges
  std::map<std::string, double> decade_means;  // "1920s" -> mean of present years

  double decade_mean_of(int year) const;
};

std::string decade_label(int year);

TrendReport trend(const SeriesTable& table, std::string_view column, std::size_t rolling_window);

struct CorrEntry {
  std::string column;
  std::optional<double> r;  // nullopt when the column is constant
  std::size_t n = 0;
  std::size_t rank = 0;     // 1 = highest r; undefined entries rank last
};

struct CorrReport {
  std::vector<CorrEntry> entries;  // sorted by rank
};

extern const std::vector<std::string> kVehicleTypeColumns;

/// Pearson r between each vehicle-type column and `predictions`, which align
/// with table rows first_row .. first_row + predictions.size() - 1.
CorrReport vehicle_correlations(const SeriesTable& table, std::span<const double> predictions,
                                std::size_t first_row);

}  // namespace roadfc
