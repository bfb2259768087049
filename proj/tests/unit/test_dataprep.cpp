#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "csv.hpp"
#include "dataprep.hpp"
#include "error.hpp"
#include "synthetic_dft.hpp"

using namespace roadfc;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

RawTable raw(std::vector<std::vector<std::string>> cells) { return RawTable{"test.csv", cells}; }

SeriesTable table_with(std::vector<int> years, std::string name, Vec values) {
  SeriesTable t(std::move(years));
  t.add_column(std::move(name), std::move(values));
  return t;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("roadfc_unit_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("parse_value examples") {
  CHECK(parse_value(" 1,474 ") == 1474.0);
  CHECK(parse_value("abc") == 0.0);
  CHECK(parse_value("") == 0.0);
  CHECK(parse_value("+12.5") == 12.5);
  CHECK(parse_value("-3") == -3.0);
  CHECK(parse_value("1e3") == 1000.0);
  CHECK(parse_value("12abc") == 0.0);
  CHECK(parse_value("--1") == 0.0);
  CHECK(std::isinf(parse_value("inf")));
}

TEST_CASE("parse_value is idempotent on its rendered output") {
  Rng rng(17);
  const char* samples[] = {" 1,474 ", "abc", "", "3.25", "-0.5", "9,999,999", "+7", "1e-3"};
  for (const char* s : samples) {
    const double once = parse_value(s);
    CHECK(parse_value(csv::format_double(once)) == once);
  }
  for (int k = 0; k < 500; ++k) {
    const double v = uniform(rng, -1e6, 1e6);
    const double once = parse_value(csv::format_double(v));
    CHECK(once == v);
    CHECK(parse_value(csv::format_double(once)) == once);
  }
}

TEST_CASE("strip_annotations is greedy between the outer brackets") {
  CHECK(strip_annotations("1391 [note]") == "1391 ");
  CHECK(strip_annotations("[x]").empty());
  CHECK(strip_annotations("12 [a] 3 [b]") == "12 ");
  CHECK(strip_annotations("no brackets") == "no brackets");
  CHECK(strip_annotations("odd ] [") == "odd ] [");
}

TEST_CASE("cleanse_table strips annotations and converts cells") {
  const std::vector<std::string> headers{"year", "a", "b"};
  const auto t = cleanse_table(
      raw({{"title"}, {"Year", "A", "B"}, {"2001", "1391 [note]", "1,474"}, {"2000", "[x]", "5"}}),
      2, headers);
  CHECK(t.years() == std::vector<int>{2000, 2001});
  CHECK(std::isnan(t.column("a")[0]));
  CHECK(t.column("a")[1] == 1391.0);
  CHECK(t.column("b") == Vec{5.0, 1474.0});
}

TEST_CASE("cleanse_table with no skip is an identity on a clean table") {
  const std::vector<std::string> headers{"year", "v"};
  const auto t = cleanse_table(raw({{"1990", "1.5"}, {"1991", "2.5"}, {"1992", "-4"}}), 0, headers);
  CHECK(t.years() == std::vector<int>{1990, 1991, 1992});
  CHECK(t.column("v") == Vec{1.5, 2.5, -4.0});
}

TEST_CASE("cleanse_table drops note rows and keeps extra columns out") {
  const std::vector<std::string> headers{"year", "v"};
  const auto t = cleanse_table(
      raw({{"1990 [note 1]", "1", "extra"}, {"Notes: see above"}, {"", ""}, {"1991", "2", "x"}}),
      0, headers);
  CHECK(t.years() == std::vector<int>{1990, 1991});
  CHECK(t.names() == std::vector<std::string>{"v"});
}

TEST_CASE("cleanse_table errors") {
  const std::vector<std::string> headers{"year", "a", "b"};
  CHECK_THROWS_AS(cleanse_table(raw({{"2000", "1"}}), 0, headers), InputError);
  CHECK_THROWS_AS(cleanse_table(raw({{"title"}}), 1, headers), InputError);
  CHECK_THROWS_AS(cleanse_table(raw({{"notes", "1", "2"}}), 0, headers), InputError);
  CHECK_THROWS_AS(cleanse_table(raw({{"2000", "1", "2"}, {"2000", "1", "2"}}), 0, headers),
                  InputError);
}

TEST_CASE("impute examples") {
  auto t = impute(table_with({1, 2, 3}, "c", Vec{1.0, kNaN, 3.0}));
  CHECK(t.column("c") == Vec{1.0, 2.0, 3.0});
  t = impute(table_with({1, 2, 3}, "c", Vec{4.0, 5.0, 6.0}));
  CHECK(t.column("c") == Vec{4.0, 5.0, 6.0});
  t = impute(table_with({1, 2, 3}, "c", Vec{kInf, 4.0, 6.0}));
  CHECK(t.column("c") == Vec{5.0, 4.0, 6.0});
  CHECK_FALSE(t.has_missing());
}

TEST_CASE("impute names an all-missing column") {
  try {
    impute(table_with({1, 2}, "ghost", Vec{kNaN, -kInf}));
    FAIL("expected InputError");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("ghost") != std::string::npos);
  }
}

TEST_CASE("merge_on_year is an outer join") {
  const auto a = table_with({2000, 2001}, "a", Vec{1, 2});
  const auto b = table_with({2001, 2002}, "b", Vec{10, 20});
  const auto c = table_with({2000, 2001, 2002}, "c", Vec{7, 8, 9});
  const auto m = merge_on_year(a, b, c);
  CHECK(m.years() == std::vector<int>{2000, 2001, 2002});
  CHECK(m.names() == std::vector<std::string>{"a", "b", "c"});
  CHECK(std::isnan(m.column("b")[0]));
  CHECK(std::isnan(m.column("a")[2]));
  const auto filled = impute(m);
  CHECK(filled.column("b") == Vec{15.0, 10.0, 20.0});

  const auto same = merge_on_year(c, table_with({2000, 2001, 2002}, "d", Vec{1, 1, 1}),
                                  table_with({2000, 2001, 2002}, "e", Vec{2, 2, 2}));
  CHECK(same.rows() == 3);
}

TEST_CASE("merge_on_year rejects duplicate column names") {
  const auto a = table_with({2000}, "x", Vec{1});
  CHECK_THROWS_AS(merge_on_year(a, table_with({2000}, "x", Vec{2}), table_with({2000}, "y", Vec{3})),
                  InputError);
}

TEST_CASE("robust scale example") {
  const auto t = table_with({1, 2, 3, 4, 5}, "v", Vec{1, 2, 3, 4, 5});
  const std::vector<std::string> cols{"v"};
  const auto params = fit_robust_scale(t, cols);
  CHECK(params.at("v").center == 3.0);
  CHECK(params.at("v").scale == 2.0);
  CHECK_FALSE(params.at("v").degenerate);
  CHECK(apply_scale(t, params).column("v") == Vec{-1.0, -0.5, 0.0, 0.5, 1.0});

  const auto flat = table_with({1, 2, 3}, "v", Vec{5, 5, 5});
  const auto fp = fit_robust_scale(flat, cols);
  CHECK(fp.at("v").degenerate);
  CHECK(fp.at("v").scale == 1.0);
  CHECK(apply_scale(flat, fp).column("v") == Vec{0.0, 0.0, 0.0});

  const std::vector<std::string> unknown{"nope"};
  CHECK_THROWS_AS(fit_robust_scale(t, unknown), InvalidArgument);
  CHECK_THROWS_AS(params.at("nope"), InvalidArgument);
}

TEST_CASE("robust scaling properties on random tables") {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(60);
    std::vector<int> years(n);
    for (std::size_t k = 0; k < n; ++k) years[k] = 1900 + static_cast<int>(k);
    SeriesTable t(years);
    Vec a(n), b(n, 3.5);
    const double spread = uniform(rng, 0.01, 1e4);
    for (auto& v : a) v = uniform(rng, -spread, spread);
    t.add_column("a", a);
    t.add_column("b", b);
    const std::vector<std::string> cols{"a", "b"};
    const auto params = fit_robust_scale(t, cols);
    const auto scaled = apply_scale(t, params);
    const Vec& za = scaled.column("a");
    CHECK(std::abs(median(za)) < 1e-9);
    CHECK(std::abs(quantile(za, 0.75) - quantile(za, 0.25) - 1.0) < 1e-9);
    CHECK(scaled.column("b") == Vec(n, 0.0));
    const auto back = invert_scale(scaled, params);
    for (std::size_t k = 0; k < n; ++k) CHECK(std::abs(back.column("a")[k] - a[k]) < 1e-9 * spread);
  }
}

TEST_CASE("robust center of augmented data is the augmented median") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 9 + rng.below(20);
    Vec v(n);
    for (auto& x : v) x = uniform(rng, 0.0, 100.0);
    v.push_back(1e12);
    std::vector<int> years(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) years[k] = static_cast<int>(k);
    const std::vector<std::string> cols{"v"};
    const auto params = fit_robust_scale(table_with(years, "v", v), cols);
    CHECK(params.at("v").center == median(v));
    CHECK(params.at("v").center < 100.0);
  }
}

TEST_CASE("make_windows counts and alignment") {
  std::vector<int> years(10);
  Vec f(10), y(10);
  for (int k = 0; k < 10; ++k) {
    years[k] = 2000 + k;
    f[k] = k;
    y[k] = 100 + k;
  }
  SeriesTable t(years);
  t.add_column("f", f);
  t.add_column("y", y);
  const std::vector<std::string> feats{"f"};
  const auto w = make_windows(t, feats, "y", 3);
  CHECK(w.samples.size() == 7);
  CHECK(w.samples[0].window == std::vector<Vec>{{0.0}, {1.0}, {2.0}});
  CHECK(w.samples[0].target == 103.0);
  CHECK(w.samples[0].target_year == 2003);
  CHECK(w.warnings.empty());

  const auto w1 = make_windows(t, feats, "y", 1);
  CHECK(w1.samples.size() == 9);
  for (const auto& s : w1.samples) {
    REQUIRE(s.window.size() == 1);
    CHECK(s.window[0][0] == static_cast<double>(s.target_row - 1));
  }

  CHECK_THROWS_AS(make_windows(t, feats, "y", 10), InvalidArgument);
  CHECK_THROWS_AS(make_windows(t, feats, "y", 0), InvalidArgument);
  const std::vector<std::string> none;
  CHECK_THROWS_AS(make_windows(t, none, "y", 2), InvalidArgument);
}

TEST_CASE("window targets reproduce the target column tail") {
  Rng rng(44);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 3 + rng.below(40);
    const std::size_t L = 1 + rng.below(n - 1);
    std::vector<int> years(n);
    Vec y(n);
    for (std::size_t k = 0; k < n; ++k) {
      years[k] = static_cast<int>(1950 + k);
      y[k] = uniform(rng, 0.0, 10.0);
    }
    SeriesTable t(years);
    t.add_column("y", y);
    const std::vector<std::string> feats{"y"};
    const auto w = make_windows(t, feats, "y", L);
    REQUIRE(w.samples.size() == n - L);
    Vec targets;
    for (const auto& s : w.samples) targets.push_back(s.target);
    CHECK(targets == Vec(y.begin() + static_cast<long>(L), y.end()));
  }
}

TEST_CASE("make_windows warns on year gaps") {
  SeriesTable t(std::vector<int>{2000, 2001, 2003, 2004});
  t.add_column("y", Vec{1, 2, 3, 4});
  const std::vector<std::string> feats{"y"};
  CHECK(make_windows(t, feats, "y", 1).warnings.size() == 1);
}

TEST_CASE("split examples") {
  WindowedDataset d;
  for (int k = 0; k < 92; ++k) d.samples.push_back(Sample{{}, static_cast<double>(k), k, 0});
  const auto s = split(d, 0.8, SplitMode::Chronological);
  CHECK(s.train.size() == 73);
  CHECK(s.test.size() == 19);
  CHECK(s.train.back().target == 72.0);
  CHECK(s.test.front().target == 73.0);

  const auto half = split(d, 0.5, SplitMode::Chronological);
  CHECK(half.train.size() == half.test.size());

  const auto a = split(d, 0.7, SplitMode::Shuffled, 5);
  const auto b = split(d, 0.7, SplitMode::Shuffled, 5);
  for (std::size_t k = 0; k < a.train.size(); ++k) CHECK(a.train[k].target == b.train[k].target);

  CHECK_THROWS_AS(split(d, 0.001, SplitMode::Chronological), InvalidArgument);
  CHECK_THROWS_AS(split(d, 1.0, SplitMode::Chronological), InvalidArgument);
  CHECK(split_mode_from_string("chrono") == SplitMode::Chronological);
  CHECK(split_mode_from_string("shuffled") == SplitMode::Shuffled);
  CHECK_THROWS_AS(split_mode_from_string("random"), InvalidArgument);
}

TEST_CASE("split partitions are disjoint and exhaustive") {
  Rng rng(66);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(200);
    WindowedDataset d;
    for (std::size_t k = 0; k < n; ++k) {
      d.samples.push_back(Sample{{}, static_cast<double>(k), 0, k});
    }
    const double frac = uniform(rng, 0.05, 0.95);
    const auto mode = rng.below(2) == 0 ? SplitMode::Chronological : SplitMode::Shuffled;
    DatasetSplit s;
    try {
      s = split(d, frac, mode, rng.next_u64());
    } catch (const InvalidArgument&) {
      const auto n_train = static_cast<std::size_t>(std::floor(frac * static_cast<double>(n) + 1e-9));
      CHECK((n_train == 0 || n_train >= n));
      continue;
    }
    std::set<std::size_t> seen;
    for (const auto& x : s.train) seen.insert(x.target_row);
    for (const auto& x : s.test) CHECK(seen.insert(x.target_row).second);
    CHECK(seen.size() == n);
  }
}

TEST_CASE("series CSV round trip is exact") {
  SeriesTable t(std::vector<int>{1999, 2000});
  t.add_column("a", Vec{0.1, 1.0 / 3.0});
  t.add_column("b", Vec{-5.0, 1e-17});
  const auto dir = temp_dir("series_rt");
  write_series_csv(t, dir / "t.csv");
  CHECK(read_series_csv(dir / "t.csv") == t);
  CHECK(series_csv_text(t).rfind("year,a,b\n", 0) == 0);
}

TEST_CASE("SeriesTable column rules") {
  SeriesTable t(std::vector<int>{1, 2});
  CHECK_THROWS_AS(t.add_column("year", Vec{1, 2}), InvalidArgument);
  t.add_column("a", Vec{1, 2});
  CHECK_THROWS_AS(t.add_column("a", Vec{1, 2}), InvalidArgument);
  CHECK_THROWS_AS(t.add_column("b", Vec{1}), InvalidArgument);
  CHECK_THROWS_AS(t.column("missing"), InvalidArgument);
}

TEST_CASE("synthetic DfT sheets cleanse, merge and impute") {
  const auto dir = temp_dir("synthetic_sheets");
  testing::write_synthetic_dft(dir);
  const auto col = cleanse_table(read_raw_table(dir / "collisions.csv"), 6, kCollisionsHeaders);
  const auto cas = cleanse_table(read_raw_table(dir / "casualties.csv"), 7, kCasualtiesHeaders);
  const auto veh = cleanse_table(read_raw_table(dir / "vehicles.csv"), 4, kVehiclesHeaders);
  CHECK(col.rows() == 97);
  CHECK(cas.rows() == 97);
  CHECK(veh.rows() == 97);
  CHECK(col.years().front() == 1926);
  CHECK(col.years().back() == 2022);
  CHECK(col.has_missing());
  const auto merged = impute(merge_on_year(col, cas, veh));
  CHECK(merged.names().size() == 4 + 7 + 9);
  CHECK_FALSE(merged.has_missing());
  CHECK_NOTHROW(merged.validate_shape());
}
