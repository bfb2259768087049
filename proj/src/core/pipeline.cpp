#include "pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>

#include "analysis.hpp"
#include "baselines.hpp"
#include "checkpoint.hpp"
#include "csv.hpp"
#include "error.hpp"

namespace roadfc {

using nlohmann::json;

const std::vector<std::string> kPaperFeatureColumns = {
    "all_collisions",       "all_road_users_killed", "all_road_users_all_severities",
    "pedal_cycles",         "motorcycles",           "cars",
    "buses_or_coaches",     "light_goods_vehicles",  "heavy_goods_vehicles",
    "other_vehicles",       "unknown_vehicles",      "all_vehicles"};

namespace {

constexpr int kReportFormatVersion = 1;

std::mutex& log_mutex() {
  static std::mutex m;
  return m;
}

LogSink& log_sink() {
  static LogSink sink;
  return sink;
}

void log(const std::string& line) {
  std::lock_guard lock(log_mutex());
  if (log_sink()) log_sink()(line);
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

}  // namespace

void set_log_sink(LogSink sink) {
  std::lock_guard lock(log_mutex());
  log_sink() = std::move(sink);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
  return Rng(seed).child(label).next_u64();
}

json RunConfig::to_json() const {
  return json{
      {"collisions_csv", collisions_csv},
      {"casualties_csv", casualties_csv},
      {"vehicles_csv", vehicles_csv},
      {"skip_rows",
       {{"collisions", skip_collisions},
        {"casualties", skip_casualties},
        {"vehicles", skip_vehicles}}},
      {"target", target},
      {"paper_faithful", paper_faithful},
      {"lookback", lookback},
      {"train_fraction", train_fraction},
      {"split", std::string(to_string(split))},
      {"variant", std::string(to_string(variant))},
      {"rho", std::string(to_string(rho))},
      {"layers", layers},
      {"hidden", hidden},
      {"dropout", dropout},
      {"sr_identity_frozen", sr_identity_frozen},
      {"max_epochs", max_epochs},
      {"learning_rate", learning_rate},
      {"beta1", beta1},
      {"beta2", beta2},
      {"epsilon", epsilon},
      {"patience", patience},
      {"val_fraction", val_fraction},
      {"clip_norm", clip_norm},
      {"trend_window", trend_window},
      {"ar_order", ar_order},
      {"ar_diff", ar_diff},
      {"ar_center", ar_center},
      {"out", out},
      {"seed", seed},
  };
}

namespace {

template <typename T>
T take(const json& value, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!value.is_number_unsigned() &&
          !(value.is_number_integer() && value.get<std::int64_t>() >= 0)) {
        throw ConfigError("config key '" + key + "' must be a non-negative integer");
      }
    }
    if constexpr (std::is_same_v<T, double>) {
      if (!value.is_number()) throw ConfigError("config key '" + key + "' must be a number");
    }
    return value.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

template <typename T, typename Parse>
T take_enum(const json& value, const std::string& key, Parse parse) {
  const auto text = take<std::string>(value, key);
  try {
    return parse(text);
  } catch (const InvalidArgument& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

}  // namespace

void RunConfig::merge_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("configuration must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key == "collisions_csv") collisions_csv = take<std::string>(value, key);
    else if (key == "casualties_csv") casualties_csv = take<std::string>(value, key);
    else if (key == "vehicles_csv") vehicles_csv = take<std::string>(value, key);
    else if (key == "skip_rows") {
      if (!value.is_object()) throw ConfigError("config key 'skip_rows' must be an object");
      for (const auto& [k, v] : value.items()) {
        if (k == "collisions") skip_collisions = take<std::size_t>(v, "skip_rows.collisions");
        else if (k == "casualties") skip_casualties = take<std::size_t>(v, "skip_rows.casualties");
        else if (k == "vehicles") skip_vehicles = take<std::size_t>(v, "skip_rows.vehicles");
        else throw ConfigError("unknown config key 'skip_rows." + k + "'");
      }
    } else if (key == "target") target = take<std::string>(value, key);
    else if (key == "paper_faithful") paper_faithful = take<bool>(value, key);
    else if (key == "lookback") lookback = take<std::size_t>(value, key);
    else if (key == "train_fraction") train_fraction = take<double>(value, key);
    else if (key == "split") split = take_enum<SplitMode>(value, key, split_mode_from_string);
    else if (key == "variant") variant = take_enum<CellVariant>(value, key, cell_variant_from_string);
    else if (key == "rho") rho = take_enum<Activation>(value, key, activation_from_string);
    else if (key == "layers") layers = take<std::size_t>(value, key);
    else if (key == "hidden") hidden = take<std::size_t>(value, key);
    else if (key == "dropout") dropout = take<double>(value, key);
    else if (key == "sr_identity_frozen") sr_identity_frozen = take<bool>(value, key);
    else if (key == "max_epochs") max_epochs = take<std::size_t>(value, key);
    else if (key == "learning_rate") learning_rate = take<double>(value, key);
    else if (key == "beta1") beta1 = take<double>(value, key);
    else if (key == "beta2") beta2 = take<double>(value, key);
    else if (key == "epsilon") epsilon = take<double>(value, key);
    else if (key == "patience") patience = take<std::size_t>(value, key);
    else if (key == "val_fraction") val_fraction = take<double>(value, key);
    else if (key == "clip_norm") clip_norm = take<double>(value, key);
    else if (key == "trend_window") trend_window = take<std::size_t>(value, key);
    else if (key == "ar_order") ar_order = take<std::size_t>(value, key);
    else if (key == "ar_diff") ar_diff = take<std::size_t>(value, key);
    else if (key == "ar_center") ar_center = take<bool>(value, key);
    else if (key == "out") out = take<std::string>(value, key);
    else if (key == "seed") seed = take<std::uint64_t>(value, key);
    else throw ConfigError("unknown config key '" + key + "'");
  }
}

void RunConfig::validate() const {
  if (lookback < 1) throw ConfigError("lookback must be >= 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie in (0, 1)");
  }
  if (layers < 1) throw ConfigError("layers must be >= 1");
  if (hidden < 1) throw ConfigError("hidden must be >= 1");
  if (trend_window < 1) throw ConfigError("trend_window must be >= 1");
  if (ar_order < 1) throw ConfigError("ar_order must be >= 1");
  if (out.empty()) throw ConfigError("out directory must be set");
  if (sr_identity_frozen && variant != CellVariant::Sr) {
    throw ConfigError("sr_identity_frozen requires variant 'sr'");
  }
  if (sr_identity_frozen && rho != Activation::Relu) {
    throw ConfigError("sr_identity_frozen requires rho 'relu' (rho(1) must equal 1)");
  }
  train_config().validate();
}

std::vector<std::string> RunConfig::feature_columns() const {
  if (paper_faithful) return kPaperFeatureColumns;
  std::vector<std::string> cols;
  for (const auto& c : kPaperFeatureColumns) {
    if (c != target) cols.push_back(c);
  }
  return cols;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig tc;
  tc.max_epochs = max_epochs;
  tc.learning_rate = learning_rate;
  tc.beta1 = beta1;
  tc.beta2 = beta2;
  tc.epsilon = epsilon;
  tc.dropout_rate = dropout;
  tc.patience = patience;
  tc.val_fraction = val_fraction;
  tc.clip_norm = clip_norm;
  tc.seed = derive_seed(seed, "train");
  tc.freeze_regulator = sr_identity_frozen;
  return tc;
}

ModelArch RunConfig::model_arch(std::size_t input_size) const {
  ModelArch arch;
  arch.input_size = input_size;
  arch.hidden_size = hidden;
  arch.layers = layers;
  arch.variant = variant;
  arch.rho = rho;
  arch.dropout_rate = dropout;
  return arch;
}

std::filesystem::path RunConfig::out_path(std::string_view file) const {
  return std::filesystem::path(out) / file;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ConfigError("config file not found: " + path.string());
  }
  json doc;
  try {
    doc = json::parse(csv::read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  RunConfig cfg;
  cfg.merge_json(doc);
  return cfg;
}

const std::vector<std::string>& pipeline_artifacts() {
  static const std::vector<std::string> names = {
      "merged_cleansed.csv", "scale_params.json", "checkpoint.json", "history.csv",
      "eval_report.json",    "trend_report.csv",  "correlations.csv"};
  return names;
}

namespace {

json provenance(const RunConfig& cfg) {
  return json{{"format_version", kReportFormatVersion}, {"config", cfg.to_json()}, {"seed", cfg.seed}};
}

std::vector<std::string> expected_merged_columns() {
  std::vector<std::string> cols;
  for (const auto* headers : {&kCollisionsHeaders, &kCasualtiesHeaders, &kVehiclesHeaders}) {
    cols.insert(cols.end(), headers->begin() + 1, headers->end());
  }
  return cols;
}

void require_artifact(const std::filesystem::path& path, std::string_view producer) {
  if (!std::filesystem::exists(path)) {
    throw InputError("missing artifact " + path.string() + " (run '" + std::string(producer) +
                     "' first)");
  }
}

void check_schema(const SeriesTable& table, const std::filesystem::path& path) {
  const auto expected = expected_merged_columns();
  std::vector<std::string> missing, unexpected;
  for (const auto& c : expected) {
    if (!table.has_column(c)) missing.push_back(c);
  }
  for (const auto& c : table.names()) {
    if (std::find(expected.begin(), expected.end(), c) == expected.end()) unexpected.push_back(c);
  }
  if (missing.empty() && unexpected.empty()) return;
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
    return "[" + s + "]";
  };
  throw InputError(path.string() + ": schema mismatch; missing " + join(missing) +
                   ", unexpected " + join(unexpected));
}

SeriesTable load_source(const std::string& path, std::size_t skip,
                        const std::vector<std::string>& headers) {
  RawTable raw = read_raw_table(path);
  raw.source_name = path;
  return impute(cleanse_table(raw, skip, headers));
}

json scale_to_json(const RobustScaleParams& params) {
  json cols = json::array();
  for (const auto& c : params.columns) {
    cols.push_back({{"name", c.name},
                    {"center", c.center},
                    {"scale", c.scale},
                    {"degenerate", c.degenerate}});
  }
  return cols;
}

RobustScaleParams scale_from_json(const json& cols, const std::filesystem::path& path) {
  RobustScaleParams params;
  try {
    for (const auto& c : cols) {
      ColumnScale cs;
      cs.name = c.at("name").get<std::string>();
      cs.center = c.at("center").get<double>();
      cs.scale = c.at("scale").get<double>();
      cs.degenerate = c.at("degenerate").get<bool>();
      if (!(cs.scale > 0.0)) throw InputError(path.string() + ": non-positive scale for " + cs.name);
      params.columns.push_back(std::move(cs));
    }
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": malformed scale parameters: " + e.what());
  }
  return params;
}

json read_json(const std::filesystem::path& path) {
  try {
    return json::parse(csv::read_text(path));
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + " is not valid JSON: " + e.what());
  }
}

std::vector<std::string> scaled_columns(const RunConfig& cfg) {
  auto cols = cfg.feature_columns();
  if (std::find(cols.begin(), cols.end(), cfg.target) == cols.end()) cols.push_back(cfg.target);
  return cols;
}

}  // namespace

void cmd_prep(const RunConfig& cfg) {
  cfg.validate();
  const SeriesTable collisions =
      load_source(cfg.collisions_csv, cfg.skip_collisions, kCollisionsHeaders);
  const SeriesTable casualties =
      load_source(cfg.casualties_csv, cfg.skip_casualties, kCasualtiesHeaders);
  const SeriesTable vehicles = load_source(cfg.vehicles_csv, cfg.skip_vehicles, kVehiclesHeaders);
  const SeriesTable merged = impute(merge_on_year(collisions, casualties, vehicles));
  if (!merged.has_column(cfg.target)) throw ConfigError("unknown target column '" + cfg.target + "'");

  std::filesystem::create_directories(cfg.out);
  write_series_csv(merged, cfg.out_path("merged_cleansed.csv"));

  const auto cols = scaled_columns(cfg);
  const RobustScaleParams scale = fit_robust_scale(merged, cols);
  json doc = provenance(cfg);
  doc["features"] = cfg.feature_columns();
  doc["target"] = cfg.target;
  doc["columns"] = scale_to_json(scale);
  csv::write_text(cfg.out_path("scale_params.json"), dump(doc));

  log("prep: " + std::to_string(merged.rows()) + " rows (" +
      std::to_string(merged.years().front()) + "-" + std::to_string(merged.years().back()) +
      "), " + std::to_string(merged.names().size()) + " data columns + year");
}

PreparedData load_prepared(const RunConfig& cfg) {
  cfg.validate();
  const auto merged_path = cfg.out_path("merged_cleansed.csv");
  const auto scale_path = cfg.out_path("scale_params.json");
  require_artifact(merged_path, "prep");
  require_artifact(scale_path, "prep");

  PreparedData data;
  data.merged = read_series_csv(merged_path);
  check_schema(data.merged, merged_path);
  if (data.merged.has_missing()) throw InputError(merged_path.string() + ": contains missing values");
  const json scale_doc = read_json(scale_path);
  data.scale = scale_from_json(scale_doc.value("columns", json::array()), scale_path);
  const auto cols = scaled_columns(cfg);
  for (const auto& c : cols) {
    try {
      data.scale.at(c);
    } catch (const InvalidArgument&) {
      throw ConfigError(scale_path.string() + " has no scale for column '" + c +
                        "'; rerun prep with this configuration");
    }
  }
  const SeriesTable scaled = apply_scale(data.merged, data.scale);
  const auto features = cfg.feature_columns();
  try {
    data.windows = make_windows(scaled, features, cfg.target, cfg.lookback);
    data.split = split(data.windows, cfg.train_fraction, cfg.split, derive_seed(cfg.seed, "split"));
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  for (const auto& w : data.windows.warnings) log("warning: " + w);
  return data;
}

void cmd_train(const RunConfig& cfg) {
  const PreparedData data = load_prepared(cfg);
  const std::size_t d = data.windows.feature_names.size();
  ModelSpec spec = init_model(Rng(derive_seed(cfg.seed, "init")), cfg.model_arch(d));
  if (cfg.sr_identity_frozen) set_identity_regulation(spec);

  FitResult fitted;
  try {
    fitted = fit(spec, data.split.train, cfg.train_config());
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }

  json doc = provenance(cfg);
  doc["model"] = model_to_json(fitted.best_spec);
  doc["features"] = data.windows.feature_names;
  doc["target"] = cfg.target;
  doc["lookback"] = cfg.lookback;
  doc["best_epoch"] = fitted.best_epoch;
  doc["stopped_epoch"] = fitted.stopped_epoch;
  json hist = json::array();
  std::string hist_csv = "epoch,train_loss,val_loss\n";
  for (const auto& h : fitted.history) {
    hist.push_back({{"epoch", h.epoch}, {"train_loss", h.train_loss}, {"val_loss", h.val_loss}});
    hist_csv += std::to_string(h.epoch) + "," + csv::format_double(h.train_loss) + "," +
                csv::format_double(h.val_loss) + "\n";
  }
  doc["history"] = std::move(hist);
  std::filesystem::create_directories(cfg.out);
  csv::write_text(cfg.out_path("checkpoint.json"), dump(doc));
  csv::write_text(cfg.out_path("history.csv"), hist_csv);

  log("train: " + std::to_string(data.split.train.size()) + " train / " +
      std::to_string(data.split.test.size()) + " test samples, stopped at epoch " +
      std::to_string(fitted.stopped_epoch) + ", best epoch " + std::to_string(fitted.best_epoch));
}

namespace {

ModelSpec load_checkpoint_model(const RunConfig& cfg, const PreparedData& data) {
  const auto path = cfg.out_path("checkpoint.json");
  require_artifact(path, "train");
  const json doc = read_json(path);
  if (!doc.contains("model")) throw InputError(path.string() + ": no model section");
  const auto features = doc.value("features", std::vector<std::string>{});
  if (features != data.windows.feature_names || doc.value("lookback", 0u) != cfg.lookback ||
      doc.value("target", std::string()) != cfg.target) {
    throw ConfigError(path.string() +
                      " was trained with a different feature list, lookback or target");
  }
  return model_from_json(doc.at("model"));
}

Vec unscale_target(const RunConfig& cfg, const PreparedData& data, std::span<const double> z) {
  const ColumnScale& ts = data.scale.at(cfg.target);
  Vec out(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) out[k] = ts.invert(z[k]);
  return out;
}

json metric_block(std::span<const double> y, std::span<const double> yhat) {
  return json{{"rmse", rmse(y, yhat)}, {"mae", mae(y, yhat)}};
}

}  // namespace

json compute_baselines(const RunConfig& cfg, const PreparedData& data) {
  const Vec& series = data.merged.column(cfg.target);
  const auto& years = data.merged.years();
  std::vector<std::size_t> test_rows, train_rows;
  for (const auto& s : data.split.test) test_rows.push_back(s.target_row);
  for (const auto& s : data.split.train) train_rows.push_back(s.target_row);
  Vec y_test;
  for (std::size_t r : test_rows) y_test.push_back(series[r]);

  json block = json::object();

  Vec persistence;
  for (std::size_t r : test_rows) persistence.push_back(series[r - 1]);
  block["persistence"] = metric_block(y_test, persistence);

  {
    Vec x, y;
    for (std::size_t r : train_rows) {
      x.push_back(static_cast<double>(years[r]));
      y.push_back(series[r]);
    }
    json entry;
    try {
      const OlsFit ols = fit_ols(x, y);
      Vec pred;
      for (std::size_t r : test_rows) pred.push_back(ols.predict(static_cast<double>(years[r])));
      entry = metric_block(y_test, pred);
      entry["beta0"] = ols.beta0;
      entry["beta1"] = ols.beta1;
    } catch (const InvalidArgument& e) {
      entry = {{"skipped", e.what()}};
    }
    block["ols_trend"] = std::move(entry);
  }

  {
    // Fitted on the contiguous history before the first test target; each
    // test year is then forecast one step ahead from the actual history.
    const std::size_t first_test = *std::min_element(test_rows.begin(), test_rows.end());
    const std::string name =
        "AR(" + std::to_string(cfg.ar_order) + "," + std::to_string(cfg.ar_diff) + ")";
    json entry;
    try {
      const std::span<const double> prefix(series.data(), first_test);
      const ArFit ar = fit_ar(prefix, cfg.ar_order, cfg.ar_diff, cfg.ar_center);
      Vec pred;
      for (std::size_t r : test_rows) {
        pred.push_back(forecast_ar(ar, std::span<const double>(series.data(), r), 1).front());
      }
      entry = metric_block(y_test, pred);
      entry["alpha"] = ar.alpha;
      entry["mean"] = ar.mean;
    } catch (const InvalidArgument& e) {
      entry = {{"skipped", e.what()}};
    }
    entry["name"] = name;
    block["ar"] = std::move(entry);
  }

  {
    Vec counts;
    for (std::size_t r : train_rows) counts.push_back(series[r]);
    json entry;
    try {
      const PoissonFit pf = poisson_fit(counts);
      const Vec pred(y_test.size(), pf.lambda);
      entry = metric_block(y_test, pred);
      entry["lambda"] = pf.lambda;
    } catch (const InvalidArgument& e) {
      entry = {{"skipped", e.what()}};
    }
    block["poisson"] = std::move(entry);
  }
  return block;
}

void cmd_eval(const RunConfig& cfg) {
  const PreparedData data = load_prepared(cfg);
  const ModelSpec model = load_checkpoint_model(cfg, data);
  const Vec z_pred = predict(model, data.split.test);
  const Vec y_hat = unscale_target(cfg, data, z_pred);
  Vec y;
  std::vector<int> years;
  for (const auto& s : data.split.test) {
    y.push_back(data.merged.column(cfg.target)[s.target_row]);
    years.push_back(s.target_year);
  }
  const EvalReport rep = evaluate(y, y_hat);

  json doc = provenance(cfg);
  doc["rmse"] = rep.rmse;
  doc["mae"] = rep.mae;
  doc["n"] = rep.n;
  doc["residuals"] = rep.residuals;
  doc["test"] = {{"years", years}, {"actual", y}, {"predicted", y_hat}};
  doc["baselines"] = compute_baselines(cfg, data);
  std::filesystem::create_directories(cfg.out);
  csv::write_text(cfg.out_path("eval_report.json"), dump(doc));
  log("eval: test rmse " + csv::format_double(rep.rmse) + ", mae " +
      csv::format_double(rep.mae) + " over " + std::to_string(rep.n) + " samples");
}

void cmd_baseline(const RunConfig& cfg) {
  const PreparedData data = load_prepared(cfg);
  const auto path = cfg.out_path("eval_report.json");
  json doc = std::filesystem::exists(path) ? read_json(path) : provenance(cfg);
  doc["baselines"] = compute_baselines(cfg, data);
  std::filesystem::create_directories(cfg.out);
  csv::write_text(path, dump(doc));
  log("baseline: persistence rmse " +
      csv::format_double(doc["baselines"]["persistence"]["rmse"].get<double>()));
}

void cmd_analyze(const RunConfig& cfg) {
  const PreparedData data = load_prepared(cfg);
  const ModelSpec model = load_checkpoint_model(cfg, data);

  const TrendReport tr = trend(data.merged, cfg.target, cfg.trend_window);
  std::string trend_csv = "year,value,rolling,decade\n";
  for (std::size_t k = 0; k < tr.years.size(); ++k) {
    trend_csv += std::to_string(tr.years[k]) + "," + csv::format_double(tr.values[k]) + "," +
                 csv::format_double(tr.rolling[k]) + "," +
                 csv::format_double(tr.decade_mean_of(tr.years[k])) + "\n";
  }

  // Predictions over every windowed year, train and test, in target units.
  const Vec predictions = unscale_target(cfg, data, predict(model, data.windows.samples));
  const CorrReport corr = vehicle_correlations(data.merged, predictions, cfg.lookback);
  std::string corr_csv = "column,r,rank\n";
  for (const auto& e : corr.entries) {
    corr_csv += e.column + "," + (e.r ? csv::format_double(*e.r) : std::string("undefined")) +
                "," + std::to_string(e.rank) + "\n";
  }

  std::filesystem::create_directories(cfg.out);
  csv::write_text(cfg.out_path("trend_report.csv"), trend_csv);
  csv::write_text(cfg.out_path("correlations.csv"), corr_csv);
  log("analyze: " + std::to_string(tr.decade_means.size()) + " decades, top correlation " +
      corr.entries.front().column);
}

void cmd_pipeline(const RunConfig& cfg) {
  cmd_prep(cfg);
  cmd_train(cfg);
  cmd_eval(cfg);
  cmd_analyze(cfg);
}

}  // namespace roadfc
