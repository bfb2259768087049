// roadfc command-line front end. Talks to the engine only through the C API.

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "roadfc/roadfc.h"

namespace {

constexpr int kExitConfig = 4;

std::string json_quote(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out.push_back('\\');
    out.push_back(ch);
  }
  return out + "\"";
}

void print_log(const char* line, void* /*user*/) { std::fprintf(stderr, "roadfc: %s\n", line); }

struct ConfigHandle {
  rf_config* ptr = nullptr;
  ~ConfigHandle() { rf_config_destroy(ptr); }
};

int report(rf_status status, const std::string& context) {
  if (status != RF_OK) {
    std::fprintf(stderr, "roadfc: %s: %s: %s\n", context.c_str(), rf_status_name(status),
                 rf_last_error());
  }
  return static_cast<int>(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"roadfc - yearly road-fatality forecasting with LSTM / SR-LSTM"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string variant, split, out, data_dir;
  std::optional<std::size_t> lookback;
  bool paper_faithful = false;
  std::vector<std::string> overrides;

  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Seed for every random stream");
  app.add_option("--variant", variant, "Cell variant")->check(CLI::IsMember({"lstm", "sr"}));
  app.add_option("--lookback", lookback, "Lookback window length in years");
  app.add_flag("--paper-faithful", paper_faithful,
               "Keep the target column in the feature list, as in the original study");
  app.add_option("--out", out, "Output directory for artifacts");
  app.add_option("--split", split, "Train/test split mode")
      ->check(CLI::IsMember({"chrono", "shuffled"}));
  app.add_option("--data", data_dir,
                 "Directory holding collisions.csv, casualties.csv and vehicles.csv");
  app.add_option("--set", overrides, "Override any config key, e.g. --set max_epochs=200");

  struct Command {
    const char* name;
    const char* help;
    rf_status (*run)(const rf_config*);
  };
  const Command commands[] = {
      {"prep", "Cleanse, merge and scale the three input tables", rf_cmd_prep},
      {"train", "Train the model and write checkpoint.json + history.csv", rf_cmd_train},
      {"eval", "Evaluate on the test split and write eval_report.json", rf_cmd_eval},
      {"baseline", "Add the baseline block to eval_report.json", rf_cmd_baseline},
      {"analyze", "Write trend_report.csv and correlations.csv", rf_cmd_analyze},
      {"pipeline", "prep, train, eval and analyze in order", rf_cmd_pipeline},
  };
  for (const auto& c : commands) app.add_subcommand(c.name, c.help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  rf_set_log_callback(print_log, nullptr);
  ConfigHandle cfg;
  if (int rc = report(rf_config_create(&cfg.ptr), "config"); rc != 0) return rc;
  if (!config_path.empty()) {
    if (int rc = report(rf_config_load_file(cfg.ptr, config_path.c_str()), "config"); rc != 0) {
      return rc;
    }
  }

  std::vector<std::pair<std::string, std::string>> sets;
  if (!data_dir.empty()) {
    sets.emplace_back("collisions_csv", json_quote(data_dir + "/collisions.csv"));
    sets.emplace_back("casualties_csv", json_quote(data_dir + "/casualties.csv"));
    sets.emplace_back("vehicles_csv", json_quote(data_dir + "/vehicles.csv"));
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "roadfc: --set expects key=value, got '%s'\n", o.c_str());
      return kExitConfig;
    }
    sets.emplace_back(o.substr(0, eq), o.substr(eq + 1));
  }
  // Dedicated flags win over --set and the config file.
  if (seed) sets.emplace_back("seed", std::to_string(*seed));
  if (!variant.empty()) sets.emplace_back("variant", json_quote(variant));
  if (lookback) sets.emplace_back("lookback", std::to_string(*lookback));
  if (paper_faithful) sets.emplace_back("paper_faithful", "true");
  if (!out.empty()) sets.emplace_back("out", json_quote(out));
  if (!split.empty()) sets.emplace_back("split", json_quote(split));
  for (const auto& [key, value] : sets) {
    if (int rc = report(rf_config_set(cfg.ptr, key.c_str(), value.c_str()), "--" + key); rc != 0) {
      return rc;
    }
  }

  for (const auto& c : commands) {
    if (app.got_subcommand(c.name)) return report(c.run(cfg.ptr), c.name);
  }
  return kExitConfig;
}
