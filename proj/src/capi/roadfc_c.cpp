#include "roadfc/roadfc.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include "../core/analysis.hpp"
#include "../core/checkpoint.hpp"
#include "../core/csv.hpp"
#include "../core/error.hpp"
#include "../core/pipeline.hpp"
#include "../core/training.hpp"

struct rf_config {
  roadfc::RunConfig rep;
};

struct rf_model {
  roadfc::ModelSpec rep;
};

namespace {

thread_local std::string g_last_error;

rf_status fail(rf_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

// Runs `body`, translating exceptions into status codes.
template <typename Fn>
rf_status guarded(Fn&& body) {
  try {
    body();
    return RF_OK;
  } catch (const roadfc::Error& e) {
    return fail(static_cast<rf_status>(e.code()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(RF_ERR_INPUT, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(RF_ERR_INPUT, e.what());
  } catch (const std::exception& e) {
    return fail(RF_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(RF_ERR_INTERNAL, "unknown error");
  }
}

char* copy_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::vector<roadfc::Vec> unpack_window(const double* data, size_t lookback, size_t features) {
  std::vector<roadfc::Vec> w(lookback);
  for (size_t t = 0; t < lookback; ++t) w[t].assign(data + t * features, data + (t + 1) * features);
  return w;
}

#define RF_REQUIRE(cond, msg) \
  if (!(cond)) return fail(RF_ERR_ARGUMENT, msg)

}  // namespace

extern "C" {

const char* rf_version(void) { return "1.0.0"; }

const char* rf_last_error(void) { return g_last_error.c_str(); }

const char* rf_status_name(rf_status status) {
  switch (status) {
    case RF_OK:
      return "ok";
    case RF_ERR_INTERNAL:
      return "internal error";
    case RF_ERR_INPUT:
      return "input error";
    case RF_ERR_DIVERGED:
      return "diverged";
    case RF_ERR_CONFIG:
      return "config error";
    case RF_ERR_ARGUMENT:
      return "invalid argument";
  }
  return "unknown status";
}

void rf_set_log_callback(rf_log_fn fn, void* user) {
  if (fn == nullptr) {
    roadfc::set_log_sink(nullptr);
    return;
  }
  roadfc::set_log_sink([fn, user](std::string_view line) {
    const std::string text(line);
    fn(text.c_str(), user);
  });
}

rf_status rf_config_create(rf_config** out) {
  RF_REQUIRE(out != nullptr, "rf_config_create: null output pointer");
  return guarded([&] { *out = new rf_config{}; });
}

void rf_config_destroy(rf_config* cfg) { delete cfg; }

rf_status rf_config_load_file(rf_config* cfg, const char* path) {
  RF_REQUIRE(cfg != nullptr && path != nullptr, "rf_config_load_file: null argument");
  return guarded([&] {
    if (!std::filesystem::exists(path)) {
      throw roadfc::ConfigError(std::string("config file not found: ") + path);
    }
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(roadfc::csv::read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
      throw roadfc::ConfigError(std::string("config file ") + path + " is not valid JSON: " +
                                e.what());
    }
    roadfc::RunConfig next = cfg->rep;
    next.merge_json(doc);
    cfg->rep = std::move(next);
  });
}

rf_status rf_config_merge_json(rf_config* cfg, const char* json_text) {
  RF_REQUIRE(cfg != nullptr && json_text != nullptr, "rf_config_merge_json: null argument");
  return guarded([&] {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
      throw roadfc::ConfigError(std::string("configuration is not valid JSON: ") + e.what());
    }
    roadfc::RunConfig next = cfg->rep;
    next.merge_json(doc);
    cfg->rep = std::move(next);
  });
}

rf_status rf_config_set(rf_config* cfg, const char* key, const char* value) {
  RF_REQUIRE(cfg != nullptr && key != nullptr && value != nullptr,
             "rf_config_set: null argument");
  return guarded([&] {
    nlohmann::json v = nlohmann::json::parse(value, nullptr, /*allow_exceptions=*/false);
    if (v.is_discarded()) v = std::string(value);
    roadfc::RunConfig next = cfg->rep;
    // Dotted keys address nested objects, e.g. skip_rows.casualties.
    const std::string k(key);
    const auto dot = k.find('.');
    if (dot == std::string::npos) {
      next.merge_json(nlohmann::json{{k, v}});
    } else {
      next.merge_json(nlohmann::json{{k.substr(0, dot), {{k.substr(dot + 1), v}}}});
    }
    cfg->rep = std::move(next);
  });
}

rf_status rf_config_to_json(const rf_config* cfg, char** out) {
  RF_REQUIRE(cfg != nullptr && out != nullptr, "rf_config_to_json: null argument");
  return guarded([&] { *out = copy_string(cfg->rep.to_json().dump(2)); });
}

void rf_string_free(char* s) { std::free(s); }

rf_status rf_cmd_prep(const rf_config* cfg) {
  RF_REQUIRE(cfg != nullptr, "rf_cmd_prep: null config");
  return guarded([&] { roadfc::cmd_prep(cfg->rep); });
}

rf_status rf_cmd_train(const rf_config* cfg) {
  RF_REQUIRE(cfg != nullptr, "rf_cmd_train: null config");
  return guarded([&] { roadfc::cmd_train(cfg->rep); });
}

rf_status rf_cmd_eval(const rf_config* cfg) {
  RF_REQUIRE(cfg != nullptr, "rf_cmd_eval: null config");
  return guarded([&] { roadfc::cmd_eval(cfg->rep); });
}

rf_status rf_cmd_baseline(const rf_config* cfg) {
  RF_REQUIRE(cfg != nullptr, "rf_cmd_baseline: null config");
  return guarded([&] { roadfc::cmd_baseline(cfg->rep); });
}

rf_status rf_cmd_analyze(const rf_config* cfg) {
  RF_REQUIRE(cfg != nullptr, "rf_cmd_analyze: null config");
  return guarded([&] { roadfc::cmd_analyze(cfg->rep); });
}

rf_status rf_cmd_pipeline(const rf_config* cfg) {
  RF_REQUIRE(cfg != nullptr, "rf_cmd_pipeline: null config");
  return guarded([&] { roadfc::cmd_pipeline(cfg->rep); });
}

rf_status rf_model_load(const char* path, rf_model** out) {
  RF_REQUIRE(path != nullptr && out != nullptr, "rf_model_load: null argument");
  return guarded([&] {
    if (!std::filesystem::exists(path)) {
      throw roadfc::InputError(std::string("checkpoint not found: ") + path);
    }
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(roadfc::csv::read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
      throw roadfc::InputError(std::string(path) + " is not valid JSON: " + e.what());
    }
    const nlohmann::json& model_doc = doc.contains("model") ? doc.at("model") : doc;
    auto model = std::make_unique<rf_model>();
    model->rep = roadfc::model_from_json(model_doc);
    *out = model.release();
  });
}

void rf_model_destroy(rf_model* model) { delete model; }

size_t rf_model_input_size(const rf_model* model) {
  return model == nullptr ? 0 : model->rep.input_size();
}

size_t rf_model_parameter_count(const rf_model* model) {
  return model == nullptr ? 0 : roadfc::parameter_count(model->rep);
}

rf_status rf_model_predict(const rf_model* model, const double* windows, size_t count,
                           size_t lookback, size_t features, double* out) {
  RF_REQUIRE(model != nullptr && out != nullptr, "rf_model_predict: null argument");
  RF_REQUIRE(count == 0 || windows != nullptr, "rf_model_predict: null windows");
  RF_REQUIRE(lookback > 0, "rf_model_predict: lookback must be > 0");
  return guarded([&] {
    std::vector<std::vector<roadfc::Vec>> batch;
    batch.reserve(count);
    for (size_t k = 0; k < count; ++k) {
      batch.push_back(unpack_window(windows + k * lookback * features, lookback, features));
    }
    const roadfc::Vec pred = roadfc::predict(model->rep, batch);
    std::copy(pred.begin(), pred.end(), out);
  });
}

rf_status rf_model_grad_check(const rf_model* model, const double* window, size_t lookback,
                              size_t features, double target, double step,
                              double* max_relative_error) {
  RF_REQUIRE(model != nullptr && window != nullptr && max_relative_error != nullptr,
             "rf_model_grad_check: null argument");
  RF_REQUIRE(lookback > 0, "rf_model_grad_check: lookback must be > 0");
  return guarded([&] {
    if (features != model->rep.input_size()) {
      throw roadfc::InvalidArgument("window has " + std::to_string(features) +
                                    " features, model expects " +
                                    std::to_string(model->rep.input_size()));
    }
    const auto w = unpack_window(window, lookback, features);
    *max_relative_error = roadfc::grad_check(model->rep, w, target, step).max_relative_error;
  });
}

rf_status rf_rmse(const double* y, const double* yhat, size_t n, double* out) {
  RF_REQUIRE(y != nullptr && yhat != nullptr && out != nullptr, "rf_rmse: null argument");
  return guarded([&] { *out = roadfc::rmse({y, n}, {yhat, n}); });
}

rf_status rf_mae(const double* y, const double* yhat, size_t n, double* out) {
  RF_REQUIRE(y != nullptr && yhat != nullptr && out != nullptr, "rf_mae: null argument");
  return guarded([&] { *out = roadfc::mae({y, n}, {yhat, n}); });
}

}  // extern "C"
