#pragma once

// Model parameter serialization: a flat JSON document of named numeric
// arrays with shape metadata.
//
//   {
//     "format_version": 1,
//     "architecture": {"input_size": D, "dropout_rate": p,
//                      "layers": [{"variant": "sr", "rho": "relu",
//                                  "input_size": D, "hidden_size": H}, ...]},
//     "tensors": {"layers.0.w_f": {"shape": [H, H + D], "data": [...]}, ...}
//   }

#include <json.hpp>

#include "cells.hpp"

namespace roadfc {

inline constexpr int kCheckpointFormatVersion = 1;

nlohmann::json model_to_json(const ModelSpec& spec);

/// Rebuilds and validates a model. Throws InputError on unknown version,
/// missing tensors or shape mismatches.
ModelSpec model_from_json(const nlohmann::json& doc);

}  // namespace roadfc
