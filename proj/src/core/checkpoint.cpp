#include "checkpoint.hpp"

#include "error.hpp"

namespace roadfc {

using nlohmann::json;

json model_to_json(const ModelSpec& spec) {
  spec.validate();
  json arch;
  arch["input_size"] = spec.input_size();
  arch["dropout_rate"] = spec.dropout_rate;
  json layers = json::array();
  for (const auto& layer : spec.layers) {
    const auto& base = base_params(layer);
    json entry;
    entry["variant"] = std::string(to_string(variant_of(layer)));
    entry["input_size"] = base.input_size;
    entry["hidden_size"] = base.hidden_size;
    if (const auto* sr = std::get_if<SrParams>(&layer)) {
      entry["rho"] = std::string(to_string(sr->rho));
    }
    layers.push_back(std::move(entry));
  }
  arch["layers"] = std::move(layers);

  json tensors_doc = json::object();
  for (const auto& t : tensors(spec)) {
    tensors_doc[t.name] = {{"shape", t.shape},
                           {"data", std::vector<double>(t.data.begin(), t.data.end())}};
  }
  return json{{"format_version", kCheckpointFormatVersion},
              {"architecture", std::move(arch)},
              {"tensors", std::move(tensors_doc)}};
}

ModelSpec model_from_json(const json& doc) {
  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw InputError("unsupported checkpoint format_version " + std::to_string(version));
    }
    const json& arch = doc.at("architecture");
    ModelSpec spec;
    spec.dropout_rate = arch.at("dropout_rate").get<double>();
    for (const json& entry : arch.at("layers")) {
      const auto variant = cell_variant_from_string(entry.at("variant").get<std::string>());
      const auto in = entry.at("input_size").get<std::size_t>();
      const auto hidden = entry.at("hidden_size").get<std::size_t>();
      if (variant == CellVariant::Sr) {
        SrParams p = SrParams::zeros(in, hidden);
        p.rho = activation_from_string(entry.value("rho", std::string("relu")));
        spec.layers.emplace_back(std::move(p));
      } else {
        spec.layers.emplace_back(LstmParams::zeros(in, hidden));
      }
    }
    if (spec.layers.empty()) throw InputError("checkpoint has no layers");
    spec.w_out.assign(spec.output_hidden_size(), 0.0);

    const json& stored = doc.at("tensors");
    for (auto view : tensors(spec)) {
      if (!stored.contains(view.name)) throw InputError("checkpoint missing tensor " + view.name);
      const json& t = stored.at(view.name);
      const auto shape = t.at("shape").get<std::vector<std::size_t>>();
      const auto data = t.at("data").get<std::vector<double>>();
      if (shape != view.shape || data.size() != view.data.size()) {
        throw InputError("checkpoint tensor " + view.name + " has wrong shape");
      }
      std::copy(data.begin(), data.end(), view.data.begin());
    }
    spec.validate();
    return spec;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed checkpoint: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw InputError(std::string("invalid checkpoint: ") + e.what());
  }
}

}  // namespace roadfc
