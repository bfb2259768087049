#include "cells.hpp"

#include <cmath>

#include "error.hpp"

namespace roadfc {

std::string_view to_string(CellVariant variant) {
  return variant == CellVariant::Lstm ? "lstm" : "sr";
}

CellVariant cell_variant_from_string(std::string_view name) {
  if (name == "lstm") return CellVariant::Lstm;
  if (name == "sr") return CellVariant::Sr;
  throw InvalidArgument("unknown cell variant '" + std::string(name) + "'");
}

LstmParams LstmParams::zeros(std::size_t input_size, std::size_t hidden_size) {
  LstmParams p;
  p.input_size = input_size;
  p.hidden_size = hidden_size;
  const std::size_t cols = hidden_size + input_size;
  p.w_f = p.w_i = p.w_c = p.w_o = Mat(hidden_size, cols);
  p.b_f = p.b_i = p.b_c = p.b_o = Vec(hidden_size, 0.0);
  return p;
}

namespace {

void check_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidArgument(std::string("non-finite entry in ") + what);
  }
}

void check_shape(const Mat& m, std::size_t rows, std::size_t cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw InvalidArgument(std::string(what) + " has shape " + m.shape_string() + ", expected " +
                          std::to_string(rows) + "x" + std::to_string(cols));
  }
  check_finite(m.values(), what);
}

void check_len(const Vec& v, std::size_t n, const char* what) {
  if (v.size() != n) {
    throw InvalidArgument(std::string(what) + " has length " + std::to_string(v.size()) +
                          ", expected " + std::to_string(n));
  }
  check_finite(v, what);
}

}  // namespace

void LstmParams::validate() const {
  if (input_size == 0 || hidden_size == 0) throw InvalidArgument("cell sizes must be >= 1");
  const std::size_t cols = hidden_size + input_size;
  check_shape(w_f, hidden_size, cols, "w_f");
  check_shape(w_i, hidden_size, cols, "w_i");
  check_shape(w_c, hidden_size, cols, "w_c");
  check_shape(w_o, hidden_size, cols, "w_o");
  check_len(b_f, hidden_size, "b_f");
  check_len(b_i, hidden_size, "b_i");
  check_len(b_c, hidden_size, "b_c");
  check_len(b_o, hidden_size, "b_o");
}

SrParams SrParams::zeros(std::size_t input_size, std::size_t hidden_size) {
  SrParams p;
  p.base = LstmParams::zeros(input_size, hidden_size);
  p.w_r = Mat(hidden_size, hidden_size);
  p.b_r = Vec(hidden_size, 0.0);
  return p;
}

void SrParams::validate() const {
  base.validate();
  check_shape(w_r, base.hidden_size, base.hidden_size, "w_r");
  check_len(b_r, base.hidden_size, "b_r");
}

const LstmParams& base_params(const LayerParams& layer) {
  if (const auto* sr = std::get_if<SrParams>(&layer)) return sr->base;
  return std::get<LstmParams>(layer);
}

LstmParams& base_params(LayerParams& layer) {
  if (auto* sr = std::get_if<SrParams>(&layer)) return sr->base;
  return std::get<LstmParams>(layer);
}

CellVariant variant_of(const LayerParams& layer) {
  return std::holds_alternative<SrParams>(layer) ? CellVariant::Sr : CellVariant::Lstm;
}

CellState CellState::zeros(std::size_t hidden_size) {
  return CellState{Vec(hidden_size, 0.0), Vec(hidden_size, 0.0)};
}

namespace {

void check_step_inputs(const LstmParams& p, const CellState& s, std::span<const double> x) {
  if (x.size() != p.input_size) {
    throw InvalidArgument("cell input has length " + std::to_string(x.size()) + ", expected " +
                          std::to_string(p.input_size));
  }
  if (s.h.size() != p.hidden_size || s.c.size() != p.hidden_size) {
    throw InvalidArgument("cell state has size " + std::to_string(s.h.size()) + "/" +
                          std::to_string(s.c.size()) + ", expected " +
                          std::to_string(p.hidden_size));
  }
}

// Gates and candidate; fills x, f, i, o, c_tilde, h_prev, c_prev.
StepTrace gate_pass(const LstmParams& p, const CellState& s, std::span<const double> x) {
  check_step_inputs(p, s, x);
  const std::size_t H = p.hidden_size;
  Vec z;
  z.reserve(H + x.size());
  z.insert(z.end(), s.h.begin(), s.h.end());
  z.insert(z.end(), x.begin(), x.end());

  StepTrace t;
  t.x.assign(x.begin(), x.end());
  t.h_prev = s.h;
  t.c_prev = s.c;
  t.f = mat_vec(p.w_f, z);
  t.i = mat_vec(p.w_i, z);
  t.c_tilde = mat_vec(p.w_c, z);
  t.o = mat_vec(p.w_o, z);
  for (std::size_t k = 0; k < H; ++k) {
    t.f[k] = activate(Activation::Sigmoid, t.f[k] + p.b_f[k]);
    t.i[k] = activate(Activation::Sigmoid, t.i[k] + p.b_i[k]);
    t.c_tilde[k] = activate(Activation::Tanh, t.c_tilde[k] + p.b_c[k]);
    t.o[k] = activate(Activation::Sigmoid, t.o[k] + p.b_o[k]);
  }
  return t;
}

// Cell update and output from the (possibly modified) gates.
StepOutput finish_step(StepTrace t) {
  const std::size_t H = t.f.size();
  t.c_new.resize(H);
  t.h_new.resize(H);
  for (std::size_t k = 0; k < H; ++k) {
    t.c_new[k] = t.f_mod[k] * t.c_prev[k] + t.i_mod[k] * t.c_tilde[k];
    t.h_new[k] = t.o[k] * std::tanh(t.c_new[k]);
  }
  CellState next{t.h_new, t.c_new};
  return StepOutput{std::move(next), std::move(t)};
}

}  // namespace

StepOutput lstm_step(const LstmParams& p, const CellState& s, std::span<const double> x) {
  StepTrace t = gate_pass(p, s, x);
  t.r.assign(p.hidden_size, 1.0);
  t.f_mod = t.f;
  t.i_mod = t.i;
  return finish_step(std::move(t));
}

StepOutput sr_lstm_step(const SrParams& p, const CellState& s, std::span<const double> x) {
  StepTrace t = gate_pass(p.base, s, x);
  const std::size_t H = p.base.hidden_size;
  t.r = mat_vec(p.w_r, s.h);
  t.f_mod.resize(H);
  t.i_mod.resize(H);
  for (std::size_t k = 0; k < H; ++k) {
    t.r[k] = activate(p.rho, t.r[k] + p.b_r[k]);
    t.f_mod[k] = t.f[k] * t.r[k];
    t.i_mod[k] = t.i[k] * t.r[k];
  }
  return finish_step(std::move(t));
}

StepOutput cell_step(const LayerParams& p, const CellState& s, std::span<const double> x) {
  if (const auto* sr = std::get_if<SrParams>(&p)) return sr_lstm_step(*sr, s, x);
  return lstm_step(std::get<LstmParams>(p), s, x);
}

double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

namespace {

void fill_uniform(Rng& rng, Mat& m, double bound) {
  for (double& v : m.values()) v = uniform(rng, -bound, bound);
}

}  // namespace

LayerParams init_params(Rng& rng, std::size_t input_size, std::size_t hidden_size,
                        CellVariant variant, Activation rho) {
  if (input_size == 0 || hidden_size == 0) throw InvalidArgument("cell sizes must be >= 1");
  LstmParams base = LstmParams::zeros(input_size, hidden_size);
  const double s = glorot_bound(hidden_size + input_size, hidden_size);
  fill_uniform(rng, base.w_f, s);
  fill_uniform(rng, base.w_i, s);
  fill_uniform(rng, base.w_c, s);
  fill_uniform(rng, base.w_o, s);
  base.b_f.assign(hidden_size, 1.0);
  if (variant == CellVariant::Lstm) return base;

  SrParams sr;
  sr.base = std::move(base);
  sr.rho = rho;
  sr.w_r = Mat(hidden_size, hidden_size);
  fill_uniform(rng, sr.w_r, glorot_bound(hidden_size, hidden_size));
  sr.b_r.assign(hidden_size, 1.0);
  return sr;
}

std::size_t ModelSpec::input_size() const {
  if (layers.empty()) throw InvalidArgument("model has no layers");
  return base_params(layers.front()).input_size;
}

std::size_t ModelSpec::output_hidden_size() const {
  if (layers.empty()) throw InvalidArgument("model has no layers");
  return base_params(layers.back()).hidden_size;
}

void ModelSpec::validate() const {
  if (layers.empty()) throw InvalidArgument("model has no layers");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw InvalidArgument("dropout rate must lie in [0, 1)");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    std::visit([](const auto& p) { p.validate(); }, layers[l]);
    if (l > 0) {
      const auto& prev = base_params(layers[l - 1]);
      const auto& cur = base_params(layers[l]);
      if (cur.input_size != prev.hidden_size) {
        throw InvalidArgument("layer " + std::to_string(l) + " input size " +
                              std::to_string(cur.input_size) + " does not match layer " +
                              std::to_string(l - 1) + " hidden size " +
                              std::to_string(prev.hidden_size));
      }
    }
  }
  check_len(w_out, output_hidden_size(), "w_out");
  if (!std::isfinite(b_out)) throw InvalidArgument("non-finite entry in b_out");
}

ModelSpec init_model(const Rng& rng, const ModelArch& arch) {
  if (arch.layers == 0) throw InvalidArgument("model needs at least one layer");
  ModelSpec spec;
  spec.dropout_rate = arch.dropout_rate;
  std::size_t in = arch.input_size;
  for (std::size_t l = 0; l < arch.layers; ++l) {
    Rng layer_rng = rng.child("layer" + std::to_string(l));
    spec.layers.push_back(init_params(layer_rng, in, arch.hidden_size, arch.variant, arch.rho));
    in = arch.hidden_size;
  }
  Rng out_rng = rng.child("readout");
  const double s = glorot_bound(arch.hidden_size, 1);
  spec.w_out.resize(arch.hidden_size);
  for (double& w : spec.w_out) w = uniform(out_rng, -s, s);
  spec.b_out = 0.0;
  spec.validate();
  return spec;
}

void set_identity_regulation(ModelSpec& spec) {
  for (auto& layer : spec.layers) {
    if (auto* sr = std::get_if<SrParams>(&layer)) {
      for (double& v : sr->w_r.values()) v = 0.0;
      sr->b_r.assign(sr->b_r.size(), 1.0);
    }
  }
}

ModelSpec zeros_like(const ModelSpec& spec) {
  ModelSpec z = spec;
  for (auto view : tensors(z)) {
    for (double& v : view.data) v = 0.0;
  }
  return z;
}

DropoutMasks sample_dropout_masks(const ModelSpec& spec, std::size_t steps, Rng& rng) {
  const double rate = spec.dropout_rate;
  const double keep_scale = 1.0 / (1.0 - rate);
  DropoutMasks masks(spec.layers.size());
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const std::size_t H = base_params(spec.layers[l]).hidden_size;
    masks[l].assign(steps, Vec(H, keep_scale));
    if (rate == 0.0) continue;
    for (auto& step : masks[l]) {
      for (double& m : step) m = rng.next_unit() < rate ? 0.0 : keep_scale;
    }
  }
  return masks;
}

ForwardResult forward_sequence(const ModelSpec& spec, std::span<const Vec> window,
                               const DropoutMasks* masks) {
  if (window.empty()) throw InvalidArgument("empty input window");
  if (spec.layers.empty()) throw InvalidArgument("model has no layers");
  const std::size_t L = window.size();
  if (masks != nullptr) {
    if (masks->size() != spec.layers.size()) {
      throw InvalidArgument("dropout mask has " + std::to_string(masks->size()) +
                            " layers, model has " + std::to_string(spec.layers.size()));
    }
    for (std::size_t l = 0; l < masks->size(); ++l) {
      const std::size_t H = base_params(spec.layers[l]).hidden_size;
      const auto& lm = (*masks)[l];
      if (lm.size() != L) throw InvalidArgument("dropout mask step count mismatch");
      for (const auto& m : lm) {
        if (m.size() != H) throw InvalidArgument("dropout mask width mismatch");
      }
    }
  }

  ForwardResult out;
  out.traces.resize(spec.layers.size());
  std::vector<Vec> inputs(window.begin(), window.end());
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const auto& layer = spec.layers[l];
    CellState state = CellState::zeros(base_params(layer).hidden_size);
    auto& layer_traces = out.traces[l];
    layer_traces.reserve(L);
    std::vector<Vec> outputs(L);
    for (std::size_t t = 0; t < L; ++t) {
      StepOutput step = cell_step(layer, state, inputs[t]);
      state = std::move(step.state);
      outputs[t] = state.h;
      if (masks != nullptr) {
        const Vec& m = (*masks)[l][t];
        for (std::size_t k = 0; k < m.size(); ++k) outputs[t][k] *= m[k];
      }
      layer_traces.push_back(std::move(step.trace));
    }
    inputs = std::move(outputs);
  }
  out.readout_input = inputs.back();
  out.prediction = dot(spec.w_out, out.readout_input) + spec.b_out;
  return out;
}

namespace {

template <typename View, typename Spec, typename Fn>
void for_each_tensor(Spec& spec, Fn&& emit) {
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    auto& layer = spec.layers[l];
    auto& base = base_params(layer);
    const std::string prefix = "layers." + std::to_string(l) + ".";
    auto mat = [&](const char* name, auto& m) {
      emit(View{prefix + name, {m.rows(), m.cols()}, m.values()});
    };
    auto vec = [&](const char* name, auto& v) {
      emit(View{prefix + name, {v.size()}, std::span(v)});
    };
    mat("w_f", base.w_f);
    vec("b_f", base.b_f);
    mat("w_i", base.w_i);
    vec("b_i", base.b_i);
    mat("w_c", base.w_c);
    vec("b_c", base.b_c);
    mat("w_o", base.w_o);
    vec("b_o", base.b_o);
    if (auto* sr = std::get_if<SrParams>(&layer)) {
      mat("w_r", sr->w_r);
      vec("b_r", sr->b_r);
    }
  }
  emit(View{"readout.w_out", {spec.w_out.size()}, std::span(spec.w_out)});
  emit(View{"readout.b_out", {}, std::span(&spec.b_out, 1)});
}

}  // namespace

std::vector<TensorView> tensors(ModelSpec& spec) {
  std::vector<TensorView> out;
  for_each_tensor<TensorView>(spec, [&](TensorView v) { out.push_back(std::move(v)); });
  return out;
}

std::vector<ConstTensorView> tensors(const ModelSpec& spec) {
  std::vector<ConstTensorView> out;
  for_each_tensor<ConstTensorView>(spec,
                                   [&](ConstTensorView v) { out.push_back(std::move(v)); });
  return out;
}

std::size_t parameter_count(const ModelSpec& spec) {
  std::size_t n = 0;
  for (const auto& t : tensors(spec)) n += t.data.size();
  return n;
}

Vec flatten(const ModelSpec& spec) {
  Vec flat;
  flat.reserve(parameter_count(spec));
  for (const auto& t : tensors(spec)) flat.insert(flat.end(), t.data.begin(), t.data.end());
  return flat;
}

void unflatten(ModelSpec& spec, std::span<const double> flat) {
  if (flat.size() != parameter_count(spec)) {
    throw InvalidArgument("flat parameter vector has length " + std::to_string(flat.size()) +
                          ", model has " + std::to_string(parameter_count(spec)));
  }
  std::size_t pos = 0;
  for (auto t : tensors(spec)) {
    for (double& v : t.data) v = flat[pos++];
  }
}

}  // namespace roadfc
