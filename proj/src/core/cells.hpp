#pragma once

// LSTM and self-regulating LSTM (SR-LSTM) cells, stacked-model container and
// the whole-window forward pass.
//
// Gate pre-activations act on the concatenation [h_prev, x] (hidden first),
// so every gate matrix is H x (H + D). The SR variant adds a regulatory
// factor R = rho(W_r h_prev + b_r) that rescales the forget and input gates
// elementwise; the candidate, cell update and output gate are unchanged.
// With rho = relu, R is unbounded above and is left unclamped.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "numkernel.hpp"

namespace roadfc {

enum class CellVariant { Lstm, Sr };

std::string_view to_string(CellVariant variant);
CellVariant cell_variant_from_string(std::string_view name);

struct LstmParams {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  Mat w_f, w_i, w_c, w_o;
  Vec b_f, b_i, b_c, b_o;

  static LstmParams zeros(std::size_t input_size, std::size_t hidden_size);
  void validate() const;
  bool operator==(const LstmParams&) const = default;
};

struct SrParams {
  LstmParams base;
  Mat w_r;
  Vec b_r;
  Activation rho = Activation::Relu;

  static SrParams zeros(std::size_t input_size, std::size_t hidden_size);
  void validate() const;
  bool operator==(const SrParams&) const = default;
};

using LayerParams = std::variant<LstmParams, SrParams>;

const LstmParams& base_params(const LayerParams& layer);
LstmParams& base_params(LayerParams& layer);
CellVariant variant_of(const LayerParams& layer);

struct CellState {
  Vec h;
  Vec c;

  static CellState zeros(std::size_t hidden_size);
};

/// Every intermediate of one step, kept for backpropagation.
struct StepTrace {
  Vec x;
  Vec f, i, o;
  Vec c_tilde;
  Vec r;  // all ones for a plain LSTM step
  Vec f_mod, i_mod;
  Vec h_prev, c_prev;
  Vec h_new, c_new;
};

struct StepOutput {
  CellState state;
  StepTrace trace;
};

StepOutput lstm_step(const LstmParams& p, const CellState& s, std::span<const double> x);
StepOutput sr_lstm_step(const SrParams& p, const CellState& s, std::span<const double> x);
StepOutput cell_step(const LayerParams& p, const CellState& s, std::span<const double> x);

/// Glorot-uniform weights, zero biases except b_f = 1 (and b_r = 1 for SR).
/// Base gate weights are drawn before W_r, so both variants share the same
/// base parameters for the same generator state.
LayerParams init_params(Rng& rng, std::size_t input_size, std::size_t hidden_size,
                        CellVariant variant, Activation rho = Activation::Relu);

/// Glorot bound sqrt(6 / (fan_in + fan_out)).
double glorot_bound(std::size_t fan_in, std::size_t fan_out);

struct ModelSpec {
  std::vector<LayerParams> layers;
  double dropout_rate = 0.0;
  Vec w_out;
  double b_out = 0.0;

  std::size_t input_size() const;
  std::size_t output_hidden_size() const;
  void validate() const;
  bool operator==(const ModelSpec&) const = default;
};

struct ModelArch {
  std::size_t input_size = 1;
  std::size_t hidden_size = 32;
  std::size_t layers = 2;
  CellVariant variant = CellVariant::Lstm;
  Activation rho = Activation::Relu;
  double dropout_rate = 0.2;
};

/// Builds a model whose layer l is initialized from rng.child("layer<l>") and
/// whose readout comes from rng.child("readout").
ModelSpec init_model(const Rng& rng, const ModelArch& arch);

/// Sets every SR layer to W_r = 0, b_r = 1, which makes R identically 1 when
/// rho(1) = 1 (relu).
void set_identity_regulation(ModelSpec& spec);

/// Same structure as `spec`, every value zero. Used as a gradient container.
ModelSpec zeros_like(const ModelSpec& spec);

/// Inverted-dropout multipliers: masks[layer][step][unit] is 0 or 1/(1-rate).
using DropoutMasks = std::vector<std::vector<Vec>>;

DropoutMasks sample_dropout_masks(const ModelSpec& spec, std::size_t steps, Rng& rng);

struct ForwardResult {
  double prediction = 0.0;
  std::vector<std::vector<StepTrace>> traces;  // [layer][step]
  Vec readout_input;                           // final hidden state after dropout
};

/// Runs the stacked model over one window from zero initial states. Passing
/// masks selects training mode; nullptr is inference mode.
ForwardResult forward_sequence(const ModelSpec& spec, std::span<const Vec> window,
                               const DropoutMasks* masks = nullptr);

/// Flat, named view of every trainable tensor in a fixed order.
struct TensorView {
  std::string name;
  std::vector<std::size_t> shape;
  std::span<double> data;
};
struct ConstTensorView {
  std::string name;
  std::vector<std::size_t> shape;
  std::span<const double> data;
};

std::vector<TensorView> tensors(ModelSpec& spec);
std::vector<ConstTensorView> tensors(const ModelSpec& spec);

std::size_t parameter_count(const ModelSpec& spec);
Vec flatten(const ModelSpec& spec);
void unflatten(ModelSpec& spec, std::span<const double> flat);

}  // namespace roadfc
