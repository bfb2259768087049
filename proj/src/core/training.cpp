#include "training.hpp"

#include <cmath>
#include <string_view>

#include "error.hpp"

namespace roadfc {

void TrainConfig::validate() const {
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ConfigError("dropout must lie in [0, 1)");
  }
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ConfigError("val_fraction must lie in (0, 1)");
  }
}

double mse_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) {
    throw InvalidArgument("mse_loss length mismatch: " + std::to_string(pred.size()) + " vs " +
                          std::to_string(target.size()));
  }
  if (pred.empty()) throw InvalidArgument("mse_loss of empty input");
  double acc = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double d = pred[k] - target[k];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

namespace {

// Backward through one cell step. dh is the total gradient on h_new; dc_next
// arrives from step t+1. Writes dh_prev, dc_prev and dx; accumulates weights.
void step_backward(const LayerParams& layer, LayerParams& grad, const StepTrace& tr,
                   std::span<const double> dh, std::span<const double> dc_next, Vec& dh_prev,
                   Vec& dc_prev, Vec& dx) {
  const LstmParams& p = base_params(layer);
  LstmParams& g = base_params(grad);
  const std::size_t H = p.hidden_size;
  const std::size_t D = p.input_size;

  Vec da_f(H), da_i(H), da_c(H), da_o(H), dR(H);
  dc_prev.assign(H, 0.0);
  for (std::size_t k = 0; k < H; ++k) {
    const double tc = std::tanh(tr.c_new[k]);
    const double d_o = dh[k] * tc;
    const double dc = dc_next[k] + dh[k] * tr.o[k] * (1.0 - tc * tc);
    const double df_mod = dc * tr.c_prev[k];
    const double di_mod = dc * tr.c_tilde[k];
    const double dc_tilde = dc * tr.i_mod[k];
    dc_prev[k] = dc * tr.f_mod[k];
    const double df = df_mod * tr.r[k];
    const double di = di_mod * tr.r[k];
    dR[k] = df_mod * tr.f[k] + di_mod * tr.i[k];
    da_f[k] = df * tr.f[k] * (1.0 - tr.f[k]);
    da_i[k] = di * tr.i[k] * (1.0 - tr.i[k]);
    da_c[k] = dc_tilde * (1.0 - tr.c_tilde[k] * tr.c_tilde[k]);
    da_o[k] = d_o * tr.o[k] * (1.0 - tr.o[k]);
  }

  Vec z;
  z.reserve(H + D);
  z.insert(z.end(), tr.h_prev.begin(), tr.h_prev.end());
  z.insert(z.end(), tr.x.begin(), tr.x.end());

  outer_acc(g.w_f, da_f, z);
  outer_acc(g.w_i, da_i, z);
  outer_acc(g.w_c, da_c, z);
  outer_acc(g.w_o, da_o, z);
  for (std::size_t k = 0; k < H; ++k) {
    g.b_f[k] += da_f[k];
    g.b_i[k] += da_i[k];
    g.b_c[k] += da_c[k];
    g.b_o[k] += da_o[k];
  }

  Vec dz(H + D, 0.0);
  mat_t_vec_acc(p.w_f, da_f, dz);
  mat_t_vec_acc(p.w_i, da_i, dz);
  mat_t_vec_acc(p.w_c, da_c, dz);
  mat_t_vec_acc(p.w_o, da_o, dz);
  dh_prev.assign(dz.begin(), dz.begin() + static_cast<std::ptrdiff_t>(H));
  dx.assign(dz.begin() + static_cast<std::ptrdiff_t>(H), dz.end());

  if (const auto* sr = std::get_if<SrParams>(&layer)) {
    auto& gsr = std::get<SrParams>(grad);
    Vec dr_pre(H);
    for (std::size_t k = 0; k < H; ++k) {
      dr_pre[k] = dR[k] * activation_grad_from_output(sr->rho, tr.r[k]);
      gsr.b_r[k] += dr_pre[k];
    }
    outer_acc(gsr.w_r, dr_pre, tr.h_prev);
    mat_t_vec_acc(sr->w_r, dr_pre, dh_prev);
  }
}

}  // namespace

ModelSpec backward_sequence(const ModelSpec& spec, std::span<const Vec> window, double target,
                            const ForwardResult& fwd, const DropoutMasks* masks) {
  const std::size_t L = window.size();
  const std::size_t n_layers = spec.layers.size();
  if (L == 0) throw InvalidArgument("empty input window");
  if (fwd.traces.size() != n_layers) {
    throw InvalidArgument("trace has " + std::to_string(fwd.traces.size()) +
                          " layers, model has " + std::to_string(n_layers));
  }
  for (const auto& lt : fwd.traces) {
    if (lt.size() != L) throw InvalidArgument("trace length does not match window length");
  }
  if (fwd.readout_input.size() != spec.w_out.size()) {
    throw InvalidArgument("trace readout width does not match model");
  }

  ModelSpec grad = zeros_like(spec);
  const double dpred = 2.0 * (fwd.prediction - target);
  grad.b_out = dpred;
  for (std::size_t k = 0; k < spec.w_out.size(); ++k) {
    grad.w_out[k] = dpred * fwd.readout_input[k];
  }

  auto mask_at = [&](std::size_t l, std::size_t t, std::size_t k) {
    return masks == nullptr ? 1.0 : (*masks)[l][t][k];
  };

  // Gradient flowing into the raw hidden outputs of the current layer.
  std::vector<Vec> d_out(L, Vec(spec.output_hidden_size(), 0.0));
  for (std::size_t k = 0; k < spec.w_out.size(); ++k) {
    d_out[L - 1][k] = dpred * spec.w_out[k] * mask_at(n_layers - 1, L - 1, k);
  }

  for (std::size_t l = n_layers; l-- > 0;) {
    const LayerParams& layer = spec.layers[l];
    const std::size_t H = base_params(layer).hidden_size;
    const std::size_t D = base_params(layer).input_size;
    std::vector<Vec> d_in(L, Vec(D, 0.0));
    Vec dh_next(H, 0.0), dc_next(H, 0.0), dh(H), dh_prev, dc_prev;
    for (std::size_t t = L; t-- > 0;) {
      for (std::size_t k = 0; k < H; ++k) dh[k] = d_out[t][k] + dh_next[k];
      step_backward(layer, grad.layers[l], fwd.traces[l][t], dh, dc_next, dh_prev, dc_prev,
                    d_in[t]);
      dh_next.swap(dh_prev);
      dc_next.swap(dc_prev);
    }
    if (l > 0) {
      for (std::size_t t = 0; t < L; ++t) {
        for (std::size_t k = 0; k < D; ++k) d_in[t][k] *= mask_at(l - 1, t, k);
      }
      d_out = std::move(d_in);
    }
  }
  return grad;
}

namespace {

double sample_loss(const ModelSpec& spec, std::span<const Vec> window, double target) {
  const double d = forward_sequence(spec, window).prediction - target;
  return d * d;
}

}  // namespace

GradCheckResult grad_check(const ModelSpec& spec, std::span<const Vec> window, double target,
                           double step) {
  if (!(step > 0.0)) throw InvalidArgument("grad_check step must be > 0");
  const ForwardResult fwd = forward_sequence(spec, window);
  const double base_loss = (fwd.prediction - target) * (fwd.prediction - target);
  if (!std::isfinite(base_loss)) throw DivergenceError("non-finite loss in grad_check");
  const ModelSpec analytic = backward_sequence(spec, window, target, fwd);

  ModelSpec probe = spec;
  const auto analytic_views = tensors(analytic);
  auto probe_views = tensors(probe);
  GradCheckResult result;
  for (std::size_t v = 0; v < probe_views.size(); ++v) {
    auto& view = probe_views[v];
    for (std::size_t k = 0; k < view.data.size(); ++k) {
      const double saved = view.data[k];
      view.data[k] = saved + step;
      const double plus = sample_loss(probe, window, target);
      view.data[k] = saved - step;
      const double minus = sample_loss(probe, window, target);
      view.data[k] = saved;
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        throw DivergenceError("non-finite loss in grad_check at " + view.name);
      }
      const double numeric = (plus - minus) / (2.0 * step);
      const double a = analytic_views[v].data[k];
      const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      ++result.checked;
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_tensor = view.name;
        result.worst_index = k;
      }
    }
  }
  return result;
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               const TrainConfig& cfg) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw InvalidArgument("adam_step shape mismatch");
  }
  for (double g : grads) {
    if (!std::isfinite(g)) throw DivergenceError("diverged");
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = grads[k];
    state.m[k] = cfg.beta1 * state.m[k] + (1.0 - cfg.beta1) * g;
    state.v[k] = cfg.beta2 * state.v[k] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.m[k] / bc1;
    const double v_hat = state.v[k] / bc2;
    params[k] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

double clip_global_norm(std::span<double> grads, double max_norm) {
  double sq = 0.0;
  for (double g : grads) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (double& g : grads) g *= s;
  }
  return norm;
}

bool EarlyStopping::update(std::size_t epoch, double val_loss) {
  improved_last_ = val_loss < best_loss_;
  if (improved_last_) {
    best_loss_ = val_loss;
    best_epoch_ = epoch;
  }
  return epoch - best_epoch_ >= patience_;
}

double evaluate_loss(const ModelSpec& spec, std::span<const Sample> samples) {
  if (samples.empty()) throw InvalidArgument("evaluate_loss of empty sample set");
  double acc = 0.0;
  for (const auto& s : samples) {
    const double d = forward_sequence(spec, s.window).prediction - s.target;
    acc += d * d;
  }
  return acc / static_cast<double>(samples.size());
}

FitResult fit(const ModelSpec& spec, std::span<const Sample> train, const TrainConfig& cfg) {
  cfg.validate();
  if (train.empty()) throw InvalidArgument("fit needs a non-empty training set");
  ModelSpec model = spec;
  model.dropout_rate = cfg.dropout_rate;
  model.validate();

  const std::size_t n = train.size();
  const auto n_fit = static_cast<std::size_t>(
      std::floor((1.0 - cfg.val_fraction) * static_cast<double>(n) + 1e-9));
  if (n_fit < 1 || n_fit >= n) {
    throw InvalidArgument("validation split of " + std::to_string(n) +
                          " samples leaves an empty side");
  }
  const auto fit_set = train.subspan(0, n_fit);
  const auto val_set = train.subspan(n_fit);

  const std::size_t n_params = parameter_count(model);
  std::vector<bool> frozen(n_params, false);
  if (cfg.freeze_regulator) {
    std::size_t pos = 0;
    for (const auto& view : tensors(model)) {
      const bool reg = view.name.ends_with(".w_r") || view.name.ends_with(".b_r");
      for (std::size_t k = 0; k < view.data.size(); ++k) frozen[pos++] = reg;
    }
  }

  Rng dropout_rng = Rng(cfg.seed).child("dropout");
  AdamState adam = AdamState::zeros(n_params);
  EarlyStopping stopper(cfg.patience);
  FitResult result;
  result.best_spec = model;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    try {
      Vec grad(n_params, 0.0);
      double loss_sum = 0.0;
      for (const auto& s : fit_set) {
        DropoutMasks masks;
        const DropoutMasks* mask_ptr = nullptr;
        if (model.dropout_rate > 0.0) {
          masks = sample_dropout_masks(model, s.window.size(), dropout_rng);
          mask_ptr = &masks;
        }
        const ForwardResult fwd = forward_sequence(model, s.window, mask_ptr);
        const double d = fwd.prediction - s.target;
        loss_sum += d * d;
        const ModelSpec g = backward_sequence(model, s.window, s.target, fwd, mask_ptr);
        std::size_t pos = 0;
        for (const auto& view : tensors(g)) {
          for (double v : view.data) grad[pos++] += v;
        }
      }
      const double train_loss = loss_sum / static_cast<double>(n_fit);
      if (!std::isfinite(train_loss)) {
        throw DivergenceError("training loss became non-finite at epoch " + std::to_string(epoch));
      }
      for (std::size_t k = 0; k < n_params; ++k) {
        grad[k] = frozen[k] ? 0.0 : grad[k] / static_cast<double>(n_fit);
      }
      clip_global_norm(grad, cfg.clip_norm);

      Vec params = flatten(model);
      try {
        adam_step(adam, params, grad, cfg);
      } catch (const DivergenceError&) {
        throw DivergenceError("gradient diverged at epoch " + std::to_string(epoch));
      }
      unflatten(model, params);

      const double val_loss = evaluate_loss(model, val_set);
      if (!std::isfinite(val_loss)) {
        throw DivergenceError("validation loss became non-finite at epoch " +
                              std::to_string(epoch));
      }
      result.history.push_back(EpochRecord{epoch, train_loss, val_loss});
      const bool stop = stopper.update(epoch, val_loss);
      if (stopper.improved_last()) result.best_spec = model;
      result.stopped_epoch = epoch;
      if (stop) break;
    } catch (const InvalidArgument& e) {
      // Exploding parameters surface as non-finite gate inputs.
      if (std::string_view(e.what()) != "non-finite activation input") throw;
      throw DivergenceError("non-finite activation at epoch " + std::to_string(epoch));
    }
  }
  result.best_epoch = stopper.best_epoch();
  return result;
}

Vec predict(const ModelSpec& spec, std::span<const std::vector<Vec>> windows) {
  const std::size_t d = spec.input_size();
  Vec out;
  out.reserve(windows.size());
  for (const auto& w : windows) {
    for (const auto& row : w) {
      if (row.size() != d) {
        throw InvalidArgument("window row has " + std::to_string(row.size()) +
                              " features, model expects " + std::to_string(d));
      }
    }
    out.push_back(forward_sequence(spec, w).prediction);
  }
  return out;
}

Vec predict(const ModelSpec& spec, std::span<const Sample> samples) {
  std::vector<std::vector<Vec>> windows;
  windows.reserve(samples.size());
  for (const auto& s : samples) windows.push_back(s.window);
  return predict(spec, windows);
}

}  // namespace roadfc
