#pragma once

// Loss, backpropagation through time for stacked LSTM / SR-LSTM models,
// finite-difference gradient verification, Adam, and the early-stopping
// training loop.

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cells.hpp"
#include "dataprep.hpp"

namespace roadfc {

struct TrainConfig {
  std::size_t max_epochs = 500;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double dropout_rate = 0.2;
  std::size_t patience = 20;
  double val_fraction = 0.2;
  double clip_norm = 5.0;  // global-norm clip; <= 0 disables
  std::uint64_t seed = 42;
  // Keep W_r and b_r of every SR layer at their initial values.
  bool freeze_regulator = false;

  void validate() const;
};

double mse_loss(std::span<const double> pred, std::span<const double> target);

/// Gradient of the squared error (prediction - target)^2 for one sample with
/// respect to every parameter, returned in a model-shaped container.
/// `fwd` and `masks` must come from the forward pass on the same spec/window.
ModelSpec backward_sequence(const ModelSpec& spec, std::span<const Vec> window, double target,
                            const ForwardResult& fwd, const DropoutMasks* masks = nullptr);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

/// Central-difference check of backward_sequence over every scalar parameter,
/// in inference mode. Relative error is |a - n| / max(1e-8, |a| + |n|).
GradCheckResult grad_check(const ModelSpec& spec, std::span<const Vec> window, double target,
                           double step = 1e-5);

struct AdamState {
  Vec m;
  Vec v;
  std::uint64_t t = 0;

  static AdamState zeros(std::size_t n) { return AdamState{Vec(n, 0.0), Vec(n, 0.0), 0}; }
};

/// One bias-corrected Adam update in place. Throws DivergenceError on a
/// non-finite gradient.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               const TrainConfig& cfg);

/// Scales `grads` so its L2 norm is at most max_norm. Returns the pre-clip norm.
double clip_global_norm(std::span<double> grads, double max_norm);

/// Patience-based stopping on validation loss; epochs are 1-based.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Records the epoch's validation loss. Returns true when training should
  /// stop after this epoch.
  bool update(std::size_t epoch, double val_loss);

  bool improved_last() const noexcept { return improved_last_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }
  double best_loss() const noexcept { return best_loss_; }

 private:
  std::size_t patience_;
  std::size_t best_epoch_ = 0;
  double best_loss_ = std::numeric_limits<double>::infinity();
  bool improved_last_ = false;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct FitResult {
  ModelSpec best_spec;
  std::vector<EpochRecord> history;
  std::size_t stopped_epoch = 0;
  std::size_t best_epoch = 0;
};

/// Full-batch training with a chronological validation tail, inverted dropout
/// resampled every epoch, gradient clipping, Adam and best-weight restore.
/// The spec's dropout rate is overridden by cfg.dropout_rate.
FitResult fit(const ModelSpec& spec, std::span<const Sample> train, const TrainConfig& cfg);

/// Mean squared error of the model over samples, inference mode.
double evaluate_loss(const ModelSpec& spec, std::span<const Sample> samples);

/// Inference-mode prediction, one scalar per window.
Vec predict(const ModelSpec& spec, std::span<const std::vector<Vec>> windows);
Vec predict(const ModelSpec& spec, std::span<const Sample> samples);

}  // namespace roadfc
