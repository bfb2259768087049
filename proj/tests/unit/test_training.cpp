#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "error.hpp"
#include "training.hpp"

using namespace roadfc;

namespace {

ModelSpec random_model(Rng& rng, CellVariant variant, std::size_t d, std::size_t h,
                       std::size_t layers) {
  ModelArch arch;
  arch.input_size = d;
  arch.hidden_size = h;
  arch.layers = layers;
  arch.variant = variant;
  arch.dropout_rate = 0.0;
  ModelSpec spec = init_model(rng.child("model"), arch);
  // Move away from the init pattern so every parameter path is exercised.
  Vec flat = flatten(spec);
  for (auto& v : flat) v += uniform(rng, -0.3, 0.3);
  unflatten(spec, flat);
  return spec;
}

std::vector<Vec> random_window(Rng& rng, std::size_t L, std::size_t d) {
  std::vector<Vec> w(L, Vec(d));
  for (auto& row : w) {
    for (auto& x : row) x = uniform(rng, -1.5, 1.5);
  }
  return w;
}

// Noise-free series whose next value is a linear function of the window.
std::vector<Sample> linear_samples(std::size_t count, std::size_t L) {
  std::vector<Sample> out;
  for (std::size_t k = 0; k < count; ++k) {
    Sample s;
    for (std::size_t t = 0; t < L; ++t) {
      const double x = -1.0 + 2.0 * static_cast<double>(k + t) / static_cast<double>(count + L);
      s.window.push_back(Vec{x});
    }
    s.target = -1.0 + 2.0 * static_cast<double>(k + L) / static_cast<double>(count + L);
    s.target_row = k + L;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST_CASE("mse examples") {
  CHECK(mse_loss(Vec{1, 2, 3}, Vec{1, 2, 3}) == 0.0);
  CHECK(mse_loss(Vec{3, 4, 5}, Vec{1, 2, 3}) == 4.0);
  CHECK(mse_loss(Vec{1, 2, 3}, Vec{2, 2, 2}) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(mse_loss(Vec{1}, Vec{1, 2}), InvalidArgument);
}

TEST_CASE("zero residual gives zero readout-bias gradient") {
  Rng rng(1);
  const ModelSpec spec = random_model(rng, CellVariant::Sr, 2, 3, 2);
  const auto window = random_window(rng, 4, 2);
  const ForwardResult fwd = forward_sequence(spec, window);
  const ModelSpec g = backward_sequence(spec, window, fwd.prediction, fwd);
  CHECK(g.b_out == 0.0);
  for (double v : flatten(g)) CHECK(v == 0.0);
}

TEST_CASE("backward rejects a mismatched trace") {
  Rng rng(2);
  const ModelSpec spec = random_model(rng, CellVariant::Lstm, 2, 3, 1);
  const auto window = random_window(rng, 4, 2);
  const ForwardResult fwd = forward_sequence(spec, window);
  const auto shorter = random_window(rng, 3, 2);
  CHECK_THROWS_AS(backward_sequence(spec, shorter, 0.0, fwd), InvalidArgument);
}

TEST_CASE("grad check on an all-zero model is exact for b_out") {
  ModelSpec spec;
  spec.layers.push_back(LstmParams::zeros(2, 2));
  spec.w_out = Vec(2, 0.0);
  const std::vector<Vec> window{{1.0, 2.0}, {0.5, -1.0}};
  const auto res = grad_check(spec, window, 0.7);
  CHECK(res.checked == parameter_count(spec));
  const ForwardResult fwd = forward_sequence(spec, window);
  const ModelSpec g = backward_sequence(spec, window, 0.7, fwd);
  CHECK(g.b_out == doctest::Approx(-1.4).epsilon(1e-15));
}

TEST_CASE("grad check on the reference shapes") {
  for (auto variant : {CellVariant::Lstm, CellVariant::Sr}) {
    Rng rng(variant == CellVariant::Lstm ? 31 : 32);
    const ModelSpec spec = random_model(rng, variant, 3, 4, 1);
    const auto window = random_window(rng, 5, 3);
    const auto res = grad_check(spec, window, 1.0);
    CHECK(res.max_relative_error < 1e-4);
    CHECK(res.checked == parameter_count(spec));
  }
}

TEST_CASE("grad check across random shapes, both variants, with dropout masks off") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const auto variant = trial % 2 == 0 ? CellVariant::Lstm : CellVariant::Sr;
    const std::size_t d = 1 + rng.below(6), h = 1 + rng.below(8), L = 1 + rng.below(6);
    const std::size_t layers = 1 + rng.below(2);
    const ModelSpec spec = random_model(rng, variant, d, h, layers);
    const auto window = random_window(rng, L, d);
    const auto res = grad_check(spec, window, uniform(rng, -2.0, 2.0));
    INFO("trial " << trial << " worst " << res.worst_tensor << "[" << res.worst_index << "]");
    CHECK(res.max_relative_error < 1e-4);
  }
}

TEST_CASE("backward with dropout masks matches finite differences under fixed masks") {
  Rng rng(88);
  ModelSpec spec = random_model(rng, CellVariant::Sr, 2, 3, 2);
  spec.dropout_rate = 0.3;
  const auto window = random_window(rng, 4, 2);
  Rng mask_rng(5);
  const DropoutMasks masks = sample_dropout_masks(spec, window.size(), mask_rng);
  const double target = 0.4;
  const ForwardResult fwd = forward_sequence(spec, window, &masks);
  const Vec analytic = flatten(backward_sequence(spec, window, target, fwd, &masks));
  Vec flat = flatten(spec);
  const double step = 1e-5;
  for (std::size_t k = 0; k < flat.size(); ++k) {
    ModelSpec plus = spec, minus = spec;
    Vec fp = flat, fm = flat;
    fp[k] += step;
    fm[k] -= step;
    unflatten(plus, fp);
    unflatten(minus, fm);
    const double lp = std::pow(forward_sequence(plus, window, &masks).prediction - target, 2);
    const double lm = std::pow(forward_sequence(minus, window, &masks).prediction - target, 2);
    const double numeric = (lp - lm) / (2 * step);
    const double rel =
        std::abs(analytic[k] - numeric) / std::max(1e-8, std::abs(analytic[k]) + std::abs(numeric));
    CHECK(rel < 1e-4);
  }
}

TEST_CASE("adam first step moves by the learning rate") {
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  AdamState st = AdamState::zeros(1);
  Vec p{2.0};
  adam_step(st, p, Vec{1.0}, cfg);
  CHECK(p[0] == doctest::Approx(1.9).epsilon(1e-9));
  CHECK(st.t == 1);

  AdamState zero = AdamState::zeros(3);
  Vec q{1.0, -2.0, 3.0};
  adam_step(zero, q, Vec{0.0, 0.0, 0.0}, cfg);
  CHECK(q == Vec{1.0, -2.0, 3.0});

  AdamState bad = AdamState::zeros(1);
  Vec r{1.0};
  CHECK_THROWS_WITH_AS(adam_step(bad, r, Vec{std::nan("")}, cfg), "diverged", DivergenceError);
  CHECK_THROWS_AS(adam_step(bad, r, Vec{1.0, 2.0}, cfg), InvalidArgument);
}

TEST_CASE("adam is deterministic") {
  TrainConfig cfg;
  Rng rng(4);
  Vec grads(20);
  for (auto& g : grads) g = uniform(rng, -1, 1);
  AdamState a = AdamState::zeros(20), b = AdamState::zeros(20);
  Vec pa(20, 0.5), pb(20, 0.5);
  for (int t = 0; t < 10; ++t) {
    adam_step(a, pa, grads, cfg);
    adam_step(b, pb, grads, cfg);
  }
  CHECK(pa == pb);
}

TEST_CASE("global norm clipping") {
  Vec g{3.0, 4.0};
  CHECK(clip_global_norm(g, 1.0) == 5.0);
  CHECK(g[0] == doctest::Approx(0.6));
  CHECK(g[1] == doctest::Approx(0.8));
  Vec small{0.3, 0.4};
  clip_global_norm(small, 5.0);
  CHECK(small == Vec{0.3, 0.4});
}

TEST_CASE("early stopping simulation") {
  EarlyStopping es(2);
  const Vec losses{5.0, 4.0, 4.1, 4.2};
  std::size_t stopped = 0;
  for (std::size_t e = 1; e <= losses.size(); ++e) {
    if (es.update(e, losses[e - 1])) {
      stopped = e;
      break;
    }
  }
  CHECK(stopped == 4);
  CHECK(es.best_epoch() == 2);
  CHECK(es.best_loss() == 4.0);

  EarlyStopping mono(100);
  for (std::size_t e = 1; e <= 50; ++e) CHECK_FALSE(mono.update(e, 1.0 / static_cast<double>(e)));
  CHECK(mono.best_epoch() == 50);
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  auto bad = cfg;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.dropout_rate = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.patience = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("fit is deterministic and restores the best epoch") {
  Rng rng(10);
  ModelArch arch;
  arch.input_size = 1;
  arch.hidden_size = 4;
  arch.layers = 2;
  const ModelSpec spec = init_model(rng, arch);
  const auto samples = linear_samples(40, 3);
  TrainConfig cfg;
  cfg.max_epochs = 60;
  cfg.learning_rate = 0.01;
  cfg.patience = 5;
  cfg.dropout_rate = 0.1;
  const FitResult a = fit(spec, samples, cfg);
  const FitResult b = fit(spec, samples, cfg);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t k = 0; k < a.history.size(); ++k) {
    CHECK(a.history[k].train_loss == b.history[k].train_loss);
    CHECK(a.history[k].val_loss == b.history[k].val_loss);
  }
  CHECK(a.best_spec == b.best_spec);
  CHECK(a.best_epoch <= a.stopped_epoch);
  double min_val = a.history.front().val_loss;
  for (const auto& r : a.history) min_val = std::min(min_val, r.val_loss);
  CHECK(a.history[a.best_epoch - 1].val_loss == min_val);

  // The restored weights reproduce the best validation loss.
  const std::size_t n_fit = static_cast<std::size_t>(std::floor(0.8 * 40 + 1e-9));
  const std::span<const Sample> val(samples.data() + n_fit, samples.size() - n_fit);
  CHECK(evaluate_loss(a.best_spec, val) == min_val);
}

TEST_CASE("fit with patience beyond max_epochs on a steadily improving problem runs all epochs") {
  ModelArch arch;
  arch.input_size = 1;
  arch.hidden_size = 3;
  arch.layers = 1;
  const ModelSpec spec = init_model(Rng(3), arch);
  const auto samples = linear_samples(30, 2);
  TrainConfig cfg;
  cfg.max_epochs = 15;
  cfg.patience = 100;
  cfg.dropout_rate = 0.0;
  const FitResult r = fit(spec, samples, cfg);
  CHECK(r.history.size() == 15);
  CHECK(r.stopped_epoch == 15);
}

TEST_CASE("fit rejects unusable inputs") {
  ModelArch arch;
  arch.input_size = 1;
  arch.hidden_size = 2;
  const ModelSpec spec = init_model(Rng(3), arch);
  TrainConfig cfg;
  CHECK_THROWS_AS(fit(spec, std::vector<Sample>{}, cfg), InvalidArgument);
  CHECK_THROWS_AS(fit(spec, linear_samples(1, 2), cfg), InvalidArgument);
  cfg.learning_rate = -1.0;
  CHECK_THROWS_AS(fit(spec, linear_samples(10, 2), cfg), ConfigError);
}

TEST_CASE("fit reports divergence with the epoch") {
  ModelArch arch;
  arch.input_size = 1;
  arch.hidden_size = 2;
  const ModelSpec spec = init_model(Rng(3), arch);
  auto samples = linear_samples(10, 2);
  samples[0].target = std::numeric_limits<double>::infinity();
  TrainConfig cfg;
  try {
    fit(spec, samples, cfg);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
  }
}

TEST_CASE("predict: zero model, repeatability and shape checks") {
  ModelSpec zero;
  zero.layers.push_back(LstmParams::zeros(2, 3));
  zero.w_out = Vec(3, 0.0);
  zero.b_out = -0.25;
  const std::vector<std::vector<Vec>> windows{{{1, 2}}, {{3, 4}, {5, 6}}};
  CHECK(predict(zero, windows) == Vec{-0.25, -0.25});

  Rng rng(6);
  const ModelSpec spec = random_model(rng, CellVariant::Sr, 2, 3, 2);
  CHECK(predict(spec, windows) == predict(spec, windows));
  const std::vector<std::vector<Vec>> bad{{{1, 2, 3}}};
  CHECK_THROWS_AS(predict(spec, bad), InvalidArgument);
}

TEST_CASE("trained model beats persistence on a noise-free linear series") {
  const std::size_t L = 3;
  const auto samples = linear_samples(60, L);
  ModelArch arch;
  arch.input_size = 1;
  arch.hidden_size = 8;
  arch.layers = 1;
  const ModelSpec spec = init_model(Rng(12), arch);
  TrainConfig cfg;
  cfg.max_epochs = 400;
  cfg.learning_rate = 0.01;
  cfg.patience = 400;
  cfg.dropout_rate = 0.0;
  const FitResult r = fit(spec, samples, cfg);
  const Vec pred = predict(r.best_spec, samples);
  double model_sq = 0.0, persist_sq = 0.0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    model_sq += std::pow(pred[k] - samples[k].target, 2);
    persist_sq += std::pow(samples[k].window.back()[0] - samples[k].target, 2);
  }
  CHECK(model_sq < persist_sq);
}

TEST_CASE("a small readout-only gradient step does not increase the loss") {
  Rng rng(13);
  const ModelSpec spec = random_model(rng, CellVariant::Lstm, 2, 4, 1);
  std::vector<std::vector<Vec>> windows;
  Vec targets;
  for (int k = 0; k < 12; ++k) {
    windows.push_back(random_window(rng, 3, 2));
    targets.push_back(uniform(rng, -1.0, 1.0));
  }
  auto loss_of = [&](const ModelSpec& m) {
    double acc = 0.0;
    for (std::size_t k = 0; k < windows.size(); ++k) {
      acc += std::pow(forward_sequence(m, windows[k]).prediction - targets[k], 2);
    }
    return acc / static_cast<double>(windows.size());
  };
  for (double lr : {1e-3, 1e-2, 5e-2}) {
    Vec gw(spec.w_out.size(), 0.0);
    double gb = 0.0;
    for (std::size_t k = 0; k < windows.size(); ++k) {
      const ForwardResult fwd = forward_sequence(spec, windows[k]);
      const ModelSpec g = backward_sequence(spec, windows[k], targets[k], fwd);
      for (std::size_t j = 0; j < gw.size(); ++j) gw[j] += g.w_out[j];
      gb += g.b_out;
    }
    ModelSpec stepped = spec;
    for (std::size_t j = 0; j < gw.size(); ++j) {
      stepped.w_out[j] -= lr * gw[j] / static_cast<double>(windows.size());
    }
    stepped.b_out -= lr * gb / static_cast<double>(windows.size());
    CHECK(loss_of(stepped) <= loss_of(spec));
  }
}

TEST_CASE("frozen identity SR training matches LSTM training") {
  ModelArch arch;
  arch.input_size = 1;
  arch.hidden_size = 5;
  arch.layers = 2;
  arch.variant = CellVariant::Lstm;
  const ModelSpec lstm = init_model(Rng(20), arch);
  arch.variant = CellVariant::Sr;
  ModelSpec sr = init_model(Rng(20), arch);
  set_identity_regulation(sr);
  const auto samples = linear_samples(30, 4);
  TrainConfig cfg;
  cfg.max_epochs = 25;
  cfg.dropout_rate = 0.2;
  const FitResult a = fit(lstm, samples, cfg);
  cfg.freeze_regulator = true;
  const FitResult b = fit(sr, samples, cfg);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t k = 0; k < a.history.size(); ++k) {
    CHECK(std::abs(a.history[k].train_loss - b.history[k].train_loss) <= 1e-12);
    CHECK(std::abs(a.history[k].val_loss - b.history[k].val_loss) <= 1e-12);
  }
}
