// SPDX-License-Identifier: Apache-2.0
#include "isac/train/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>

#include "isac/errors.hpp"
#include "isac/model/isac_model.hpp"
#include "isac/numerics/archive.hpp"
#include "isac/numerics/parallel.hpp"
#include "isac/numerics/random.hpp"
#include "isac/train/loss.hpp"
#include "json.hpp"

namespace isac::train {

using model::Batch;
using num::Tensor;

std::string to_string(FreezePolicy policy) {
  switch (policy) {
    case FreezePolicy::paper_default: return "paper_default";
    case FreezePolicy::none: return "none";
    case FreezePolicy::all_backbone: return "all_backbone";
  }
  return "?";
}

FreezePolicy freeze_policy_from_string(const std::string& name) {
  if (name == "paper_default") return FreezePolicy::paper_default;
  if (name == "none") return FreezePolicy::none;
  if (name == "all_backbone") return FreezePolicy::all_backbone;
  throw ConfigError("unknown freeze policy '" + name + "'");
}

template <typename T>
void apply_freeze_policy(ParamStore<T>& params, FreezePolicy policy) {
  const std::string backbone = std::string(model::kBackbone) + ".";
  for (auto& p : params.params()) {
    bool frozen = false;
    switch (policy) {
      case FreezePolicy::paper_default: frozen = model::is_backbone_attention_or_ffn(p.name); break;
      case FreezePolicy::none: break;
      case FreezePolicy::all_backbone: frozen = p.name.rfind(backbone, 0) == 0; break;
    }
    params.set_trainable(p.name, !frozen);
  }
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1 || chunk_rows < 1) throw ConfigError("batch and chunk sizes must be at least 1");
  if (!(lr > 0.0) || min_lr < 0.0 || min_lr > lr) throw ConfigError("need 0 <= min_lr <= lr and lr > 0");
  if (snr_train_range_db && (*snr_train_range_db)[0] > (*snr_train_range_db)[1]) {
    throw ConfigError("snr_train_range_db low must not exceed high");
  }
}

namespace {

template <typename T>
Tensor<T> take_rows(const Tensor<T>& t, std::size_t begin, std::size_t count) {
  num::Shape s = t.shape();
  const std::size_t per = t.size() / s[0];
  s[0] = count;
  Tensor<T> out(s);
  std::copy_n(t.data().begin() + static_cast<std::ptrdiff_t>(begin * per), count * per, out.vec().begin());
  return out;
}

template <typename T>
Batch<T> take_rows(const Batch<T>& b, std::size_t begin, std::size_t count) {
  Batch<T> out;
  out.rows = count;
  out.k = b.k;
  out.p = b.p;
  out.q = b.q;
  out.c_freq = take_rows(b.c_freq, begin, count);
  out.c_delay = take_rows(b.c_delay, begin, count);
  out.s_freq = take_rows(b.s_freq, begin, count);
  out.s_delay = take_rows(b.s_delay, begin, count);
  out.target = take_rows(b.target, begin, count);
  out.mu.assign(b.mu.begin() + static_cast<std::ptrdiff_t>(begin), b.mu.begin() + static_cast<std::ptrdiff_t>(begin + count));
  out.sigma.assign(b.sigma.begin() + static_cast<std::ptrdiff_t>(begin),
                   b.sigma.begin() + static_cast<std::ptrdiff_t>(begin + count));
  return out;
}

void check_dims(const model::Predictor& m, const Dataset& d) {
  for (const auto& s : d.samples) {
    if (s.k() != m.k() || s.p != m.p() || s.q != m.q()) {
      throw ConfigError("dataset window (K=" + std::to_string(s.k()) + ", P=" + std::to_string(s.p) +
                        ", Q=" + std::to_string(s.q) + ") does not match model " + m.name());
    }
  }
}

// One optimizer step's gradient: the batch is cut into row chunks, each on its own
// tape, and chunk gradients are summed in chunk order.
double batch_gradient(const model::Predictor& m, ParamStore<float>& params, const Batch<float>& batch,
                      std::size_t chunk_rows) {
  const double denom = energy(batch.target);
  const std::size_t chunks = (batch.rows + chunk_rows - 1) / chunk_rows;
  std::vector<std::vector<Tensor<float>>> grads(chunks);
  std::vector<double> losses(chunks, 0.0);
  num::parallel_for(chunks, [&](std::size_t c) {
    const std::size_t begin = c * chunk_rows;
    const auto sub = take_rows(batch, begin, std::min(chunk_rows, batch.rows - begin));
    num::Graph<float> g;
    auto loss = scaled_squared_error(m.forward(g, params, sub), sub.target, denom);
    g.backward(loss);
    g.accumulate_grads(params, grads[c]);
    losses[c] = loss.value()[0];
  });
  auto& ps = params.params();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (!ps[i].trainable) continue;
    ps[i].grad = std::move(grads[0][i]);
    for (std::size_t c = 1; c < chunks; ++c) {
      auto dst = ps[i].grad.data();
      auto src = grads[c][i].data();
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
    ps[i].has_grad = true;
  }
  return std::accumulate(losses.begin(), losses.end(), 0.0);
}

nlohmann::json sidecar(const TrainReport& r, const TrainConfig& c, std::size_t epoch) {
  nlohmann::json j;
  j["model"] = r.model;
  j["epoch"] = epoch;
  j["steps"] = r.steps;
  j["val_nmse"] = r.best_val;
  j["train_loss"] = r.train_loss;
  j["val_loss"] = r.val_loss;
  j["config"] = {{"epochs", c.epochs},       {"batch_size", c.batch_size}, {"lr", c.lr},
                 {"min_lr", c.min_lr},       {"seed", c.seed},             {"patience", c.patience},
                 {"max_steps", c.max_steps}, {"freeze_policy", to_string(c.freeze_policy)}};
  j["config"]["snr_train_range_db"] =
      c.snr_train_range_db ? nlohmann::json(*c.snr_train_range_db) : nlohmann::json(nullptr);
  return j;
}

}  // namespace

TrainResult train(const model::Predictor& m, const ParamStore<double>& init, const Dataset& train_set,
                  const Dataset& val_set, const TrainConfig& cfg, const std::filesystem::path& checkpoint_dir) {
  cfg.validate();
  if (train_set.size() == 0) throw ConfigError("training set is empty");
  check_dims(m, train_set);
  check_dims(m, val_set);
  const auto start = std::chrono::steady_clock::now();

  TrainResult result;
  auto& report = result.report;
  report.model = m.name();
  auto params = init.cast<float>();
  apply_freeze_policy(params, cfg.freeze_policy);
  params.lock_flags();

  const std::size_t n = train_set.size();
  const std::size_t per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  std::size_t total = cfg.epochs * per_epoch;
  if (cfg.max_steps > 0) total = std::min(total, cfg.max_steps);
  auto lr_at = [&](std::size_t step) {
    const double frac = static_cast<double>(step) / static_cast<double>(total);
    return cfg.min_lr + 0.5 * (cfg.lr - cfg.min_lr) * (1.0 + std::cos(std::numbers::pi * frac));
  };

  std::vector<std::size_t> order(n);
  std::size_t wait = 0;
  bool have_best = false;
  for (std::size_t epoch = 0; epoch < cfg.epochs && report.steps < total; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    num::Rng shuffle_rng(num::derive_seed(cfg.seed, epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t b0 = 0; b0 < n && report.steps < total; b0 += cfg.batch_size) {
      const std::uint64_t batch_seed = num::derive_seed(num::derive_seed(cfg.seed, 1'000'000 + epoch), b0);
      const std::size_t count = std::min(cfg.batch_size, n - b0);
      std::vector<CsiSample> noisy;
      std::vector<const CsiSample*> ptrs;
      if (cfg.snr_train_range_db) {
        num::Rng rng(batch_seed);
        const double snr = num::uniform(rng, (*cfg.snr_train_range_db)[0], (*cfg.snr_train_range_db)[1]);
        noisy.reserve(count);
        for (std::size_t j = 0; j < count; ++j) {
          noisy.push_back(prep::add_csi_noise(train_set.samples[order[b0 + j]], snr, num::derive_seed(batch_seed, j)));
        }
        for (const auto& s : noisy) ptrs.push_back(&s);
      } else {
        for (std::size_t j = 0; j < count; ++j) ptrs.push_back(&train_set.samples[order[b0 + j]]);
      }
      const auto batch = model::make_batch<float>(ptrs);
      const double loss = batch_gradient(m, params, batch, cfg.chunk_rows);
      if (!std::isfinite(loss)) {
        throw TrainingError("non-finite loss in " + m.name() + " at epoch " + std::to_string(epoch) + ", step " +
                            std::to_string(report.steps));
      }
      num::adam_step(params, cfg.adam, lr_at(report.steps));
      ++report.steps;
      report.step_loss.push_back(loss);
      epoch_loss += loss;
      ++batches;
    }
    report.train_loss.push_back(epoch_loss / static_cast<double>(batches));

    if (val_set.size() == 0) continue;
    const double val = summarize(evaluate(m, params, val_set.samples, prep::kNoNoise, 0, cfg.batch_size)).nmse_global;
    if (!std::isfinite(val)) throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch));
    report.val_loss.push_back(val);
    if (!have_best || val < report.best_val) {
      have_best = true;
      wait = 0;
      report.best_val = val;
      report.best_epoch = epoch;
      result.params = params;
      if (!checkpoint_dir.empty()) {
        report.best_checkpoint = checkpoint_dir / "best";
        save_checkpoint(report.best_checkpoint, params, sidecar(report, cfg, epoch).dump(2));
      }
    } else if (++wait >= cfg.patience) {
      report.stopped_early = true;
      break;
    }
  }
  if (!have_best) {
    result.params = params;
    report.best_epoch = report.train_loss.size() - 1;
    if (!checkpoint_dir.empty()) {
      report.best_checkpoint = checkpoint_dir / "best";
      save_checkpoint(report.best_checkpoint, params, sidecar(report, cfg, report.best_epoch).dump(2));
    }
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::pair<Dataset, Dataset> split_validation(const Dataset& data, double fraction) {
  if (fraction < 0.0 || fraction >= 1.0) throw ConfigError("validation fraction must be in [0, 1)");
  const auto n_val = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(data.size())));
  std::vector<std::size_t> tr(data.size() - n_val), va(n_val);
  std::iota(tr.begin(), tr.end(), 0);
  std::iota(va.begin(), va.end(), tr.size());
  return {data.subset(tr), data.subset(va)};
}

std::vector<SampleError> evaluate(const model::Predictor& m, const ParamStore<float>& params,
                                  std::span<const CsiSample> samples, double snr_db, std::uint64_t noise_seed,
                                  std::size_t batch_size) {
  std::vector<SampleError> out(samples.size());
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  const std::size_t groups = (samples.size() + batch_size - 1) / batch_size;
  num::parallel_for(groups, [&](std::size_t gi) {
    const std::size_t b0 = gi * batch_size, count = std::min(batch_size, samples.size() - b0);
    std::vector<CsiSample> noisy;
    std::vector<const CsiSample*> ptrs;
    if (std::isfinite(snr_db)) {
      for (std::size_t j = 0; j < count; ++j)
        noisy.push_back(prep::add_csi_noise(samples[b0 + j], snr_db, num::derive_seed(noise_seed, b0 + j)));
      for (const auto& s : noisy) ptrs.push_back(&s);
    } else {
      for (std::size_t j = 0; j < count; ++j) ptrs.push_back(&samples[b0 + j]);
    }
    const auto batch = model::make_batch<float>(ptrs);
    num::Graph<float> g;
    const auto& pred = m.forward(g, params, batch).value();
    const std::size_t per = pred.size() / batch.rows;
    for (std::size_t r = 0; r < batch.rows; ++r) {
      auto& e = out[b0 + r / samples[b0].n()];
      for (std::size_t i = r * per; i < (r + 1) * per; ++i) {
        const double d = static_cast<double>(pred[i]) - batch.target[i];
        e.err += d * d;
        e.ref += static_cast<double>(batch.target[i]) * batch.target[i];
      }
    }
  });
  return out;
}

Score summarize(std::span<const SampleError> errors) {
  Score s;
  double err = 0.0, ref = 0.0, mean = 0.0;
  for (const auto& e : errors) {
    if (e.ref == 0.0) throw DegenerateError("nmse: truth is all zeros");
    err += e.err;
    ref += e.ref;
    mean += e.err / e.ref;
  }
  s.n = errors.size();
  if (s.n == 0) return s;
  s.nmse_global = err / ref;
  s.nmse_mean = mean / static_cast<double>(s.n);
  return s;
}

void save_checkpoint(const std::filesystem::path& stem, const ParamStore<float>& params, const std::string& sidecar_json) {
  std::filesystem::create_directories(stem.parent_path().empty() ? "." : stem.parent_path());
  num::archive_params(params).save(stem.string() + ".ntar");
  const std::string text = sidecar_json + "\n";
  num::write_file_bytes(stem.string() + ".json", std::vector<unsigned char>(text.begin(), text.end()));
}

void load_checkpoint(const std::filesystem::path& stem, ParamStore<float>& params) {
  num::restore_params(params, num::TensorArchive::load(stem.string() + ".ntar"));
}

std::string report_json(const TrainReport& r) {
  nlohmann::json j;
  j["model"] = r.model;
  j["train_loss"] = r.train_loss;
  j["val_loss"] = r.val_loss;
  j["steps"] = r.steps;
  j["best_epoch"] = r.best_epoch;
  j["best_val"] = r.best_val;
  j["stopped_early"] = r.stopped_early;
  // wall time stays out so repeated runs write identical bytes
  j["best_checkpoint"] = r.best_checkpoint.string();
  return j.dump(2);
}

template void apply_freeze_policy<float>(ParamStore<float>&, FreezePolicy);
template void apply_freeze_policy<double>(ParamStore<double>&, FreezePolicy);

}  // namespace isac::train
