#include "neurodecode/training.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "neurodecode/errors.hpp"
#include "neurodecode/ops.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace nd {

Tensor clip_scores(const std::vector<Tensor>& z, const std::vector<Tensor>& y,
                   bool normalize) {
  if (z.empty() || z.size() != y.size())
    throw ConfigError("clip_scores: need equal non-empty clip lists");
  for (const auto& t : z)
    if (t.shape() != z[0].shape()) throw ConfigError("clip_scores: mixed clip shapes");
  for (const auto& t : y)
    if (t.shape() != z[0].shape()) throw ConfigError("clip_scores: mixed clip shapes");

  std::vector<Tensor> zn, yn;
  for (const auto& t : z) zn.push_back(normalize ? l2_normalize(t) : t);
  for (const auto& t : y) yn.push_back(normalize ? l2_normalize(t) : t);
  std::vector<Tensor> rows;
  for (const auto& zi : zn) {
    std::vector<Tensor> row;
    for (const auto& yj : yn) row.push_back(dot_all(zi, yj));
    rows.push_back(stack_scalars(row));
  }
  return stack_rows(rows);
}

Tensor clip_loss(const Tensor& scores, double tau) {
  if (scores.rank() != 2 || scores.dim(0) != scores.dim(1))
    throw ConfigError("clip_loss: scores must be square, got " + shape_str(scores.shape()));
  if (tau <= 0.0) throw ConfigError("clip_loss: tau must be positive");
  const auto n = static_cast<double>(scores.dim(0));
  Tensor log_probs = log_softmax_rows(scale(scores, 1.0 / tau));
  return scale(sum_all(diag(log_probs)), -1.0 / n);
}

SplitIndices contiguous_split(std::size_t n, double train_frac, double val_frac) {
  if (train_frac <= 0.0 || train_frac > 1.0 || val_frac < 0.0 || train_frac + val_frac > 1.0)
    throw ConfigError("split: fractions out of range");
  auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * train_frac));
  auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * val_frac));
  if (n_train == 0) throw DataError("split: no training windows");
  SplitIndices s;
  for (std::size_t i = 0; i < n_train; ++i) s.train.push_back(i);
  for (std::size_t i = n_train; i < std::min(n, n_train + n_val); ++i) s.val.push_back(i);
  for (std::size_t i = n_train + n_val; i < n; ++i) s.test.push_back(i);
  return s;
}

void TrainConfig::validate() const {
  if (steps <= 0) throw ConfigError("train: steps must be positive");
  if (batch_size <= 0) throw ConfigError("train: batch_size must be positive");
  if (lr <= 0.0) throw ConfigError("train: lr must be positive");
  if (tau <= 0.0) throw ConfigError("train: tau must be positive");
  if (eval_every <= 0 || checkpoint_every <= 0)
    throw ConfigError("train: eval_every and checkpoint_every must be positive");
  if (train_frac <= 0.0 || train_frac > 1.0 || val_frac < 0.0 || train_frac + val_frac > 1.0)
    throw ConfigError("train: split fractions out of range");
}

std::vector<std::size_t> batch_indices(const SplitIndices& split, int batch_size,
                                       std::uint64_t seed, std::int64_t step) {
  const std::size_t n = split.train.size();
  if (n == 0) throw DataError("batch: no training windows");
  std::vector<std::size_t> out;
  std::int64_t epoch = -1;
  std::vector<std::size_t> perm;
  for (std::int64_t i = step * batch_size; i < (step + 1) * batch_size; ++i) {
    std::int64_t e = i / static_cast<std::int64_t>(n);
    if (e != epoch) {
      epoch = e;
      perm = split.train;
      Rng rng(seed, 0xE0000000ULL + static_cast<std::uint64_t>(e));
      rng.shuffle(perm);
    }
    out.push_back(perm[static_cast<std::size_t>(i % static_cast<std::int64_t>(n))]);
  }
  return out;
}

StepResult train_step(Model& model, Adam& opt, const WindowDataset& data,
                      const std::vector<std::size_t>& batch, const TrainConfig& cfg,
                      std::uint64_t seed, std::int64_t step) {
  model.zero_grad();
  Rng drng(seed, 0xD0000000ULL + static_cast<std::uint64_t>(step));
  std::vector<Tensor> z, y;
  for (std::size_t idx : batch) {
    const WindowPair& w = data.windows.at(idx);
    z.push_back(model.forward(w.eeg, w.subject_id, true, drng));
    y.push_back(w.audio);
  }
  Tensor loss = clip_loss(clip_scores(z, y, !cfg.literal_loss),
                          cfg.literal_loss ? 1.0 : cfg.tau);
  check_finite(loss, "clip_loss");
  loss.backward();
  opt.step();
  return {loss.item()};
}

namespace {

std::vector<double> flatten_clip(const Tensor& t) {
  double norm = 0.0;
  for (double v : t.data()) norm += v * v;
  norm = std::sqrt(std::max(norm, 1e-24));
  std::vector<double> out(t.data());
  for (auto& v : out) v /= norm;
  return out;
}

}  // namespace

ValMetrics validate_retrieval(Model& model, const WindowDataset& data,
                              const std::vector<std::size_t>& indices) {
  ValMetrics m;
  if (indices.empty()) return m;
  std::vector<std::vector<double>> zs, ys;
  Rng drng(0, 0);
  for (std::size_t idx : indices) {
    const WindowPair& w = data.windows.at(idx);
    zs.push_back(flatten_clip(model.forward(w.eeg, w.subject_id, false, drng)));
    ys.push_back(flatten_clip(w.audio));
  }
  const std::size_t n = indices.size();
  for (std::size_t i = 0; i < n; ++i) {
    double self = 0.0;
    for (std::size_t k = 0; k < zs[i].size(); ++k) self += zs[i][k] * ys[i][k];
    std::size_t rank = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double s = 0.0;
      for (std::size_t k = 0; k < zs[i].size(); ++k) s += zs[i][k] * ys[j][k];
      if (s > self || (s == self && j < i)) ++rank;
    }
    if (rank == 0) m.top1 += 1.0;
    if (rank < 5) m.top5 += 1.0;
  }
  m.top1 /= static_cast<double>(n);
  m.top5 /= static_cast<double>(n);
  return m;
}

namespace {

CheckpointExtra optimizer_extra(Adam& opt, const TrainState& state) {
  CheckpointExtra extra;
  auto& m = opt.first_moments();
  auto& v = opt.second_moments();
  for (std::size_t i = 0; i < m.size(); ++i) {
    extra.arrays["adam.m." + std::to_string(i)] = m[i];
    extra.arrays["adam.v." + std::to_string(i)] = v[i];
  }
  extra.strings["adam.t"] = std::to_string(opt.step_count());
  extra.strings["best_val_top1"] = std::to_string(state.best_val_top1);
  return extra;
}

void restore_optimizer(Adam& opt, TrainState& state, const CheckpointInfo& info) {
  auto& m = opt.first_moments();
  auto& v = opt.second_moments();
  for (std::size_t i = 0; i < m.size(); ++i) {
    auto mi = info.extra.arrays.find("adam.m." + std::to_string(i));
    auto vi = info.extra.arrays.find("adam.v." + std::to_string(i));
    if (mi == info.extra.arrays.end() || vi == info.extra.arrays.end())
      throw DataError("checkpoint is missing optimizer state for parameter " + std::to_string(i));
    if (mi->second.size() != m[i].size() || vi->second.size() != v[i].size())
      throw DataError("checkpoint optimizer state has wrong size for parameter " + std::to_string(i));
    m[i] = mi->second;
    v[i] = vi->second;
  }
  opt.set_step_count(std::stoll(info.extra.strings.at("adam.t")));
  state.step = info.step;
  state.best_val_top1 = std::stod(info.extra.strings.at("best_val_top1"));
}

}  // namespace

TrainResult train_loop(Model& model, const WindowDataset& data, const TrainConfig& cfg,
                       const std::string& run_dir, std::uint64_t seed) {
  cfg.validate();
  if (data.windows.empty()) throw DataError("train: dataset has no windows");
  SplitIndices split = contiguous_split(data.windows.size(), cfg.train_frac, cfg.val_frac);

  fs::create_directories(run_dir);
  const std::string latest_dir = (fs::path(run_dir) / "latest").string();
  const std::string best_dir = (fs::path(run_dir) / "best").string();

  Adam opt(model.parameters(), cfg.lr);
  TrainState state;
  if (fs::exists(fs::path(latest_dir) / "checkpoint.json")) {
    CheckpointInfo info = load_checkpoint(model, latest_dir);
    restore_optimizer(opt, state, info);
  }

  std::ofstream metrics((fs::path(run_dir) / "metrics.jsonl").string(),
                        std::ios::app);
  if (!metrics) throw DataError("train: cannot open metrics.jsonl in " + run_dir);

  auto t0 = std::chrono::steady_clock::now();
  TrainResult result;
  result.steps_done = state.step;
  result.best_val_top1 = std::max(state.best_val_top1, 0.0);

  for (std::int64_t s = state.step; s < cfg.steps; ++s) {
    auto batch = batch_indices(split, cfg.batch_size, seed, s);
    StepResult sr = train_step(model, opt, data, batch, cfg, seed, s);
    result.final_loss = sr.loss;
    result.steps_done = s + 1;
    state.step = s + 1;

    const bool last = s + 1 == cfg.steps;
    if ((s + 1) % cfg.eval_every == 0 || last) {
      ValMetrics vm = validate_retrieval(model, data, split.val);
      double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      json line;
      line["step"] = s + 1;
      line["loss"] = sr.loss;
      line["val_top1"] = vm.top1;
      line["val_top5"] = vm.top5;
      line["wall_s"] = wall;
      metrics << line.dump() << "\n";
      metrics.flush();
      if (vm.top1 > state.best_val_top1) {
        state.best_val_top1 = vm.top1;
        result.best_val_top1 = vm.top1;
        save_checkpoint(model, best_dir, s + 1, optimizer_extra(opt, state));
      }
    }
    if ((s + 1) % cfg.checkpoint_every == 0 || last)
      save_checkpoint(model, latest_dir, s + 1, optimizer_extra(opt, state));
  }
  return result;
}

}  // namespace nd
