#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "neurodecode/adam.hpp"
#include "neurodecode/model.hpp"
#include "neurodecode/preprocess.hpp"
#include "neurodecode/tensor.hpp"

namespace nd {

// Pairwise similarity matrix: scores[i][j] = <z_i, y_j>, optionally with each
// clip scaled to unit L2 norm first. All tensors must share one shape.
Tensor clip_scores(const std::vector<Tensor>& z, const std::vector<Tensor>& y,
                   bool normalize = true);

// Mean over rows i of -log softmax(scores[i, :] / tau)[i].
Tensor clip_loss(const Tensor& scores, double tau);

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

// Contiguous split in stored window order; remaining fraction goes to test.
SplitIndices contiguous_split(std::size_t n, double train_frac, double val_frac);

struct TrainConfig {
  int steps = 1000;
  int batch_size = 16;
  double lr = 3e-4;
  double tau = 0.1;
  bool literal_loss = false;  // raw inner products, no temperature
  int eval_every = 50;
  int checkpoint_every = 50;
  double train_frac = 0.8;
  double val_frac = 0.1;
  void validate() const;
};

// Batch composition for one step, a pure function of (seed, step): windows
// are drawn in order from a per-epoch permutation of the train split.
std::vector<std::size_t> batch_indices(const SplitIndices& split, int batch_size,
                                       std::uint64_t seed, std::int64_t step);

struct TrainState {
  std::int64_t step = 0;
  double best_val_top1 = -1.0;
};

struct StepResult {
  double loss = 0.0;
};

// One optimization step over the given batch (forward, backward, update).
StepResult train_step(Model& model, Adam& opt, const WindowDataset& data,
                      const std::vector<std::size_t>& batch, const TrainConfig& cfg,
                      std::uint64_t seed, std::int64_t step);

struct ValMetrics {
  double top1 = 0.0;
  double top5 = 0.0;
};

// Retrieval accuracy over a held-out split: each window's output is scored
// against every candidate audio clip in the split by normalized inner product.
ValMetrics validate_retrieval(Model& model, const WindowDataset& data,
                              const std::vector<std::size_t>& indices);

struct TrainResult {
  std::int64_t steps_done = 0;
  double final_loss = 0.0;
  double best_val_top1 = 0.0;
};

// Runs (or resumes) the training loop. Writes metrics.jsonl plus `latest`
// and `best` checkpoints under run_dir; resumes from `latest` when present.
TrainResult train_loop(Model& model, const WindowDataset& data, const TrainConfig& cfg,
                       const std::string& run_dir, std::uint64_t seed);

}  // namespace nd
