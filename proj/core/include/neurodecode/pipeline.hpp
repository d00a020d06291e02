#pragma once

#include <cstdint>
#include <string>

#include "neurodecode/config.hpp"

namespace nd {

struct RunOptions {
  std::string run_dir = "run";
  std::uint64_t seed = 0;
  bool force = false;
};

// Raw recordings (vhdr/eeg pairs, layout.csv, alignment.csv, audio
// features) under <run_dir>/raw.
void run_synth(const AppConfig& cfg, const RunOptions& opts);

// Raw recordings -> aligned window pairs under <run_dir>/windows.
void run_preprocess(const AppConfig& cfg, const RunOptions& opts);

// Window pairs -> metrics.jsonl plus latest/best checkpoints under
// <run_dir>/train. Resumes from latest unless --force clears the run.
void run_train(const AppConfig& cfg, const RunOptions& opts);

// Test-split retrieval report at <run_dir>/report.json.
void run_eval(const AppConfig& cfg, const RunOptions& opts);

struct GradcheckReport {
  double max_op_err = 0.0;
  double max_model_err = 0.0;
  std::int64_t checked = 0;
};

// Finite-difference audit of the operator set and a tiny end-to-end model;
// throws NumericalError when a gradient disagrees.
GradcheckReport run_gradcheck(const RunOptions& opts, int n_seeds = 20);

}  // namespace nd
