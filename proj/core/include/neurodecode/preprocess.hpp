#pragma once

#include <string>
#include <vector>

#include "neurodecode/dataio.hpp"
#include "neurodecode/tensor.hpp"

namespace nd {

struct MelParams {
  int n_fft = 400;
  int hop = 160;
  int n_mels = 40;
  double fmin = 0.0;
  double fmax = 8000.0;
};

struct PreprocessConfig {
  double clip_lo_pct = 5.0;
  double clip_hi_pct = 95.0;
  double clamp_sigma = 20.0;  // ablation value: 100
  double window_s = 3.0;
  double stride_s = 0.0;  // 0 means non-overlapping (stride == window)
  double baseline_s = 0.5;
  bool include_non_eeg = false;
  double feature_rate_hz = 100.0;
  MelParams mel;
  void validate() const;
};

struct WindowPair {
  std::string subject_id;
  Tensor eeg;    // [C x T_w]
  Tensor audio;  // [F x T_w]
  std::vector<std::string> words;
  int window_index = 0;
};

// ---- per-channel stages (each returns a new tensor) ----
Tensor baseline_correct(const Tensor& x, std::int64_t baseline_samples);

struct RobustScaleResult {
  Tensor data;
  std::vector<bool> degenerate;  // zero-IQR channels, divided by 1 and flagged
};
RobustScaleResult robust_scale(const Tensor& x);

Tensor percentile_clip(const Tensor& x, double lo_pct, double hi_pct);
Tensor clamp_std(const Tensor& x, double k);
Tensor standardize(const Tensor& x);

// Linear-interpolation percentile of unsorted values (numpy convention).
double percentile_interpolated(std::vector<double> values, double pct);

// Antialias by a centered moving average, then take every `factor`-th sample.
Tensor decimate_moving_average(const Tensor& x, int factor, int order = 8);

// Magnitude STFT (Hann) -> triangular HTK-mel filterbank -> log1p ->
// mean-pool to target_rate_hz; optionally standardized per mel bin.
Tensor mel_features(const Tensor& audio, double sample_rate_hz, const MelParams& mel,
                    double target_rate_hz, bool standardize_bins = true);

// ---- full chain ----
struct PreprocessedRecording {
  Tensor features;  // [C x T] at cfg.feature_rate_hz
  std::vector<std::string> channel_names;
  std::vector<bool> degenerate;
  std::vector<std::string> provenance;  // stage log, in application order
};
PreprocessedRecording preprocess_eeg(const EegRecording& rec, const PreprocessConfig& cfg);

// Aligned non-overlapping window pairs; a word belongs to the window that
// contains its temporal midpoint; the trailing partial window is dropped.
std::vector<WindowPair> make_windows(const std::string& subject_id, const Tensor& eeg_features,
                                     const Tensor& audio_features, const WordAlignment& alignment,
                                     const PreprocessConfig& cfg);

// ---- window-pair archive (JSON manifest + float64 LE blobs) ----
struct WindowDataset {
  std::vector<WindowPair> windows;
  double feature_rate_hz = 0.0;
  std::vector<std::string> subjects;
  std::vector<std::string> provenance;
  PreprocessConfig config;
};

void save_window_dataset(const WindowDataset& ds, const std::string& dir);
WindowDataset load_window_dataset(const std::string& dir);

}  // namespace nd
