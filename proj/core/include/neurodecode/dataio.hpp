#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "neurodecode/tensor.hpp"

namespace nd {

enum class ChannelKind { EEG, VEOG, AUD };
ChannelKind channel_kind_from_name(const std::string& name);

struct SensorLayout {
  std::vector<std::array<double, 2>> positions;  // normalized to [0,1]^2
  std::size_t size() const { return positions.size(); }
};

struct EegRecording {
  std::string subject_id;
  double sample_rate_hz = 0.0;
  std::vector<std::string> channel_names;
  std::vector<ChannelKind> channel_kinds;
  Tensor data;  // [C x T]
  SensorLayout layout;
};

struct AlignmentEntry {
  std::string word;
  double onset_s = 0.0;
  double offset_s = 0.0;
  int segment_index = 0;
};

struct WordAlignment {
  std::vector<AlignmentEntry> entries;
};

struct AudioTrack {
  double sample_rate_hz = 0.0;
  Tensor samples;  // [S]
  int segment_index = 0;
};

// ---- BrainVision subset (.vhdr + .eeg) ----
struct VhdrHeader {
  std::string data_file;
  std::int64_t n_channels = 0;
  double sampling_interval_us = 0.0;
  double sample_rate_hz = 0.0;  // 1e6 / sampling interval
  std::vector<std::string> channel_names;
};

// INI-style header with [Common Infos] and [Channel Infos] sections;
// only IEEE_FLOAT_32 / MULTIPLEXED payloads are accepted.
VhdrHeader parse_header(const std::string& text);
std::string write_header(const VhdrHeader& h);

// Little-endian float32, sample-major interleave, widened to float64.
Tensor read_binary(const std::vector<std::uint8_t>& bytes, const VhdrHeader& h);
std::vector<std::uint8_t> write_binary(const Tensor& data);

// ---- sidecar text formats ----
// CSV `word,onset_s,offset_s,segment` with a header row.
WordAlignment load_alignment(const std::string& csv);
std::string write_alignment(const WordAlignment& a);

// CSV `channel,x,y`; entries are matched to channel_names by name.
SensorLayout load_layout(const std::string& csv, const std::vector<std::string>& channel_names);
std::string write_layout(const SensorLayout& layout, const std::vector<std::string>& channel_names);

// ---- wav (PCM16 mono only) ----
AudioTrack load_wav(const std::vector<std::uint8_t>& bytes, int segment_index);

// ---- synthetic dataset ----
struct SyntheticConfig {
  int n_subjects = 3;
  int eeg_channels = 16;        // mixed from the latents (C >= 4)
  int audio_features = 8;       // F >= 2
  int latents = 4;
  double duration_s = 30.0;
  double snr_db = 1e9;          // >= ~300 means noise-free
  double eeg_rate_hz = 500.0;
  double feature_rate_hz = 100.0;
  double word_s = 0.3;          // synthetic tokens tiled over time
  int vocab_size = 40;
  bool artifact_channels = true;  // append pure-noise VEOG and AUD channels
};

struct SyntheticDataset {
  std::vector<EegRecording> recordings;
  Tensor audio_features;  // [F x T_feat] at feature_rate_hz, shared timeline
  double feature_rate_hz = 0.0;
  WordAlignment alignment;
  std::vector<Tensor> subject_mixing;  // per-subject M, [C x K]
  Tensor audio_mixing;                 // A, [F x K]
};

// Latent smooth sources drive both sides: Y = A s + eps_a, X = M_subject s
// + eps_x. Same seed yields an identical dataset.
SyntheticDataset generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed);

// ---- linear decoding oracle ----
// Ridge-regularized least squares W minimizing ||W X - Y||^2 over paired
// [C x T]/[F x T] examples; used to certify a dataset is solvable.
Tensor fit_linear_map(const std::vector<Tensor>& xs, const std::vector<Tensor>& ys);

// ---- small file helpers ----
std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes);
std::string read_file_text(const std::string& path);
void write_file_text(const std::string& path, const std::string& text);
std::vector<double> read_doubles_file(const std::string& path);
void write_doubles_file(const std::string& path, const std::vector<double>& v);
std::uint64_t fnv1a64(const std::vector<std::uint8_t>& bytes);
std::uint64_t fnv1a64_doubles(const std::vector<double>& v);

}  // namespace nd
