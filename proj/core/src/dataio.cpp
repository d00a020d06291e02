#include "neurodecode/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "neurodecode/errors.hpp"

namespace nd {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::string& context) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("non-numeric value '" + s + "' in " + context);
  }
}

}  // namespace

ChannelKind channel_kind_from_name(const std::string& name) {
  if (name == "VEOG") return ChannelKind::VEOG;
  if (name == "AUD") return ChannelKind::AUD;
  return ChannelKind::EEG;
}

VhdrHeader parse_header(const std::string& text) {
  VhdrHeader h;
  std::map<std::string, std::string> common;
  std::map<int, std::string> channels;
  std::string section;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == ';') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = line.substr(1, line.size() - 2);
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) continue;  // banner / free text lines
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (section == "Common Infos") {
      common[key] = val;
    } else if (section == "Channel Infos") {
      if (key.size() < 3 || key.substr(0, 2) != "Ch")
        throw DataError("vhdr line " + std::to_string(lineno) + ": bad channel key '" + key + "'");
      int idx = 0;
      try {
        idx = std::stoi(key.substr(2));
      } catch (const std::exception&) {
        throw DataError("vhdr line " + std::to_string(lineno) + ": bad channel key '" + key + "'");
      }
      if (channels.count(idx))
        throw DataError("vhdr line " + std::to_string(lineno) + ": duplicate channel index Ch" +
                        std::to_string(idx));
      channels[idx] = split(val, ',')[0];
    }
  }

  auto require = [&](const char* key) -> const std::string& {
    auto it = common.find(key);
    if (it == common.end())
      throw DataError(std::string("vhdr: missing required key '") + key + "' in [Common Infos]");
    return it->second;
  };
  h.data_file = require("DataFile");
  h.n_channels = static_cast<std::int64_t>(parse_double(require("NumberOfChannels"), "NumberOfChannels"));
  h.sampling_interval_us = parse_double(require("SamplingInterval"), "SamplingInterval");
  if (h.sampling_interval_us <= 0) throw DataError("vhdr: SamplingInterval must be positive");
  h.sample_rate_hz = 1e6 / h.sampling_interval_us;
  const std::string& fmt = require("BinaryFormat");
  if (fmt != "IEEE_FLOAT_32")
    throw DataError("vhdr: unsupported BinaryFormat '" + fmt + "' (only IEEE_FLOAT_32)");
  const std::string& orient = require("Orientation");
  if (orient != "MULTIPLEXED")
    throw DataError("vhdr: unsupported Orientation '" + orient + "' (only MULTIPLEXED)");

  if (static_cast<std::int64_t>(channels.size()) != h.n_channels)
    throw DataError("vhdr: NumberOfChannels=" + std::to_string(h.n_channels) + " but " +
                    std::to_string(channels.size()) + " channel entries");
  h.channel_names.resize(channels.size());
  for (auto& [idx, name] : channels) {
    if (idx < 1 || idx > h.n_channels)
      throw DataError("vhdr: channel index Ch" + std::to_string(idx) + " out of range");
    h.channel_names[static_cast<std::size_t>(idx - 1)] = name;
  }
  return h;
}

std::string write_header(const VhdrHeader& h) {
  std::ostringstream os;
  os << "Brain Vision Data Exchange Header File Version 1.0\n";
  os << "; generated file\n\n";
  os << "[Common Infos]\n";
  os << "DataFile=" << h.data_file << "\n";
  os << "NumberOfChannels=" << h.n_channels << "\n";
  os << "SamplingInterval=" << h.sampling_interval_us << "\n";
  os << "BinaryFormat=IEEE_FLOAT_32\n";
  os << "Orientation=MULTIPLEXED\n\n";
  os << "[Channel Infos]\n";
  for (std::size_t i = 0; i < h.channel_names.size(); ++i)
    os << "Ch" << (i + 1) << "=" << h.channel_names[i] << ",,1,uV\n";
  return os.str();
}

Tensor read_binary(const std::vector<std::uint8_t>& bytes, const VhdrHeader& h) {
  std::int64_t C = h.n_channels;
  if (C <= 0) throw DataError("read_binary: header has no channels");
  if (bytes.size() % (4 * static_cast<std::size_t>(C)) != 0)
    throw DataError("read_binary: truncated file, " + std::to_string(bytes.size()) +
                    " bytes not divisible by 4*C=" + std::to_string(4 * C));
  std::int64_t T = static_cast<std::int64_t>(bytes.size()) / (4 * C);
  if (T == 0) throw DataError("read_binary: empty payload (T must be > 0)");
  Tensor out({C, T}, 0.0);
  for (std::int64_t t = 0; t < T; ++t)
    for (std::int64_t c = 0; c < C; ++c) {
      float v;
      std::memcpy(&v, bytes.data() + 4 * (t * C + c), 4);
      out.at2(c, t) = static_cast<double>(v);
    }
  return out;
}

std::vector<std::uint8_t> write_binary(const Tensor& data) {
  std::int64_t C = data.dim(0), T = data.dim(1);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(4 * C * T));
  for (std::int64_t t = 0; t < T; ++t)
    for (std::int64_t c = 0; c < C; ++c) {
      float v = static_cast<float>(data.at2(c, t));
      std::memcpy(bytes.data() + 4 * (t * C + c), &v, 4);
    }
  return bytes;
}

WordAlignment load_alignment(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line))
    throw DataError("alignment: missing header row");
  if (trim(line) != "word,onset_s,offset_s,segment")
    throw DataError("alignment: unexpected header '" + trim(line) + "'");
  WordAlignment a;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    auto cols = split(trim(line), ',');
    if (cols.size() != 4)
      throw DataError("alignment row " + std::to_string(row) + ": expected 4 columns");
    AlignmentEntry e;
    e.word = trim(cols[0]);
    e.onset_s = parse_double(trim(cols[1]), "alignment row " + std::to_string(row));
    e.offset_s = parse_double(trim(cols[2]), "alignment row " + std::to_string(row));
    e.segment_index = static_cast<int>(parse_double(trim(cols[3]), "alignment row " + std::to_string(row)));
    if (e.onset_s < 0 || e.offset_s <= e.onset_s)
      throw DataError("alignment row " + std::to_string(row) + ": offset must exceed onset (" +
                      cols[1] + " >= " + cols[2] + ")");
    if (e.segment_index < 0)
      throw DataError("alignment row " + std::to_string(row) + ": negative segment index");
    a.entries.push_back(std::move(e));
  }
  return a;
}

std::string write_alignment(const WordAlignment& a) {
  std::ostringstream os;
  os << "word,onset_s,offset_s,segment\n";
  os.precision(17);
  for (const auto& e : a.entries)
    os << e.word << "," << e.onset_s << "," << e.offset_s << "," << e.segment_index << "\n";
  return os.str();
}

SensorLayout load_layout(const std::string& csv, const std::vector<std::string>& channel_names) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "channel,x,y")
    throw DataError("layout: expected header 'channel,x,y'");
  std::map<std::string, std::array<double, 2>> pos;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    auto cols = split(trim(line), ',');
    if (cols.size() != 3) throw DataError("layout row " + std::to_string(row) + ": expected 3 columns");
    double x = parse_double(trim(cols[1]), "layout row " + std::to_string(row));
    double y = parse_double(trim(cols[2]), "layout row " + std::to_string(row));
    if (x < 0 || x > 1 || y < 0 || y > 1)
      throw DataError("layout row " + std::to_string(row) + ": coordinates must lie in [0,1]");
    pos[trim(cols[0])] = {x, y};
  }
  SensorLayout layout;
  for (const auto& name : channel_names) {
    auto it = pos.find(name);
    if (it == pos.end()) throw DataError("layout: no position for channel '" + name + "'");
    layout.positions.push_back(it->second);
  }
  return layout;
}

std::string write_layout(const SensorLayout& layout, const std::vector<std::string>& channel_names) {
  std::ostringstream os;
  os << "channel,x,y\n";
  os.precision(17);
  for (std::size_t i = 0; i < channel_names.size(); ++i)
    os << channel_names[i] << "," << layout.positions[i][0] << "," << layout.positions[i][1] << "\n";
  return os.str();
}

AudioTrack load_wav(const std::vector<std::uint8_t>& bytes, int segment_index) {
  auto u16 = [&](std::size_t off) {
    return static_cast<std::uint32_t>(bytes[off]) | (static_cast<std::uint32_t>(bytes[off + 1]) << 8);
  };
  auto u32 = [&](std::size_t off) {
    return u16(off) | (u16(off + 2) << 16);
  };
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw DataError("wav: not a RIFF/WAVE file");
  double rate = 0.0;
  std::size_t off = 12;
  std::vector<double> samples;
  while (off + 8 <= bytes.size()) {
    std::string id(reinterpret_cast<const char*>(bytes.data() + off), 4);
    std::uint32_t len = u32(off + 4);
    std::size_t body = off + 8;
    if (id == "fmt ") {
      if (u16(body) != 1 || u16(body + 2) != 1 || u16(body + 14) != 16)
        throw DataError("wav: only PCM16 mono is supported");
      rate = double(u32(body + 4));
    } else if (id == "data") {
      if (rate == 0.0) throw DataError("wav: data chunk before fmt chunk");
      std::size_t n = len / 2;
      samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        std::int16_t v;
        std::memcpy(&v, bytes.data() + body + 2 * i, 2);
        samples[i] = double(v) / 32768.0;
      }
    }
    off = body + len + (len & 1);
  }
  if (samples.empty()) throw DataError("wav: no data chunk");
  AudioTrack t;
  t.sample_rate_hz = rate;
  std::int64_t n = static_cast<std::int64_t>(samples.size());
  t.samples = Tensor({n}, std::move(samples));
  t.segment_index = segment_index;
  return t;
}

namespace {

// Smooth latent source: a fixed sum of sinusoids, evaluable at any time.
struct LatentSource {
  std::vector<double> amp, freq, phase;
  double eval(double t) const {
    double v = 0.0;
    for (std::size_t j = 0; j < amp.size(); ++j)
      v += amp[j] * std::sin(6.283185307179586477 * freq[j] * t + phase[j]);
    return v;
  }
};

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed) {
  if (cfg.eeg_channels < 4) throw ConfigError("generate_synthetic: eeg_channels must be >= 4");
  if (cfg.audio_features < 2) throw ConfigError("generate_synthetic: audio_features must be >= 2");
  if (cfg.n_subjects < 1 || cfg.latents < 1 || cfg.duration_s <= 0)
    throw ConfigError("generate_synthetic: invalid parameters");

  const int K = cfg.latents;
  Rng src_rng(seed, 1);
  std::vector<LatentSource> sources(static_cast<std::size_t>(K));
  const int J = 6;
  for (auto& s : sources)
    for (int j = 0; j < J; ++j) {
      s.amp.push_back(src_rng.uniform(0.4, 1.0) / std::sqrt(double(J)));
      s.freq.push_back(src_rng.uniform(0.3, 6.0));
      s.phase.push_back(src_rng.uniform(0.0, 6.283185307179586477));
    }

  SyntheticDataset ds;
  ds.feature_rate_hz = cfg.feature_rate_hz;

  // Audio features: Y = A s + eps_a on the feature-rate timeline.
  Rng mix_rng(seed, 2);
  ds.audio_mixing = Tensor::randn({cfg.audio_features, K}, mix_rng);
  std::int64_t Tf = static_cast<std::int64_t>(std::llround(cfg.duration_s * cfg.feature_rate_hz));
  Tensor s_feat({K, Tf}, 0.0);
  for (int k = 0; k < K; ++k)
    for (std::int64_t t = 0; t < Tf; ++t)
      s_feat.at2(k, t) = sources[static_cast<std::size_t>(k)].eval(double(t) / cfg.feature_rate_hz);

  double noise_scale = std::pow(10.0, -cfg.snr_db / 20.0);
  bool noise_free = cfg.snr_db >= 300.0;

  ds.audio_features = Tensor({cfg.audio_features, Tf}, 0.0);
  {
    Rng n_rng(seed, 3);
    for (std::int64_t f = 0; f < cfg.audio_features; ++f)
      for (std::int64_t t = 0; t < Tf; ++t) {
        double v = 0.0;
        for (int k = 0; k < K; ++k) v += ds.audio_mixing.at2(f, k) * s_feat.at2(k, t);
        if (!noise_free) v += noise_scale * n_rng.normal();
        ds.audio_features.at2(f, t) = v;
      }
  }

  // Shared random sensor layout in [0,1]^2.
  int C_total = cfg.eeg_channels + (cfg.artifact_channels ? 2 : 0);
  Rng layout_rng(seed, 4);
  SensorLayout layout;
  for (int c = 0; c < C_total; ++c)
    layout.positions.push_back({layout_rng.uniform(), layout_rng.uniform()});

  std::vector<std::string> names;
  std::vector<ChannelKind> kinds;
  for (int c = 0; c < cfg.eeg_channels; ++c) {
    std::ostringstream os;
    os << "E" << (c < 9 ? "0" : "") << (c + 1);
    names.push_back(os.str());
    kinds.push_back(ChannelKind::EEG);
  }
  if (cfg.artifact_channels) {
    names.push_back("VEOG");
    kinds.push_back(ChannelKind::VEOG);
    names.push_back("AUD");
    kinds.push_back(ChannelKind::AUD);
  }

  std::int64_t Te = static_cast<std::int64_t>(std::llround(cfg.duration_s * cfg.eeg_rate_hz));
  for (int subj = 0; subj < cfg.n_subjects; ++subj) {
    Rng m_rng(seed, 10 + static_cast<std::uint64_t>(subj));
    Tensor M = Tensor::randn({cfg.eeg_channels, K}, m_rng);
    ds.subject_mixing.push_back(M);
    Rng n_rng(seed, 100 + static_cast<std::uint64_t>(subj));

    EegRecording rec;
    std::ostringstream sid;
    sid << "S" << (subj < 9 ? "0" : "") << (subj + 1);
    rec.subject_id = sid.str();
    rec.sample_rate_hz = cfg.eeg_rate_hz;
    rec.channel_names = names;
    rec.channel_kinds = kinds;
    rec.layout = layout;
    rec.data = Tensor({C_total, Te}, 0.0);
    for (std::int64_t t = 0; t < Te; ++t) {
      double ts = double(t) / cfg.eeg_rate_hz;
      for (int c = 0; c < cfg.eeg_channels; ++c) {
        double v = 0.0;
        for (int k = 0; k < K; ++k) v += M.at2(c, k) * sources[static_cast<std::size_t>(k)].eval(ts);
        if (!noise_free) v += noise_scale * n_rng.normal();
        rec.data.at2(c, t) = v;
      }
      for (int c = cfg.eeg_channels; c < C_total; ++c) rec.data.at2(c, t) = n_rng.normal();
    }
    ds.recordings.push_back(std::move(rec));
  }

  // Synthetic tokens tiled over time.
  Rng w_rng(seed, 5);
  int n_words = static_cast<int>(cfg.duration_s / cfg.word_s);
  for (int i = 0; i < n_words; ++i) {
    AlignmentEntry e;
    std::ostringstream os;
    os << "tok" << w_rng.below(static_cast<std::uint64_t>(cfg.vocab_size));
    e.word = os.str();
    e.onset_s = i * cfg.word_s;
    e.offset_s = (i + 1) * cfg.word_s;
    e.segment_index = 0;
    ds.alignment.entries.push_back(std::move(e));
  }
  return ds;
}

Tensor fit_linear_map(const std::vector<Tensor>& xs, const std::vector<Tensor>& ys) {
  if (xs.empty() || xs.size() != ys.size())
    throw ConfigError("fit_linear_map: need matching nonempty example lists");
  std::int64_t C = xs[0].dim(0);
  std::int64_t F = ys[0].dim(0);
  // Normal equations: G = sum x x^T, B = sum y x^T.
  std::vector<double> G(static_cast<std::size_t>(C * C), 0.0);
  std::vector<double> Bm(static_cast<std::size_t>(F * C), 0.0);
  for (std::size_t n = 0; n < xs.size(); ++n) {
    const Tensor& X = xs[n];
    const Tensor& Y = ys[n];
    if (X.dim(0) != C || Y.dim(0) != F || X.dim(1) != Y.dim(1))
      throw ConfigError("fit_linear_map: inconsistent example shapes");
    std::int64_t T = X.dim(1);
    for (std::int64_t t = 0; t < T; ++t) {
      for (std::int64_t i = 0; i < C; ++i) {
        double xi = X.at2(i, t);
        for (std::int64_t j = 0; j <= i; ++j)
          G[static_cast<std::size_t>(i * C + j)] += xi * X.at2(j, t);
        for (std::int64_t f = 0; f < F; ++f)
          Bm[static_cast<std::size_t>(f * C + i)] += Y.at2(f, t) * xi;
      }
    }
  }
  for (std::int64_t i = 0; i < C; ++i)
    for (std::int64_t j = i + 1; j < C; ++j)
      G[static_cast<std::size_t>(i * C + j)] = G[static_cast<std::size_t>(j * C + i)];

  double trace = 0.0;
  for (std::int64_t i = 0; i < C; ++i) trace += G[static_cast<std::size_t>(i * C + i)];
  double jitter = std::max(trace / double(C), 1.0) * 1e-12;

  // Cholesky with escalating jitter for rank-deficient designs.
  std::vector<double> L;
  for (int attempt = 0; attempt < 10; ++attempt, jitter *= 100.0) {
    L.assign(G.begin(), G.end());
    for (std::int64_t i = 0; i < C; ++i) L[static_cast<std::size_t>(i * C + i)] += jitter;
    bool ok = true;
    for (std::int64_t i = 0; i < C && ok; ++i) {
      for (std::int64_t j = 0; j <= i; ++j) {
        double s = L[static_cast<std::size_t>(i * C + j)];
        for (std::int64_t k = 0; k < j; ++k)
          s -= L[static_cast<std::size_t>(i * C + k)] * L[static_cast<std::size_t>(j * C + k)];
        if (i == j) {
          if (s <= 0) {
            ok = false;
            break;
          }
          L[static_cast<std::size_t>(i * C + i)] = std::sqrt(s);
        } else {
          L[static_cast<std::size_t>(i * C + j)] = s / L[static_cast<std::size_t>(j * C + j)];
        }
      }
    }
    if (ok) break;
    if (attempt == 9) throw NumericalError("fit_linear_map: Cholesky failed");
  }

  Tensor W({F, C}, 0.0);
  std::vector<double> y(static_cast<std::size_t>(C)), z(static_cast<std::size_t>(C));
  for (std::int64_t f = 0; f < F; ++f) {
    // solve G w = b  via  L z = b,  L^T w = z
    for (std::int64_t i = 0; i < C; ++i) {
      double s = Bm[static_cast<std::size_t>(f * C + i)];
      for (std::int64_t k = 0; k < i; ++k) s -= L[static_cast<std::size_t>(i * C + k)] * z[static_cast<std::size_t>(k)];
      z[static_cast<std::size_t>(i)] = s / L[static_cast<std::size_t>(i * C + i)];
    }
    for (std::int64_t i = C - 1; i >= 0; --i) {
      double s = z[static_cast<std::size_t>(i)];
      for (std::int64_t k = i + 1; k < C; ++k) s -= L[static_cast<std::size_t>(k * C + i)] * y[static_cast<std::size_t>(k)];
      y[static_cast<std::size_t>(i)] = s / L[static_cast<std::size_t>(i * C + i)];
    }
    for (std::int64_t c = 0; c < C; ++c) W.at2(f, c) = y[static_cast<std::size_t>(c)];
  }
  return W;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write file: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

std::string read_file_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write file: " + path);
  out << text;
}

std::vector<double> read_doubles_file(const std::string& path) {
  auto bytes = read_file_bytes(path);
  if (bytes.size() % 8 != 0) throw DataError("truncated float64 blob: " + path);
  std::vector<double> v(bytes.size() / 8);
  std::memcpy(v.data(), bytes.data(), bytes.size());
  return v;
}

void write_doubles_file(const std::string& path, const std::vector<double>& v) {
  std::vector<std::uint8_t> bytes(v.size() * 8);
  std::memcpy(bytes.data(), v.data(), bytes.size());
  write_file_bytes(path, bytes);
}

std::uint64_t fnv1a64(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64_doubles(const std::vector<double>& v) {
  std::vector<std::uint8_t> bytes(v.size() * 8);
  std::memcpy(bytes.data(), v.data(), bytes.size());
  return fnv1a64(bytes);
}

}  // namespace nd
