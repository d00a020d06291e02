#include "neurodecode/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "json.hpp"
#include "neurodecode/errors.hpp"

namespace nd {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

void PreprocessConfig::validate() const {
  if (!(0.0 <= clip_lo_pct && clip_lo_pct < clip_hi_pct && clip_hi_pct <= 100.0))
    throw ConfigError("preprocess: require 0 <= clip_lo_pct < clip_hi_pct <= 100");
  if (clamp_sigma <= 0) throw ConfigError("preprocess: clamp_sigma must be positive");
  if (window_s <= 0) throw ConfigError("preprocess: window_s must be positive");
  if (feature_rate_hz <= 0) throw ConfigError("preprocess: feature_rate_hz must be positive");
}

Tensor baseline_correct(const Tensor& x, std::int64_t baseline_samples) {
  std::int64_t C = x.dim(0), T = x.dim(1);
  if (baseline_samples < 1 || baseline_samples > T)
    throw ConfigError("baseline_correct: baseline_samples " + std::to_string(baseline_samples) +
                      " out of [1, " + std::to_string(T) + "]");
  Tensor y({C, T}, 0.0);
  for (std::int64_t c = 0; c < C; ++c) {
    double mu = 0.0;
    for (std::int64_t t = 0; t < baseline_samples; ++t) mu += x.at2(c, t);
    mu /= double(baseline_samples);
    for (std::int64_t t = 0; t < T; ++t) y.at2(c, t) = x.at2(c, t) - mu;
  }
  return y;
}

double percentile_interpolated(std::vector<double> values, double pct) {
  if (values.empty()) throw ConfigError("percentile of empty range");
  std::sort(values.begin(), values.end());
  double h = (double(values.size()) - 1.0) * pct / 100.0;
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - double(lo)) * (values[lo + 1] - values[lo]);
}

RobustScaleResult robust_scale(const Tensor& x) {
  std::int64_t C = x.dim(0), T = x.dim(1);
  if (T < 4) throw ConfigError("robust_scale: T must be >= 4");
  RobustScaleResult res;
  res.data = Tensor({C, T}, 0.0);
  res.degenerate.assign(static_cast<std::size_t>(C), false);
  for (std::int64_t c = 0; c < C; ++c) {
    std::vector<double> row(x.data().begin() + c * T, x.data().begin() + (c + 1) * T);
    double med = percentile_interpolated(row, 50.0);
    double iqr = percentile_interpolated(row, 75.0) - percentile_interpolated(row, 25.0);
    double denom = iqr;
    if (iqr < 1e-12) {
      denom = 1.0;
      res.degenerate[static_cast<std::size_t>(c)] = true;
    }
    for (std::int64_t t = 0; t < T; ++t) res.data.at2(c, t) = (x.at2(c, t) - med) / denom;
  }
  return res;
}

Tensor percentile_clip(const Tensor& x, double lo_pct, double hi_pct) {
  if (!(0.0 <= lo_pct && lo_pct < hi_pct && hi_pct <= 100.0))
    throw ConfigError("percentile_clip: invalid bounds");
  std::int64_t C = x.dim(0), T = x.dim(1);
  Tensor y({C, T}, 0.0);
  for (std::int64_t c = 0; c < C; ++c) {
    std::vector<double> row(x.data().begin() + c * T, x.data().begin() + (c + 1) * T);
    double lo = percentile_interpolated(row, lo_pct);
    double hi = percentile_interpolated(row, hi_pct);
    for (std::int64_t t = 0; t < T; ++t) y.at2(c, t) = std::clamp(x.at2(c, t), lo, hi);
  }
  return y;
}

Tensor clamp_std(const Tensor& x, double k) {
  if (k <= 0) throw ConfigError("clamp_std: k must be positive");
  std::int64_t C = x.dim(0), T = x.dim(1);
  Tensor y({C, T}, 0.0);
  for (std::int64_t c = 0; c < C; ++c) {
    double mu = 0.0;
    for (std::int64_t t = 0; t < T; ++t) mu += x.at2(c, t);
    mu /= double(T);
    double var = 0.0;
    for (std::int64_t t = 0; t < T; ++t) {
      double d = x.at2(c, t) - mu;
      var += d * d;
    }
    var /= double(T);
    double sigma = std::sqrt(var);
    double lo = mu - k * sigma, hi = mu + k * sigma;
    for (std::int64_t t = 0; t < T; ++t) y.at2(c, t) = std::clamp(x.at2(c, t), lo, hi);
  }
  return y;
}

Tensor standardize(const Tensor& x) {
  std::int64_t C = x.dim(0), T = x.dim(1);
  if (T < 2) throw ConfigError("standardize: T must be >= 2");
  Tensor y({C, T}, 0.0);
  for (std::int64_t c = 0; c < C; ++c) {
    double mu = 0.0;
    for (std::int64_t t = 0; t < T; ++t) mu += x.at2(c, t);
    mu /= double(T);
    double var = 0.0;
    for (std::int64_t t = 0; t < T; ++t) {
      double d = x.at2(c, t) - mu;
      var += d * d;
    }
    var /= double(T);
    double denom = std::sqrt(var + 1e-12);
    for (std::int64_t t = 0; t < T; ++t) y.at2(c, t) = (x.at2(c, t) - mu) / denom;
  }
  return y;
}

Tensor decimate_moving_average(const Tensor& x, int factor, int order) {
  if (factor < 1 || order < 1) throw ConfigError("decimate: factor and order must be >= 1");
  std::int64_t C = x.dim(0), T = x.dim(1);
  std::int64_t To = T / factor;
  if (To == 0) throw DataError("decimate: recording shorter than one output sample");
  Tensor y({C, To}, 0.0);
  std::int64_t half = order / 2;
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t t = 0; t < To; ++t) {
      double acc = 0.0;
      for (std::int64_t j = 0; j < order; ++j) {
        std::int64_t s = std::clamp<std::int64_t>(t * factor + j - half, 0, T - 1);
        acc += x.at2(c, s);
      }
      y.at2(c, t) = acc / double(order);
    }
  return y;
}

namespace {

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

}  // namespace

Tensor mel_features(const Tensor& audio, double sample_rate_hz, const MelParams& mel,
                    double target_rate_hz, bool standardize_bins) {
  std::int64_t S = audio.size();
  if (S < mel.n_fft)
    throw DataError("mel_features: signal of " + std::to_string(S) +
                    " samples is shorter than n_fft=" + std::to_string(mel.n_fft));
  double native_rate = sample_rate_hz / double(mel.hop);
  double ratio = native_rate / target_rate_hz;
  int pool = static_cast<int>(std::llround(ratio));
  if (pool < 1 || std::fabs(ratio - double(pool)) > 1e-6)
    throw ConfigError("mel_features: native frame rate " + std::to_string(native_rate) +
                      " is not an integer multiple of target rate");

  std::int64_t n_fft = mel.n_fft;
  std::int64_t n_bins = n_fft / 2 + 1;
  std::int64_t frames = (S - n_fft) / mel.hop + 1;

  std::vector<double> hann(static_cast<std::size_t>(n_fft));
  for (std::int64_t n = 0; n < n_fft; ++n)
    hann[static_cast<std::size_t>(n)] =
        0.5 * (1.0 - std::cos(6.283185307179586477 * double(n) / double(n_fft)));

  // DFT basis tables for bins 0..n_fft/2
  std::vector<double> cos_t(static_cast<std::size_t>(n_bins * n_fft));
  std::vector<double> sin_t(static_cast<std::size_t>(n_bins * n_fft));
  for (std::int64_t b = 0; b < n_bins; ++b)
    for (std::int64_t n = 0; n < n_fft; ++n) {
      double ang = 6.283185307179586477 * double(b) * double(n) / double(n_fft);
      cos_t[static_cast<std::size_t>(b * n_fft + n)] = std::cos(ang);
      sin_t[static_cast<std::size_t>(b * n_fft + n)] = std::sin(ang);
    }

  // Triangular mel filterbank (HTK scale).
  double mel_lo = hz_to_mel(mel.fmin);
  double mel_hi = hz_to_mel(std::min(mel.fmax, sample_rate_hz / 2.0));
  std::vector<double> centers_hz(static_cast<std::size_t>(mel.n_mels + 2));
  for (int i = 0; i < mel.n_mels + 2; ++i)
    centers_hz[static_cast<std::size_t>(i)] =
        mel_to_hz(mel_lo + (mel_hi - mel_lo) * double(i) / double(mel.n_mels + 1));
  std::vector<double> fbank(static_cast<std::size_t>(mel.n_mels * n_bins), 0.0);
  for (int m = 0; m < mel.n_mels; ++m) {
    double fl = centers_hz[static_cast<std::size_t>(m)];
    double fc = centers_hz[static_cast<std::size_t>(m + 1)];
    double fr = centers_hz[static_cast<std::size_t>(m + 2)];
    for (std::int64_t b = 0; b < n_bins; ++b) {
      double f = double(b) * sample_rate_hz / double(n_fft);
      double w = 0.0;
      if (f > fl && f < fc) w = (f - fl) / (fc - fl);
      else if (f >= fc && f < fr) w = (fr - f) / (fr - fc);
      fbank[static_cast<std::size_t>(m * n_bins + b)] = w;
    }
  }

  Tensor logmel({mel.n_mels, frames}, 0.0);
  std::vector<double> windowed(static_cast<std::size_t>(n_fft));
  std::vector<double> mag(static_cast<std::size_t>(n_bins));
  for (std::int64_t f = 0; f < frames; ++f) {
    const double* seg = audio.data().data() + f * mel.hop;
    for (std::int64_t n = 0; n < n_fft; ++n)
      windowed[static_cast<std::size_t>(n)] = seg[n] * hann[static_cast<std::size_t>(n)];
    for (std::int64_t b = 0; b < n_bins; ++b) {
      double re = 0.0, im = 0.0;
      const double* ct = cos_t.data() + b * n_fft;
      const double* st = sin_t.data() + b * n_fft;
      for (std::int64_t n = 0; n < n_fft; ++n) {
        re += windowed[static_cast<std::size_t>(n)] * ct[n];
        im -= windowed[static_cast<std::size_t>(n)] * st[n];
      }
      mag[static_cast<std::size_t>(b)] = std::sqrt(re * re + im * im);
    }
    for (int m = 0; m < mel.n_mels; ++m) {
      double e = 0.0;
      const double* fb = fbank.data() + static_cast<std::size_t>(m) * static_cast<std::size_t>(n_bins);
      for (std::int64_t b = 0; b < n_bins; ++b) e += fb[b] * mag[static_cast<std::size_t>(b)];
      logmel.at2(m, f) = std::log1p(e);
    }
  }

  std::int64_t pooled = frames / pool;
  if (pooled == 0) throw DataError("mel_features: too few frames after pooling");
  Tensor out({mel.n_mels, pooled}, 0.0);
  for (int m = 0; m < mel.n_mels; ++m)
    for (std::int64_t t = 0; t < pooled; ++t) {
      double acc = 0.0;
      for (int j = 0; j < pool; ++j) acc += logmel.at2(m, t * pool + j);
      out.at2(m, t) = acc / double(pool);
    }
  return standardize_bins ? standardize(out) : out;
}

PreprocessedRecording preprocess_eeg(const EegRecording& rec, const PreprocessConfig& cfg) {
  cfg.validate();
  std::int64_t T = rec.data.dim(1);

  // channel selection
  std::vector<std::int64_t> keep;
  for (std::int64_t c = 0; c < rec.data.dim(0); ++c)
    if (cfg.include_non_eeg || rec.channel_kinds[static_cast<std::size_t>(c)] == ChannelKind::EEG)
      keep.push_back(c);
  if (keep.empty()) throw DataError("preprocess: no channels selected");
  Tensor x({static_cast<std::int64_t>(keep.size()), T}, 0.0);
  PreprocessedRecording out;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    out.channel_names.push_back(rec.channel_names[static_cast<std::size_t>(keep[i])]);
    for (std::int64_t t = 0; t < T; ++t) x.at2(static_cast<std::int64_t>(i), t) = rec.data.at2(keep[i], t);
  }

  std::int64_t baseline_samples =
      std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(cfg.baseline_s * rec.sample_rate_hz)));
  baseline_samples = std::min(baseline_samples, T);

  std::ostringstream p;
  x = baseline_correct(x, baseline_samples);
  out.provenance.push_back("baseline(samples=" + std::to_string(baseline_samples) + ")");
  auto rs = robust_scale(x);
  x = rs.data;
  out.degenerate = rs.degenerate;
  out.provenance.push_back("robust_scale");
  x = percentile_clip(x, cfg.clip_lo_pct, cfg.clip_hi_pct);
  {
    std::ostringstream os;
    os << "percentile_clip(lo=" << cfg.clip_lo_pct << ",hi=" << cfg.clip_hi_pct << ")";
    out.provenance.push_back(os.str());
  }
  x = clamp_std(x, cfg.clamp_sigma);
  {
    std::ostringstream os;
    os << "clamp_std(sigma=" << cfg.clamp_sigma << ")";
    out.provenance.push_back(os.str());
  }
  x = standardize(x);
  out.provenance.push_back("standardize");

  // degenerate channels are zeroed, keeping C fixed across subjects
  for (std::size_t c = 0; c < out.degenerate.size(); ++c)
    if (out.degenerate[c])
      for (std::int64_t t = 0; t < T; ++t) x.at2(static_cast<std::int64_t>(c), t) = 0.0;

  int factor = static_cast<int>(std::llround(rec.sample_rate_hz / cfg.feature_rate_hz));
  if (factor < 1 || std::fabs(rec.sample_rate_hz - factor * cfg.feature_rate_hz) > 1e-6)
    throw ConfigError("preprocess: sample rate must be an integer multiple of feature rate");
  if (factor > 1) {
    x = decimate_moving_average(x, factor);
    out.provenance.push_back("decimate(factor=" + std::to_string(factor) + ",order=8)");
  }
  out.features = x;
  return out;
}

std::vector<WindowPair> make_windows(const std::string& subject_id, const Tensor& eeg_features,
                                     const Tensor& audio_features, const WordAlignment& alignment,
                                     const PreprocessConfig& cfg) {
  cfg.validate();
  std::int64_t Tw = static_cast<std::int64_t>(std::llround(cfg.window_s * cfg.feature_rate_hz));
  std::int64_t stride = cfg.stride_s > 0
                            ? static_cast<std::int64_t>(std::llround(cfg.stride_s * cfg.feature_rate_hz))
                            : Tw;
  std::int64_t T = std::min(eeg_features.dim(1), audio_features.dim(1));
  if (T < Tw) throw DataError("make_windows: zero complete windows in recording");
  std::int64_t n_win = (T - Tw) / stride + 1;

  std::vector<WindowPair> out;
  for (std::int64_t w = 0; w < n_win; ++w) {
    WindowPair wp;
    wp.subject_id = subject_id;
    wp.window_index = static_cast<int>(w);
    std::int64_t t0 = w * stride;
    wp.eeg = Tensor({eeg_features.dim(0), Tw}, 0.0);
    for (std::int64_t c = 0; c < eeg_features.dim(0); ++c)
      for (std::int64_t t = 0; t < Tw; ++t) wp.eeg.at2(c, t) = eeg_features.at2(c, t0 + t);
    wp.audio = Tensor({audio_features.dim(0), Tw}, 0.0);
    for (std::int64_t f = 0; f < audio_features.dim(0); ++f)
      for (std::int64_t t = 0; t < Tw; ++t) wp.audio.at2(f, t) = audio_features.at2(f, t0 + t);

    double win_start = double(t0) / cfg.feature_rate_hz;
    double win_end = double(t0 + Tw) / cfg.feature_rate_hz;
    for (const auto& e : alignment.entries) {
      double mid = 0.5 * (e.onset_s + e.offset_s);
      if (mid >= win_start && mid < win_end) wp.words.push_back(e.word);
    }
    out.push_back(std::move(wp));
  }
  return out;
}

namespace {

json config_to_json(const PreprocessConfig& c) {
  json j;
  j["clip_lo_pct"] = c.clip_lo_pct;
  j["clip_hi_pct"] = c.clip_hi_pct;
  j["clamp_sigma"] = c.clamp_sigma;
  j["window_s"] = c.window_s;
  j["stride_s"] = c.stride_s;
  j["baseline_s"] = c.baseline_s;
  j["include_non_eeg"] = c.include_non_eeg;
  j["feature_rate_hz"] = c.feature_rate_hz;
  j["mel"] = {{"n_fft", c.mel.n_fft}, {"hop", c.mel.hop}, {"n_mels", c.mel.n_mels},
              {"fmin", c.mel.fmin}, {"fmax", c.mel.fmax}};
  return j;
}

PreprocessConfig config_from_json(const json& j) {
  PreprocessConfig c;
  c.clip_lo_pct = j.at("clip_lo_pct");
  c.clip_hi_pct = j.at("clip_hi_pct");
  c.clamp_sigma = j.at("clamp_sigma");
  c.window_s = j.at("window_s");
  c.stride_s = j.at("stride_s");
  c.baseline_s = j.at("baseline_s");
  c.include_non_eeg = j.at("include_non_eeg");
  c.feature_rate_hz = j.at("feature_rate_hz");
  c.mel.n_fft = j.at("mel").at("n_fft");
  c.mel.hop = j.at("mel").at("hop");
  c.mel.n_mels = j.at("mel").at("n_mels");
  c.mel.fmin = j.at("mel").at("fmin");
  c.mel.fmax = j.at("mel").at("fmax");
  return c;
}

std::string blob_name(std::size_t i, const char* kind) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "w%06zu_%s.bin", i, kind);
  return buf;
}

}  // namespace

void save_window_dataset(const WindowDataset& ds, const std::string& dir) {
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "neurodecode-windows-v1";
  manifest["feature_rate_hz"] = ds.feature_rate_hz;
  manifest["subjects"] = ds.subjects;
  manifest["provenance"] = ds.provenance;
  manifest["config"] = config_to_json(ds.config);
  manifest["windows"] = json::array();
  for (std::size_t i = 0; i < ds.windows.size(); ++i) {
    const auto& w = ds.windows[i];
    json jw;
    jw["subject"] = w.subject_id;
    jw["window_index"] = w.window_index;
    jw["words"] = w.words;
    jw["eeg_shape"] = w.eeg.shape();
    jw["audio_shape"] = w.audio.shape();
    jw["eeg_file"] = blob_name(i, "eeg");
    jw["audio_file"] = blob_name(i, "audio");
    manifest["windows"].push_back(jw);
    write_doubles_file((fs::path(dir) / blob_name(i, "eeg")).string(), w.eeg.data());
    write_doubles_file((fs::path(dir) / blob_name(i, "audio")).string(), w.audio.data());
  }
  write_file_text((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

WindowDataset load_window_dataset(const std::string& dir) {
  json manifest;
  try {
    manifest = json::parse(read_file_text((fs::path(dir) / "manifest.json").string()));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("window dataset manifest: ") + e.what());
  }
  if (manifest.value("format", "") != "neurodecode-windows-v1")
    throw DataError("window dataset: unknown format tag");
  WindowDataset ds;
  ds.feature_rate_hz = manifest.at("feature_rate_hz");
  ds.subjects = manifest.at("subjects").get<std::vector<std::string>>();
  ds.provenance = manifest.at("provenance").get<std::vector<std::string>>();
  ds.config = config_from_json(manifest.at("config"));
  for (const auto& jw : manifest.at("windows")) {
    WindowPair w;
    w.subject_id = jw.at("subject");
    w.window_index = jw.at("window_index");
    w.words = jw.at("words").get<std::vector<std::string>>();
    Shape es = jw.at("eeg_shape").get<Shape>();
    Shape as = jw.at("audio_shape").get<Shape>();
    auto ed = read_doubles_file((fs::path(dir) / jw.at("eeg_file").get<std::string>()).string());
    auto ad = read_doubles_file((fs::path(dir) / jw.at("audio_file").get<std::string>()).string());
    if (static_cast<std::int64_t>(ed.size()) != shape_numel(es) ||
        static_cast<std::int64_t>(ad.size()) != shape_numel(as))
      throw DataError("window dataset: blob size does not match manifest shape");
    w.eeg = Tensor(es, std::move(ed));
    w.audio = Tensor(as, std::move(ad));
    ds.windows.push_back(std::move(w));
  }
  return ds;
}

}  // namespace nd
