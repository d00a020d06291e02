#include "neurodecode/config.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <sstream>

#include "neurodecode/errors.hpp"

namespace nd {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

long long parse_int(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

struct Entry {
  std::function<void(AppConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const AppConfig&)> get;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string fmt(long long v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

const std::map<std::string, Entry>& registry() {
  static const std::map<std::string, Entry> table = [] {
    std::map<std::string, Entry> t;
    auto add = [&t](const std::string& key, auto setter, auto getter) {
      t[key] = {setter, getter};
    };

#define ND_INT(key, field)                                                               \
  add(key,                                                                               \
      [](AppConfig& c, const std::string& k, const std::string& v) {                     \
        c.field = static_cast<int>(parse_int(k, v));                                     \
      },                                                                                 \
      [](const AppConfig& c) { return fmt(static_cast<long long>(c.field)); })
#define ND_DOUBLE(key, field)                                                            \
  add(key,                                                                               \
      [](AppConfig& c, const std::string& k, const std::string& v) {                     \
        c.field = parse_double(k, v);                                                    \
      },                                                                                 \
      [](const AppConfig& c) { return fmt(c.field); })
#define ND_BOOL(key, field)                                                              \
  add(key,                                                                               \
      [](AppConfig& c, const std::string& k, const std::string& v) {                     \
        c.field = parse_bool(k, v);                                                      \
      },                                                                                 \
      [](const AppConfig& c) { return fmt(c.field); })

    ND_INT("synth.n_subjects", synth.n_subjects);
    ND_INT("synth.eeg_channels", synth.eeg_channels);
    ND_INT("synth.audio_features", synth.audio_features);
    ND_INT("synth.latents", synth.latents);
    ND_DOUBLE("synth.duration_s", synth.duration_s);
    ND_DOUBLE("synth.snr_db", synth.snr_db);
    ND_DOUBLE("synth.eeg_rate_hz", synth.eeg_rate_hz);
    ND_DOUBLE("synth.feature_rate_hz", synth.feature_rate_hz);
    ND_DOUBLE("synth.word_s", synth.word_s);
    ND_INT("synth.vocab_size", synth.vocab_size);
    ND_BOOL("synth.artifact_channels", synth.artifact_channels);

    ND_DOUBLE("preprocess.clip_lo_pct", preprocess.clip_lo_pct);
    ND_DOUBLE("preprocess.clip_hi_pct", preprocess.clip_hi_pct);
    ND_DOUBLE("preprocess.clamp_sigma", preprocess.clamp_sigma);
    ND_DOUBLE("preprocess.window_s", preprocess.window_s);
    ND_DOUBLE("preprocess.stride_s", preprocess.stride_s);
    ND_DOUBLE("preprocess.baseline_s", preprocess.baseline_s);
    ND_BOOL("preprocess.include_non_eeg", preprocess.include_non_eeg);
    ND_DOUBLE("preprocess.feature_rate_hz", preprocess.feature_rate_hz);
    ND_INT("preprocess.mel_n_fft", preprocess.mel.n_fft);
    ND_INT("preprocess.mel_hop", preprocess.mel.hop);
    ND_INT("preprocess.mel_n_mels", preprocess.mel.n_mels);
    ND_DOUBLE("preprocess.mel_fmin", preprocess.mel.fmin);
    ND_DOUBLE("preprocess.mel_fmax", preprocess.mel.fmax);

    ND_INT("model.d1", model.d1);
    ND_INT("model.d2", model.d2);
    ND_INT("model.n_blocks", model.n_blocks);
    ND_INT("model.k_harmonics", model.k_harmonics);
    ND_DOUBLE("model.spatial_dropout_p", model.spatial_dropout_p);
    ND_DOUBLE("model.spatial_dropout_radius", model.spatial_dropout_radius);
    ND_INT("model.rnn_hidden", model.rnn_hidden);
    ND_INT("model.attn_heads", model.attn_heads);
    add("model.subject_mode",
        [](AppConfig& c, const std::string&, const std::string& v) {
          c.model.subject_mode = subject_mode_from_string(v);
        },
        [](const AppConfig& c) { return to_string(c.model.subject_mode); });
    add("model.spatial_mode",
        [](AppConfig& c, const std::string&, const std::string& v) {
          c.model.spatial_mode = spatial_mode_from_string(v);
        },
        [](const AppConfig& c) { return to_string(c.model.spatial_mode); });
    add("model.rnn_mode",
        [](AppConfig& c, const std::string&, const std::string& v) {
          c.model.rnn_mode = rnn_mode_from_string(v);
        },
        [](const AppConfig& c) { return to_string(c.model.rnn_mode); });

    ND_INT("train.steps", train.steps);
    ND_INT("train.batch_size", train.batch_size);
    ND_DOUBLE("train.lr", train.lr);
    ND_DOUBLE("train.tau", train.tau);
    ND_BOOL("train.literal_loss", train.literal_loss);
    ND_INT("train.eval_every", train.eval_every);
    ND_INT("train.checkpoint_every", train.checkpoint_every);
    ND_DOUBLE("train.train_frac", train.train_frac);
    ND_DOUBLE("train.val_frac", train.val_frac);

    ND_BOOL("eval.per_window_csv", eval_per_window_csv);

#undef ND_INT
#undef ND_DOUBLE
#undef ND_BOOL
    return t;
  }();
  return table;
}

}  // namespace

void apply_setting(AppConfig& cfg, const std::string& key, const std::string& value) {
  auto it = registry().find(key);
  if (it == registry().end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(cfg, key, trim(value));
}

void apply_config_text(AppConfig& cfg, const std::string& text) {
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto cut = line.find_first_of("#;");
    if (cut != std::string::npos) line = line.substr(0, cut);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.find('.') == std::string::npos && !section.empty()) key = section + "." + key;
    apply_setting(cfg, key, value);
  }
}

AppConfig parse_config_file(const std::string& path) {
  AppConfig cfg;
  try {
    apply_config_text(cfg, read_file_text(path));
  } catch (const DataError& e) {
    throw ConfigError(std::string("config file: ") + e.what());
  }
  return cfg;
}

std::string config_echo(const AppConfig& cfg) {
  std::string out;
  for (const auto& [key, entry] : registry()) out += key + "=" + entry.get(cfg) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& [key, entry] : registry()) out.push_back(key);
  return out;
}

}  // namespace nd
