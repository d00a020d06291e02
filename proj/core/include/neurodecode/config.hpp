#pragma once

#include <string>
#include <vector>

#include "neurodecode/dataio.hpp"
#include "neurodecode/model.hpp"
#include "neurodecode/preprocess.hpp"
#include "neurodecode/training.hpp"

namespace nd {

struct AppConfig {
  SyntheticConfig synth;
  PreprocessConfig preprocess;
  ModelConfig model;  // c_in and f_out are derived from the data later
  TrainConfig train;
  bool eval_per_window_csv = false;
};

// One dotted key, e.g. "preprocess.clamp_sigma" = "100". Unknown keys and
// unparsable values raise ConfigError.
void apply_setting(AppConfig& cfg, const std::string& key, const std::string& value);

// INI text: [section] headers with key=value lines, or flat
// section.key=value lines; '#' and ';' start comments.
void apply_config_text(AppConfig& cfg, const std::string& text);
AppConfig parse_config_file(const std::string& path);

// Flat section.key=value dump of every setting, in a fixed order.
std::string config_echo(const AppConfig& cfg);

// All recognized dotted keys, sorted.
std::vector<std::string> config_keys();

}  // namespace nd
