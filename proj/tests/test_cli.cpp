#include <cstdlib>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "neurodecode/config.hpp"
#include "neurodecode/errors.hpp"
#include "neurodecode/pipeline.hpp"

using namespace nd;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  std::string cmd = std::string(NEURODECODE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

std::string temp_dir(const char* tag) {
  fs::path p = fs::temp_directory_path() / (std::string("nd_cli_") + tag);
  fs::remove_all(p);
  return p.string();
}

const char* kTinyData =
    " --set synth.duration_s=40 --set synth.n_subjects=2 --set synth.eeg_channels=6"
    " --set synth.audio_features=4 --set synth.latents=3";
const char* kTinyModel =
    " --set model.d1=12 --set model.d2=12 --set model.n_blocks=2 --set model.k_harmonics=3"
    " --set model.rnn_hidden=6 --set train.steps=4 --set train.batch_size=4"
    " --set train.eval_every=2 --set train.checkpoint_every=2";

}  // namespace

TEST_CASE("settings reach the right fields and unknown keys fail") {
  AppConfig cfg;
  apply_setting(cfg, "preprocess.clamp_sigma", "100");
  CHECK(cfg.preprocess.clamp_sigma == 100.0);
  apply_setting(cfg, "model.subject_mode", "subject_attention");
  CHECK(cfg.model.subject_mode == SubjectMode::SubjectAttention);
  apply_setting(cfg, "train.lr", "1e-3");
  CHECK(cfg.train.lr == 1e-3);
  apply_setting(cfg, "synth.artifact_channels", "false");
  CHECK_FALSE(cfg.synth.artifact_channels);

  CHECK_THROWS_WITH_AS(apply_setting(cfg, "train.momentum", "0.9"),
                       "unknown config key 'train.momentum'", ConfigError);
  CHECK_THROWS_AS(apply_setting(cfg, "train.steps", "ten"), ConfigError);
  CHECK_THROWS_AS(apply_setting(cfg, "train.steps", "10x"), ConfigError);
  CHECK_THROWS_AS(apply_setting(cfg, "train.literal_loss", "maybe"), ConfigError);
  CHECK_THROWS_AS(apply_setting(cfg, "model.rnn_mode", "circular"), ConfigError);
}

TEST_CASE("config text accepts sections, flat keys and comments") {
  AppConfig cfg;
  apply_config_text(cfg,
                    "# comment\n"
                    "[preprocess]\n"
                    "clamp_sigma = 100  ; trailing comment\n"
                    "window_s=2\n"
                    "\n"
                    "train.batch_size=32\n"
                    "[model]\n"
                    "rnn_mode=bidirectional_attention\n");
  CHECK(cfg.preprocess.clamp_sigma == 100.0);
  CHECK(cfg.preprocess.window_s == 2.0);
  CHECK(cfg.train.batch_size == 32);
  CHECK(cfg.model.rnn_mode == RnnMode::BidirectionalAttention);

  CHECK_THROWS_AS(apply_config_text(cfg, "just a line\n"), ConfigError);
  CHECK_THROWS_AS(apply_config_text(cfg, "[broken\nx=1\n"), ConfigError);
  CHECK_THROWS_AS(apply_config_text(cfg, "[preprocess]\nnope=1\n"), ConfigError);
}

TEST_CASE("the config echo round-trips through the parser") {
  AppConfig cfg;
  cfg.train.steps = 123;
  cfg.preprocess.clamp_sigma = 100.0;
  cfg.model.subject_mode = SubjectMode::SubjectEmbedding;
  std::string echo = config_echo(cfg);
  CHECK(echo.find("train.steps=123\n") != std::string::npos);
  CHECK(echo.find("model.subject_mode=subject_embedding\n") != std::string::npos);
  AppConfig back;
  apply_config_text(back, echo);
  CHECK(config_echo(back) == echo);
  CHECK(config_keys().size() > 30);
}

TEST_CASE("subcommands chain through a run directory with proper exit codes") {
  std::string dir = temp_dir("chain");
  std::string base = "--run-dir " + dir + " --seed 5";
  CHECK(run_cli(base + kTinyData + " synth") == 0);
  CHECK(fs::exists(dir + "/raw/S01.vhdr"));
  CHECK(fs::exists(dir + "/raw/S02.eeg"));
  CHECK(fs::exists(dir + "/config.echo"));

  // a second synth must refuse to clobber without --force
  CHECK(run_cli(base + kTinyData + " synth") == 2);
  CHECK(run_cli(base + kTinyData + " --force synth") == 0);

  CHECK(run_cli(base + " preprocess") == 0);
  CHECK(fs::exists(dir + "/windows/manifest.json"));
  CHECK(run_cli(base + kTinyModel + " train") == 0);
  CHECK(fs::exists(dir + "/train/metrics.jsonl"));
  CHECK(fs::exists(dir + "/train/latest/checkpoint.json"));
  CHECK(run_cli(base + " --set eval.per_window_csv=true eval") == 0);
  CHECK(fs::exists(dir + "/report.json"));
  CHECK(fs::exists(dir + "/per_window.csv"));
  fs::remove_all(dir);
}

TEST_CASE("failures map to the documented exit codes") {
  std::string dir = temp_dir("codes");
  std::string base = "--run-dir " + dir + " --seed 5";
  // config errors
  CHECK(run_cli(base + " --set nope.key=1 synth") == 1);
  CHECK(run_cli(base + " --set train.steps=ten train") == 1);
  CHECK(run_cli(base + " --config " + dir + "_missing.ini synth") == 1);
  // data errors: missing inputs for later stages
  CHECK(run_cli(base + " preprocess") == 2);
  CHECK(run_cli(base + " train") == 2);
  CHECK(run_cli(base + " eval") == 2);
  fs::remove_all(dir);
}

TEST_CASE("config files load before overrides") {
  std::string dir = temp_dir("file");
  fs::create_directories(dir);
  std::string ini = dir + "/exp.ini";
  write_file_text(ini, "[train]\nsteps=7\nbatch_size=3\n");
  AppConfig cfg = parse_config_file(ini);
  CHECK(cfg.train.steps == 7);
  CHECK(cfg.train.batch_size == 3);
  fs::remove_all(dir);
}

TEST_CASE("gradcheck subcommand passes with a reduced seed count") {
  CHECK(run_cli("--seed 1 gradcheck --seeds 2") == 0);
}

TEST_CASE("a corrupted checkpoint surfaces as a data error") {
  std::string dir = temp_dir("corrupt");
  std::string base = "--run-dir " + dir + " --seed 6";
  REQUIRE(run_cli(base + kTinyData + " synth") == 0);
  REQUIRE(run_cli(base + " preprocess") == 0);
  REQUIRE(run_cli(base + kTinyModel + " train") == 0);
  for (const auto& entry : fs::directory_iterator(dir + "/train/best")) {
    if (entry.path().extension() == ".bin") {
      auto bytes = read_file_bytes(entry.path().string());
      bytes[0] ^= 0xff;
      write_file_bytes(entry.path().string(), bytes);
      break;
    }
  }
  CHECK(run_cli(base + " eval") == 2);
  fs::remove_all(dir);
}
