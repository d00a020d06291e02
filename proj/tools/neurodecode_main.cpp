#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "neurodecode/config.hpp"
#include "neurodecode/errors.hpp"
#include "neurodecode/pipeline.hpp"

namespace {

struct Cli {
  std::string config_path;
  std::vector<std::string> sets;
  nd::RunOptions opts;
};

nd::AppConfig build_config(const Cli& cli) {
  nd::AppConfig cfg;
  if (!cli.config_path.empty()) cfg = nd::parse_config_file(cli.config_path);
  for (const auto& kv : cli.sets) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw nd::ConfigError("--set expects section.key=value, got '" + kv + "'");
    nd::apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EEG-to-speech contrastive decoding pipeline"};
  app.require_subcommand(1);

  Cli cli;
  app.add_option("--config", cli.config_path, "INI config file (section.key=value)");
  app.add_option("--set", cli.sets, "Override one setting, e.g. preprocess.clamp_sigma=100")
      ->take_all();
  app.add_option("--seed", cli.opts.seed, "Base random seed");
  app.add_option("--run-dir", cli.opts.run_dir, "Run directory (default: run)");
  app.add_flag("--force", cli.opts.force, "Replace existing outputs");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic raw dataset");
  auto* preprocess = app.add_subcommand("preprocess", "Raw recordings to window pairs");
  auto* train = app.add_subcommand("train", "Train the decoder (resumes from latest)");
  auto* eval = app.add_subcommand("eval", "Score the test split into report.json");
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient audit");
  int gc_seeds = 20;
  gradcheck->add_option("--seeds", gc_seeds, "Seeds per check (default 20)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gradcheck->parsed()) {
      nd::GradcheckReport rep = nd::run_gradcheck(cli.opts, gc_seeds);
      std::printf("gradcheck ok: %lld coordinates, op err %.3e, model err %.3e\n",
                  static_cast<long long>(rep.checked), rep.max_op_err, rep.max_model_err);
      return 0;
    }
    nd::AppConfig cfg = build_config(cli);
    if (synth->parsed()) nd::run_synth(cfg, cli.opts);
    if (preprocess->parsed()) nd::run_preprocess(cfg, cli.opts);
    if (train->parsed()) nd::run_train(cfg, cli.opts);
    if (eval->parsed()) nd::run_eval(cfg, cli.opts);
    return 0;
  } catch (const nd::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const nd::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const nd::NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
