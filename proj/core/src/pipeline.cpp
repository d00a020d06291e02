#include "neurodecode/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "json.hpp"
#include "neurodecode/errors.hpp"
#include "neurodecode/eval.hpp"
#include "neurodecode/gradcheck.hpp"
#include "neurodecode/ops.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace nd {

namespace {

void prepare_dir(const std::string& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) throw DataError(dir + " already exists and is not empty; pass --force to replace it");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

void write_echo(const AppConfig& cfg, const std::string& run_dir) {
  fs::create_directories(run_dir);
  write_file_text((fs::path(run_dir) / "config.echo").string(), config_echo(cfg));
}

std::vector<std::string> eeg_names(const EegRecording& rec) {
  std::vector<std::string> out;
  for (std::size_t c = 0; c < rec.channel_names.size(); ++c)
    if (rec.channel_kinds[c] == ChannelKind::EEG) out.push_back(rec.channel_names[c]);
  return out;
}

// layout.csv read back without a channel list; rows keep file order.
SensorLayout read_layout_csv(const std::string& path) {
  std::istringstream in(read_file_text(path));
  std::string line;
  std::getline(in, line);  // header
  SensorLayout l;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string name, xs, ys;
    if (!std::getline(row, name, ',') || !std::getline(row, xs, ',') || !std::getline(row, ys))
      throw DataError(path + ": malformed layout row '" + line + "'");
    try {
      l.positions.push_back({std::stod(xs), std::stod(ys)});
    } catch (const std::exception&) {
      throw DataError(path + ": malformed layout row '" + line + "'");
    }
  }
  return l;
}

ChannelKind kind_from_name(const std::string& name) {
  if (name == "VEOG") return ChannelKind::VEOG;
  if (name == "AUD") return ChannelKind::AUD;
  return ChannelKind::EEG;
}

}  // namespace

void run_synth(const AppConfig& cfg, const RunOptions& opts) {
  SyntheticDataset ds = generate_synthetic(cfg.synth, opts.seed);
  std::string raw = (fs::path(opts.run_dir) / "raw").string();
  prepare_dir(raw, opts.force);
  write_echo(cfg, opts.run_dir);

  for (const auto& rec : ds.recordings) {
    VhdrHeader h;
    h.data_file = rec.subject_id + ".eeg";
    h.n_channels = rec.data.dim(0);
    h.sampling_interval_us = 1e6 / rec.sample_rate_hz;
    h.sample_rate_hz = rec.sample_rate_hz;
    h.channel_names = rec.channel_names;
    write_file_text((fs::path(raw) / (rec.subject_id + ".vhdr")).string(), write_header(h));
    write_file_bytes((fs::path(raw) / h.data_file).string(), write_binary(rec.data));
  }

  const auto& first = ds.recordings.front();
  write_file_text((fs::path(raw) / "layout.csv").string(),
                  write_layout(first.layout, eeg_names(first)));
  write_file_text((fs::path(raw) / "alignment.csv").string(), write_alignment(ds.alignment));
  write_doubles_file((fs::path(raw) / "audio_features.bin").string(), ds.audio_features.data());
  json meta;
  meta["channels"] = ds.audio_features.dim(0);
  meta["samples"] = ds.audio_features.dim(1);
  meta["rate_hz"] = ds.feature_rate_hz;
  write_file_text((fs::path(raw) / "audio_meta.json").string(), meta.dump(2) + "\n");
}

void run_preprocess(const AppConfig& cfg, const RunOptions& opts) {
  cfg.preprocess.validate();
  std::string raw = (fs::path(opts.run_dir) / "raw").string();
  if (!fs::exists(raw)) throw DataError("no raw data at " + raw + "; run synth first");
  std::string out = (fs::path(opts.run_dir) / "windows").string();
  prepare_dir(out, opts.force);
  write_echo(cfg, opts.run_dir);

  std::vector<std::string> headers;
  for (const auto& entry : fs::directory_iterator(raw))
    if (entry.path().extension() == ".vhdr") headers.push_back(entry.path().string());
  std::sort(headers.begin(), headers.end());
  if (headers.empty()) throw DataError("no .vhdr recordings under " + raw);

  WordAlignment alignment = load_alignment(read_file_text((fs::path(raw) / "alignment.csv").string()));

  Tensor audio;
  {
    fs::path wav = fs::path(raw) / "audio.wav";
    if (fs::exists(wav)) {
      AudioTrack track = load_wav(read_file_bytes(wav.string()), 0);
      audio = mel_features(track.samples, track.sample_rate_hz, cfg.preprocess.mel,
                           cfg.preprocess.feature_rate_hz);
    } else {
      json meta = json::parse(read_file_text((fs::path(raw) / "audio_meta.json").string()));
      auto data = read_doubles_file((fs::path(raw) / "audio_features.bin").string());
      std::int64_t f = meta.at("channels"), t = meta.at("samples");
      if (f * t != static_cast<std::int64_t>(data.size()))
        throw DataError("audio_features.bin does not match audio_meta.json");
      audio = Tensor({f, t}, std::move(data));
    }
  }

  WindowDataset ds;
  ds.feature_rate_hz = cfg.preprocess.feature_rate_hz;
  ds.config = cfg.preprocess;
  std::string layout_csv;
  for (const auto& path : headers) {
    VhdrHeader h = parse_header(read_file_text(path));
    Tensor data = read_binary(read_file_bytes((fs::path(raw) / h.data_file).string()), h);
    EegRecording rec;
    rec.subject_id = fs::path(path).stem().string();
    rec.sample_rate_hz = h.sample_rate_hz;
    rec.channel_names = h.channel_names;
    for (const auto& name : h.channel_names) rec.channel_kinds.push_back(kind_from_name(name));
    rec.data = data;
    rec.layout = load_layout(read_file_text((fs::path(raw) / "layout.csv").string()),
                             eeg_names(rec));

    PreprocessedRecording pre = preprocess_eeg(rec, cfg.preprocess);
    if (ds.provenance.empty()) ds.provenance = pre.provenance;
    if (layout_csv.empty()) layout_csv = write_layout(rec.layout, eeg_names(rec));
    for (auto& w : make_windows(rec.subject_id, pre.features, audio, alignment, cfg.preprocess))
      ds.windows.push_back(std::move(w));
    ds.subjects.push_back(rec.subject_id);
  }
  // Interleave subjects by window position so a contiguous split keeps the
  // earliest windows of every subject in train and the latest in test.
  std::stable_sort(ds.windows.begin(), ds.windows.end(),
                   [](const WindowPair& a, const WindowPair& b) {
                     return a.window_index < b.window_index;
                   });
  save_window_dataset(ds, out);
  write_file_text((fs::path(out) / "layout.csv").string(), layout_csv);
}

void run_train(const AppConfig& cfg, const RunOptions& opts) {
  std::string windows = (fs::path(opts.run_dir) / "windows").string();
  if (!fs::exists(windows)) throw DataError("no windows at " + windows + "; run preprocess first");
  WindowDataset ds = load_window_dataset(windows);
  if (ds.windows.empty()) throw DataError("window dataset is empty");

  std::string train_dir = (fs::path(opts.run_dir) / "train").string();
  if (opts.force) fs::remove_all(train_dir);
  write_echo(cfg, opts.run_dir);

  ModelConfig mc = cfg.model;
  mc.c_in = static_cast<int>(ds.windows.front().eeg.dim(0));
  mc.f_out = static_cast<int>(ds.windows.front().audio.dim(0));
  SensorLayout layout = read_layout_csv((fs::path(windows) / "layout.csv").string());
  Model model(mc, ds.subjects, layout, opts.seed);
  train_loop(model, ds, cfg.train, train_dir, opts.seed);
}

void run_eval(const AppConfig& cfg, const RunOptions& opts) {
  std::string windows = (fs::path(opts.run_dir) / "windows").string();
  if (!fs::exists(windows)) throw DataError("no windows at " + windows + "; run preprocess first");
  WindowDataset ds = load_window_dataset(windows);

  fs::path train_dir = fs::path(opts.run_dir) / "train";
  std::string ckpt;
  for (const char* name : {"best", "latest"}) {
    fs::path cand = train_dir / name;
    if (fs::exists(cand / "checkpoint.json")) {
      ckpt = cand.string();
      break;
    }
  }
  if (ckpt.empty()) throw DataError("no checkpoint under " + train_dir.string() + "; run train first");
  Model model = model_from_checkpoint(ckpt, opts.seed);

  SplitIndices split = contiguous_split(ds.windows.size(), cfg.train.train_frac, cfg.train.val_frac);
  if (split.test.empty()) throw DataError("test split is empty; lower train/val fractions");
  EvalSummary s = evaluate(model, ds, split.test);

  json report;
  report["n_windows"] = s.n_windows;
  report["top1"] = s.top1;
  report["top5"] = s.top5;
  report["levenshtein"] = s.levenshtein;
  report["wer"] = s.wer;
  report["wer_vocab"] = s.wer_vocab;
  {
    std::ostringstream hex;
    hex << std::hex << dataset_hash(ds);
    report["dataset_hash"] = hex.str();
  }
  report["checkpoint"] = fs::path(ckpt).filename().string();
  json jcfg = json::object();
  {
    std::istringstream echo(config_echo(cfg));
    std::string line;
    while (std::getline(echo, line)) {
      auto eq = line.find('=');
      if (eq != std::string::npos) jcfg[line.substr(0, eq)] = line.substr(eq + 1);
    }
  }
  report["config"] = std::move(jcfg);
  write_echo(cfg, opts.run_dir);
  write_file_text((fs::path(opts.run_dir) / "report.json").string(), report.dump(2) + "\n");
  if (cfg.eval_per_window_csv)
    write_per_window_csv(s, (fs::path(opts.run_dir) / "per_window.csv").string());
}

GradcheckReport run_gradcheck(const RunOptions& opts, int n_seeds) {
  GradcheckReport rep;
  auto note = [&rep](const GradCheckResult& r, double limit, const char* what) {
    rep.checked += r.checked;
    rep.max_op_err = std::max(rep.max_op_err, r.max_rel_err);
    if (r.max_rel_err >= limit)
      throw NumericalError(std::string(what) + ": gradient error " + std::to_string(r.max_rel_err));
  };

  for (int s = 0; s < n_seeds; ++s) {
    Rng rng(opts.seed + static_cast<std::uint64_t>(s), 1);
    {
      Tensor a = Tensor::randn({3, 4}, rng), b = Tensor::randn({4, 2}, rng);
      note(gradcheck([](const std::vector<Tensor>& in) { return sum_all(sigmoid(matmul(in[0], in[1]))); },
                     {a, b}),
           1e-4, "matmul");
    }
    {
      Tensor x = Tensor::randn({2, 9}, rng);
      Tensor w = Tensor::randn({3, 2, 3}, rng);
      Tensor bias = Tensor::randn({3}, rng);
      note(gradcheck(
               [](const std::vector<Tensor>& in) {
                 return sum_all(tanh_op(conv1d(in[0], in[1], 2, in[2])));
               },
               {x, w, bias}),
           1e-4, "conv1d");
    }
    {
      Tensor x = Tensor::randn({4, 3}, rng);
      note(gradcheck([](const std::vector<Tensor>& in) { return sum_all(mul(glu(in[0]), glu(in[0]))); },
                     {x}),
           1e-4, "glu");
    }
    {
      Tensor x = Tensor::randn({2, 3, 5}, rng, 2.0);
      Tensor gamma = Tensor::randn({3}, rng), beta = Tensor::randn({3}, rng);
      note(gradcheck(
               [](const std::vector<Tensor>& in) {
                 BatchNormState st;
                 return sum_all(sigmoid(batchnorm1d(in[0], in[1], in[2], st, true)));
               },
               {x, gamma, beta}),
           1e-4, "batchnorm1d");
    }
    {
      Tensor x = Tensor::randn({6}, rng);
      note(gradcheck(
               [](const std::vector<Tensor>& in) {
                 Tensor p = softmax(in[0], 0);
                 return sum_all(mul(p, p));
               },
               {x}),
           1e-4, "softmax");
    }
    {
      Tensor x = Tensor::randn({3}, rng);
      Tensor wx = Tensor::randn({8, 3}, rng), wh = Tensor::randn({8, 2}, rng);
      Tensor b = Tensor::randn({8}, rng), h0 = Tensor::randn({2}, rng), c0 = Tensor::randn({2}, rng);
      note(gradcheck(
               [](const std::vector<Tensor>& in) {
                 LstmWeights w{in[1], in[2], in[3]};
                 auto st = recurrent_cell(in[0], {in[4], in[5]}, w);
                 return sum_all(add(st.h, st.c));
               },
               {x, wx, wh, b, h0, c0}),
           1e-4, "recurrent_cell");
    }
    {
      Tensor x = Tensor::randn({6}, rng);
      note(gradcheck([](const std::vector<Tensor>& in) { return sum_all(gelu(in[0])); }, {x}), 1e-4,
           "gelu");
    }
    {
      Tensor x = Tensor::randn({3, 4}, rng);
      note(gradcheck(
               [](const std::vector<Tensor>& in) {
                 return sum_all(mul(l2_normalize(in[0]), l2_normalize(in[0])));
               },
               {x}),
           1e-4, "l2_normalize");
    }
  }

  for (int s = 0; s < n_seeds; ++s) {
    std::uint64_t seed = opts.seed + static_cast<std::uint64_t>(s);
    ModelConfig mc;
    mc.c_in = 4;
    mc.d1 = 8;
    mc.d2 = 8;
    mc.n_blocks = 2;
    mc.k_harmonics = 3;
    mc.spatial_dropout_p = 0.0;
    mc.rnn_hidden = 4;
    mc.f_out = 5;
    Rng lrng(seed, 9);
    SensorLayout layout;
    for (int i = 0; i < mc.c_in; ++i) layout.positions.push_back({lrng.uniform(), lrng.uniform()});
    Model model(mc, {"S01"}, layout, seed);
    Rng xrng(seed, 10);
    Tensor x = Tensor::randn({4, 16}, xrng);
    std::vector<Tensor> inputs = model.parameters();
    inputs.push_back(x);
    auto res = gradcheck(
        [&](const std::vector<Tensor>&) {
          Rng drng(0, 0);
          return mean_all(model.forward(x, "S01", true, drng));
        },
        inputs, 1e-5, 3, seed);
    rep.checked += res.checked;
    rep.max_model_err = std::max(rep.max_model_err, res.max_rel_err);
    if (res.max_rel_err >= 1e-3)
      throw NumericalError("model: gradient error " + std::to_string(res.max_rel_err));
  }
  return rep;
}

}  // namespace nd
