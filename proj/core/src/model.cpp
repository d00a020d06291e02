#include "neurodecode/model.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "json.hpp"
#include "neurodecode/errors.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace nd {

std::string to_string(SubjectMode m) {
  switch (m) {
    case SubjectMode::Shared: return "shared";
    case SubjectMode::SubjectLayer: return "subject_layer";
    case SubjectMode::SubjectEmbedding: return "subject_embedding";
    case SubjectMode::SubjectAttention: return "subject_attention";
  }
  throw ConfigError("bad subject mode");
}

std::string to_string(SpatialMode m) {
  return m == SpatialMode::Shared ? "shared" : "per_subject";
}

std::string to_string(RnnMode m) {
  return m == RnnMode::Unidirectional ? "unidirectional" : "bidirectional_attention";
}

SubjectMode subject_mode_from_string(const std::string& s) {
  if (s == "shared") return SubjectMode::Shared;
  if (s == "subject_layer") return SubjectMode::SubjectLayer;
  if (s == "subject_embedding") return SubjectMode::SubjectEmbedding;
  if (s == "subject_attention") return SubjectMode::SubjectAttention;
  throw ConfigError("unknown subject_mode '" + s + "'");
}

SpatialMode spatial_mode_from_string(const std::string& s) {
  if (s == "shared") return SpatialMode::Shared;
  if (s == "per_subject") return SpatialMode::PerSubject;
  throw ConfigError("unknown spatial_mode '" + s + "'");
}

RnnMode rnn_mode_from_string(const std::string& s) {
  if (s == "unidirectional") return RnnMode::Unidirectional;
  if (s == "bidirectional_attention") return RnnMode::BidirectionalAttention;
  throw ConfigError("unknown rnn_mode '" + s + "'");
}

void ModelConfig::validate() const {
  if (c_in <= 0) throw ConfigError("model: c_in must be positive");
  if (d1 <= 0 || d2 <= 0) throw ConfigError("model: d1 and d2 must be positive");
  if (n_blocks <= 0) throw ConfigError("model: n_blocks must be positive");
  if (k_harmonics <= 0) throw ConfigError("model: k_harmonics must be positive");
  if (f_out <= 0) throw ConfigError("model: f_out must be positive");
  if (rnn_hidden <= 0) throw ConfigError("model: rnn_hidden must be positive");
  if (attn_heads != 1) throw ConfigError("model: only attn_heads=1 is supported");
  if (spatial_dropout_p < 0.0 || spatial_dropout_p > 1.0)
    throw ConfigError("model: spatial_dropout_p must be in [0, 1]");
  if (spatial_dropout_radius < 0.0)
    throw ConfigError("model: spatial_dropout_radius must be non-negative");
}

std::pair<std::int64_t, std::int64_t> ModelConfig::block_dilations(int k) {
  return {std::int64_t{1} << ((2 * k) % 5), std::int64_t{1} << ((2 * k + 1) % 5)};
}

namespace {

Tensor identity_matrix(std::int64_t n) {
  Tensor t = Tensor::zeros({n, n});
  for (std::int64_t i = 0; i < n; ++i) t.at2(i, i) = 1.0;
  return t;
}

Tensor copy_of(const Tensor& t) { return Tensor(t.shape(), t.data()); }

Tensor uniform_tensor(Shape shape, Rng& rng, double lim) {
  std::vector<double> d(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& v : d) v = rng.uniform(-lim, lim);
  return Tensor(std::move(shape), std::move(d));
}

}  // namespace

Model::Model(ModelConfig cfg, std::vector<std::string> subjects, SensorLayout layout,
             std::uint64_t seed)
    : cfg_(std::move(cfg)), subjects_(std::move(subjects)), layout_(std::move(layout)) {
  cfg_.validate();
  if (subjects_.empty()) throw ConfigError("model: subject list is empty");
  if (layout_.size() != static_cast<std::size_t>(cfg_.c_in))
    throw ConfigError("model: layout has " + std::to_string(layout_.size()) +
                      " sensors, expected " + std::to_string(cfg_.c_in));

  const std::int64_t C = cfg_.c_in, D1 = cfg_.d1, D2 = cfg_.d2;
  const std::int64_t K = cfg_.k_harmonics, H = cfg_.rnn_hidden;
  const std::int64_t KK2 = 2 * K * K;

  // Fourier basis over sensor positions: cos rows first, then sin rows,
  // indexed by the harmonic pair (k, l) on a K x K grid.
  {
    std::vector<double> basis(static_cast<std::size_t>(KK2 * C));
    for (std::int64_t k = 0; k < K; ++k)
      for (std::int64_t l = 0; l < K; ++l)
        for (std::int64_t c = 0; c < C; ++c) {
          double phase = 2.0 * M_PI *
                         (static_cast<double>(k) * layout_.positions[static_cast<std::size_t>(c)][0] +
                          static_cast<double>(l) * layout_.positions[static_cast<std::size_t>(c)][1]);
          basis[static_cast<std::size_t>((k * K + l) * C + c)] = std::cos(phase);
          basis[static_cast<std::size_t>((K * K + k * K + l) * C + c)] = std::sin(phase);
        }
    fourier_basis_ = Tensor({KK2, C}, std::move(basis));
  }

  Rng rng_spatial(seed, 1), rng_conv(seed, 2), rng_rnn(seed, 3), rng_final(seed, 4);

  Tensor coeffs0 = Tensor::randn({D1, KK2}, rng_spatial, 1.0 / std::sqrt(static_cast<double>(KK2)));
  if (cfg_.spatial_mode == SpatialMode::Shared) {
    spatial_coeffs_.push_back(register_param("spatial.coeffs", coeffs0));
  } else {
    for (const auto& s : subjects_)
      spatial_coeffs_.push_back(register_param("spatial.coeffs." + s, copy_of(coeffs0)));
  }

  switch (cfg_.subject_mode) {
    case SubjectMode::Shared:
      subject_shared_ = register_param("subject.shared", identity_matrix(D1));
      break;
    case SubjectMode::SubjectLayer:
      for (const auto& s : subjects_)
        subject_layer_.push_back(register_param("subject.layer." + s, identity_matrix(D1)));
      break;
    case SubjectMode::SubjectEmbedding:
      subject_shared_ = register_param("subject.shared", identity_matrix(D1));
      for (const auto& s : subjects_)
        subject_emb_.push_back(register_param("subject.emb." + s, Tensor::zeros({D1})));
      break;
    case SubjectMode::SubjectAttention:
      subject_shared_ = register_param("subject.shared", identity_matrix(D1));
      for (const auto& s : subjects_)
        subject_attn_score_.push_back(register_param("subject.attn." + s, Tensor::zeros({D1})));
      break;
  }

  for (int k = 0; k < cfg_.n_blocks; ++k) {
    const std::int64_t in = (k == 0) ? D1 : D2;
    const std::int64_t wide = 2 * D2;
    std::string p = "conv" + std::to_string(k) + ".";
    ConvBlock b;
    b.w1 = register_param(p + "w1",
                          Tensor::randn({wide, in, 3}, rng_conv, 1.0 / std::sqrt(3.0 * in)));
    b.b1 = register_param(p + "b1", Tensor::zeros({wide}));
    b.gamma1 = register_param(p + "gamma1", Tensor({wide}, 1.0));
    b.beta1 = register_param(p + "beta1", Tensor::zeros({wide}));
    b.w2 = register_param(p + "w2",
                          Tensor::randn({wide, wide, 3}, rng_conv, 1.0 / std::sqrt(3.0 * wide)));
    b.b2 = register_param(p + "b2", Tensor::zeros({wide}));
    b.gamma2 = register_param(p + "gamma2", Tensor({wide}, 1.0));
    b.beta2 = register_param(p + "beta2", Tensor::zeros({wide}));
    b.wskip = register_param(p + "wskip",
                             Tensor::randn({wide, in, 1}, rng_conv, 1.0 / std::sqrt(static_cast<double>(in))));
    b.bn1.init(wide);
    b.bn2.init(wide);
    blocks_.push_back(std::move(b));
  }

  const bool bi = cfg_.rnn_mode == RnnMode::BidirectionalAttention;
  const double lim = 1.0 / std::sqrt(static_cast<double>(H));
  for (int r = 0; r < 2; ++r) {
    std::string p = "rnn" + std::to_string(r) + ".";
    RnnBlock b;
    auto make_dir = [&](const std::string& dp) {
      LstmWeights w;
      w.w_x = register_param(dp + "w_x", uniform_tensor({4 * H, D2}, rng_rnn, lim));
      w.w_h = register_param(dp + "w_h", uniform_tensor({4 * H, H}, rng_rnn, lim));
      Tensor bias = Tensor::zeros({4 * H});
      for (std::int64_t i = H; i < 2 * H; ++i) bias.at(i) = 1.0;
      w.bias = register_param(dp + "bias", std::move(bias));
      return w;
    };
    b.fwd = make_dir(p + "fwd.");
    if (bi) b.bwd = make_dir(p + "bwd.");
    const std::int64_t proj_in = bi ? 2 * H : H;
    b.proj_w = register_param(p + "proj.w",
                              Tensor::randn({D2, proj_in}, rng_rnn, 1.0 / std::sqrt(static_cast<double>(proj_in))));
    b.proj_b = register_param(p + "proj.b", Tensor::zeros({D2}));
    if (bi) {
      double s = 1.0 / std::sqrt(static_cast<double>(D2));
      b.wq = register_param(p + "wq", Tensor::randn({D2, D2}, rng_rnn, s));
      b.wk = register_param(p + "wk", Tensor::randn({D2, D2}, rng_rnn, s));
      b.wv = register_param(p + "wv", Tensor::randn({D2, D2}, rng_rnn, s));
    }
    rnn_blocks_.push_back(std::move(b));
  }

  fin_w1 = register_param("final.w1",
                          Tensor::randn({2 * D2, D2}, rng_final, 1.0 / std::sqrt(static_cast<double>(D2))));
  fin_b1 = register_param("final.b1", Tensor::zeros({2 * D2}));
  fin_w2 = register_param("final.w2",
                          Tensor::randn({cfg_.f_out, 2 * D2}, rng_final, 1.0 / std::sqrt(2.0 * D2)));
  fin_b2 = register_param("final.b2", Tensor::zeros({cfg_.f_out}));
}

Tensor Model::register_param(const std::string& name, Tensor t) {
  t.set_requires_grad(true);
  params_.emplace_back(name, t);
  return t;
}

int Model::subject_index(const std::string& subject) const {
  auto it = std::find(subjects_.begin(), subjects_.end(), subject);
  if (it == subjects_.end()) throw DataError("unknown subject '" + subject + "'");
  return static_cast<int>(it - subjects_.begin());
}

Tensor Model::spatial_attention(const Tensor& x, const std::string& subject, bool train,
                                Rng& rng) {
  if (x.rank() != 2 || x.dim(0) != cfg_.c_in)
    throw ConfigError("spatial_attention: input " + shape_str(x.shape()) + ", expected (" +
                      std::to_string(cfg_.c_in) + "xT)");
  const Tensor& coeffs =
      spatial_coeffs_[cfg_.spatial_mode == SpatialMode::Shared
                          ? 0
                          : static_cast<std::size_t>(subject_index(subject))];
  Tensor scores = matmul(coeffs, fourier_basis_);
  if (train && cfg_.spatial_dropout_p > 0.0 && rng.uniform() < cfg_.spatial_dropout_p) {
    double cx = rng.uniform(), cy = rng.uniform();
    double r2 = cfg_.spatial_dropout_radius * cfg_.spatial_dropout_radius;
    std::vector<bool> masked(static_cast<std::size_t>(cfg_.c_in), false);
    std::size_t n_masked = 0;
    for (std::size_t c = 0; c < masked.size(); ++c) {
      double dx = layout_.positions[c][0] - cx;
      double dy = layout_.positions[c][1] - cy;
      if (dx * dx + dy * dy <= r2) {
        masked[c] = true;
        ++n_masked;
      }
    }
    if (n_masked > 0 && n_masked < masked.size()) {
      Tensor mask = Tensor::zeros(scores.shape());
      for (std::int64_t d = 0; d < cfg_.d1; ++d)
        for (std::int64_t c = 0; c < cfg_.c_in; ++c)
          if (masked[static_cast<std::size_t>(c)]) mask.at2(d, c) = -1e9;
      scores = add(scores, mask);
    }
  }
  return matmul(softmax_rows(scores), x);
}

Tensor Model::spatial_weights(const std::string& subject) {
  const Tensor& coeffs =
      spatial_coeffs_[cfg_.spatial_mode == SpatialMode::Shared
                          ? 0
                          : static_cast<std::size_t>(subject_index(subject))];
  return softmax_rows(matmul(coeffs, fourier_basis_));
}

Tensor Model::subject_stage(const Tensor& x, const std::string& subject) {
  auto i = static_cast<std::size_t>(subject_index(subject));
  switch (cfg_.subject_mode) {
    case SubjectMode::Shared:
      return matmul(subject_shared_, x);
    case SubjectMode::SubjectLayer:
      return matmul(subject_layer_[i], x);
    case SubjectMode::SubjectEmbedding:
      return matmul(subject_shared_, add_bias_cols(x, subject_emb_[i]));
    case SubjectMode::SubjectAttention: {
      Tensor gate = scale(softmax_rows(subject_attn_score_[i]), static_cast<double>(cfg_.d1));
      return matmul(subject_shared_, mul_bias_cols(x, gate));
    }
  }
  throw ConfigError("bad subject mode");
}

Tensor Model::conv_sequence(const Tensor& x, bool train) {
  Tensor h = x;
  for (int k = 0; k < cfg_.n_blocks; ++k) {
    auto& b = blocks_[static_cast<std::size_t>(k)];
    auto [d1, d2] = ModelConfig::block_dilations(k);
    const std::int64_t T = h.dim(1), wide = 2 * cfg_.d2;
    auto bn = [&](const Tensor& t, const Tensor& g, const Tensor& be, BatchNormState& st) {
      return reshape(batchnorm1d(reshape(t, {1, wide, T}), g, be, st, train), {wide, T});
    };
    Tensor a = gelu(bn(conv1d(h, b.w1, d1, b.b1), b.gamma1, b.beta1, b.bn1));
    Tensor c = gelu(bn(conv1d(a, b.w2, d2, b.b2), b.gamma2, b.beta2, b.bn2));
    h = glu(add(c, conv1d(h, b.wskip, 1)));
  }
  return h;
}

Tensor Model::dual_path_rnn(const Tensor& x) {
  const std::int64_t D2 = cfg_.d2, H = cfg_.rnn_hidden, T = x.dim(1);
  const bool bi = cfg_.rnn_mode == RnnMode::BidirectionalAttention;
  Tensor h = x;
  for (auto& b : rnn_blocks_) {
    auto run_dir = [&](const LstmWeights& w, bool reverse) {
      LstmState st{Tensor::zeros({H}), Tensor::zeros({H})};
      std::vector<Tensor> cols(static_cast<std::size_t>(T));
      for (std::int64_t i = 0; i < T; ++i) {
        std::int64_t t = reverse ? T - 1 - i : i;
        st = recurrent_cell(reshape(slice_cols(h, t, 1), {D2}), st, w);
        cols[static_cast<std::size_t>(t)] = st.h;
      }
      return stack_cols(cols);
    };
    Tensor y = run_dir(b.fwd, false);
    if (bi) y = concat_rows({y, run_dir(b.bwd, true)});
    y = add_bias_cols(matmul(b.proj_w, y), b.proj_b);
    if (bi) {
      Tensor q = matmul(b.wq, y), k = matmul(b.wk, y), v = matmul(b.wv, y);
      Tensor attn = softmax_rows(scale(matmul(transpose2d(q), k),
                                       1.0 / std::sqrt(static_cast<double>(D2))));
      y = add(y, matmul(v, transpose2d(attn)));
    }
    h = y;
  }
  return h;
}

Tensor Model::final_projection(const Tensor& x) {
  Tensor h = gelu(add_bias_cols(matmul(fin_w1, x), fin_b1));
  return add_bias_cols(matmul(fin_w2, h), fin_b2);
}

Tensor Model::forward(const Tensor& x, const std::string& subject, bool train, Rng& rng) {
  Tensor h = spatial_attention(x, subject, train, rng);
  check_finite(h, "spatial_attention");
  h = subject_stage(h, subject);
  check_finite(h, "subject_stage");
  h = conv_sequence(h, train);
  check_finite(h, "conv_sequence");
  h = dual_path_rnn(h);
  check_finite(h, "dual_path_rnn");
  h = final_projection(h);
  check_finite(h, "final_projection");
  return h;
}

std::vector<Tensor> Model::parameters() {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (auto& [name, t] : params_) out.push_back(t);
  return out;
}

std::vector<std::string> Model::subject_param_names(const std::string& subject) const {
  subject_index(subject);
  std::vector<std::string> out;
  const std::string suffix = "." + subject;
  for (const auto& [name, t] : params_)
    if (name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
      out.push_back(name);
  return out;
}

Tensor Model::param(const std::string& name) const {
  for (const auto& [n, t] : params_)
    if (n == name) return t;
  throw ConfigError("no parameter named '" + name + "'");
}

std::map<std::string, std::vector<double>*> Model::buffers() {
  std::map<std::string, std::vector<double>*> out;
  for (int k = 0; k < cfg_.n_blocks; ++k) {
    auto& b = blocks_[static_cast<std::size_t>(k)];
    std::string p = "conv" + std::to_string(k) + ".";
    out[p + "bn1.mean"] = &b.bn1.running_mean;
    out[p + "bn1.var"] = &b.bn1.running_var;
    out[p + "bn2.mean"] = &b.bn2.running_mean;
    out[p + "bn2.var"] = &b.bn2.running_var;
  }
  return out;
}

void Model::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

// ---- checkpoints ----

namespace {

json config_to_json(const ModelConfig& c) {
  json j;
  j["c_in"] = c.c_in;
  j["d1"] = c.d1;
  j["d2"] = c.d2;
  j["n_blocks"] = c.n_blocks;
  j["k_harmonics"] = c.k_harmonics;
  j["spatial_dropout_p"] = c.spatial_dropout_p;
  j["spatial_dropout_radius"] = c.spatial_dropout_radius;
  j["subject_mode"] = to_string(c.subject_mode);
  j["spatial_mode"] = to_string(c.spatial_mode);
  j["rnn_mode"] = to_string(c.rnn_mode);
  j["rnn_hidden"] = c.rnn_hidden;
  j["attn_heads"] = c.attn_heads;
  j["f_out"] = c.f_out;
  return j;
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.c_in = j.at("c_in");
  c.d1 = j.at("d1");
  c.d2 = j.at("d2");
  c.n_blocks = j.at("n_blocks");
  c.k_harmonics = j.at("k_harmonics");
  c.spatial_dropout_p = j.at("spatial_dropout_p");
  c.spatial_dropout_radius = j.at("spatial_dropout_radius");
  c.subject_mode = subject_mode_from_string(j.at("subject_mode"));
  c.spatial_mode = spatial_mode_from_string(j.at("spatial_mode"));
  c.rnn_mode = rnn_mode_from_string(j.at("rnn_mode"));
  c.rnn_hidden = j.at("rnn_hidden");
  c.attn_heads = j.at("attn_heads");
  c.f_out = j.at("f_out");
  return c;
}

std::string blob_name(const std::string& param_name) {
  std::string s = param_name;
  std::replace(s.begin(), s.end(), '.', '_');
  return s + ".bin";
}

json load_manifest(const std::string& dir) {
  fs::path path = fs::path(dir) / "checkpoint.json";
  if (!fs::exists(path)) throw DataError("checkpoint manifest not found: " + path.string());
  json manifest;
  try {
    manifest = json::parse(read_file_text(path.string()));
  } catch (const json::exception& e) {
    throw DataError("checkpoint manifest unreadable: " + std::string(e.what()));
  }
  if (manifest.value("format", "") != "neurodecode-checkpoint-v1")
    throw DataError("unsupported checkpoint format in " + path.string());
  return manifest;
}

}  // namespace

void save_checkpoint(const Model& m, const std::string& dir, std::int64_t step,
                     const CheckpointExtra& extra) {
  fs::path target(dir);
  fs::path tmp(dir + ".tmp");
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  json manifest;
  manifest["format"] = "neurodecode-checkpoint-v1";
  manifest["step"] = step;
  manifest["config"] = config_to_json(m.config());
  manifest["subjects"] = m.subjects();
  json layout = json::array();
  for (const auto& p : m.layout().positions) layout.push_back({p[0], p[1]});
  manifest["layout"] = std::move(layout);

  json params = json::array();
  for (const auto& [name, t] : m.named_parameters()) {
    std::string file = blob_name(name);
    write_doubles_file((tmp / file).string(), t.data());
    params.push_back({{"name", name},
                      {"shape", t.shape()},
                      {"file", file},
                      {"hash", fnv1a64_doubles(t.data())}});
  }
  manifest["params"] = std::move(params);

  json buffers = json::object();
  for (auto& [name, vec] : const_cast<Model&>(m).buffers()) buffers[name] = *vec;
  manifest["buffers"] = std::move(buffers);

  json jextra = json::object();
  jextra["arrays"] = json::object();
  for (const auto& [k, v] : extra.arrays) jextra["arrays"][k] = v;
  jextra["strings"] = json::object();
  for (const auto& [k, v] : extra.strings) jextra["strings"][k] = v;
  manifest["extra"] = std::move(jextra);

  write_file_text((tmp / "checkpoint.json").string(), manifest.dump(2) + "\n");
  fs::remove_all(target);
  fs::rename(tmp, target);
}

CheckpointInfo load_checkpoint(Model& m, const std::string& dir) {
  json manifest = load_manifest(dir);

  json want = config_to_json(m.config());
  const json& have = manifest.at("config");
  std::vector<std::string> diffs;
  for (auto it = want.begin(); it != want.end(); ++it) {
    if (!have.contains(it.key()))
      diffs.push_back(it.key() + ": missing in checkpoint");
    else if (have.at(it.key()) != it.value())
      diffs.push_back(it.key() + ": checkpoint has " + have.at(it.key()).dump() +
                      ", model has " + it.value().dump());
  }
  if (!diffs.empty()) {
    std::string msg = "checkpoint config mismatch:";
    for (const auto& d : diffs) msg += "\n  " + d;
    throw ConfigError(msg);
  }
  if (manifest.at("subjects").get<std::vector<std::string>>() != m.subjects())
    throw ConfigError("checkpoint subject list differs from model");

  for (const auto& jp : manifest.at("params")) {
    std::string name = jp.at("name");
    Tensor t = m.param(name);
    Shape shape = jp.at("shape").get<Shape>();
    if (shape != t.shape())
      throw ConfigError("checkpoint shape mismatch for " + name + ": " + shape_str(shape) +
                        " vs " + shape_str(t.shape()));
    auto blob = read_doubles_file((fs::path(dir) / jp.at("file").get<std::string>()).string());
    if (blob.size() != t.data().size())
      throw DataError("checkpoint blob size mismatch for " + name);
    if (fnv1a64_doubles(blob) != jp.at("hash").get<std::uint64_t>())
      throw DataError("checkpoint integrity failure: hash mismatch for " + name);
    t.data() = std::move(blob);
  }

  auto bufs = m.buffers();
  for (auto it = manifest.at("buffers").begin(); it != manifest.at("buffers").end(); ++it) {
    auto found = bufs.find(it.key());
    if (found == bufs.end()) throw ConfigError("checkpoint has unknown buffer " + it.key());
    auto vals = it.value().get<std::vector<double>>();
    if (vals.size() != found->second->size())
      throw DataError("checkpoint buffer size mismatch for " + it.key());
    *found->second = std::move(vals);
  }

  CheckpointInfo info;
  info.step = manifest.at("step");
  const json& jextra = manifest.at("extra");
  for (auto it = jextra.at("arrays").begin(); it != jextra.at("arrays").end(); ++it)
    info.extra.arrays[it.key()] = it.value().get<std::vector<double>>();
  for (auto it = jextra.at("strings").begin(); it != jextra.at("strings").end(); ++it)
    info.extra.strings[it.key()] = it.value().get<std::string>();
  return info;
}

Model model_from_checkpoint(const std::string& dir, std::uint64_t seed) {
  json manifest = load_manifest(dir);
  ModelConfig cfg = config_from_json(manifest.at("config"));
  auto subjects = manifest.at("subjects").get<std::vector<std::string>>();
  SensorLayout layout;
  for (const auto& jp : manifest.at("layout"))
    layout.positions.push_back({jp.at(0).get<double>(), jp.at(1).get<double>()});
  Model m(cfg, subjects, layout, seed);
  load_checkpoint(m, dir);
  return m;
}

}  // namespace nd
