#pragma once

#include <map>
#include <string>
#include <vector>

#include "neurodecode/dataio.hpp"
#include "neurodecode/ops.hpp"
#include "neurodecode/tensor.hpp"

namespace nd {

enum class SubjectMode { Shared, SubjectLayer, SubjectEmbedding, SubjectAttention };
enum class SpatialMode { Shared, PerSubject };
enum class RnnMode { Unidirectional, BidirectionalAttention };

std::string to_string(SubjectMode m);
std::string to_string(SpatialMode m);
std::string to_string(RnnMode m);
SubjectMode subject_mode_from_string(const std::string& s);
SpatialMode spatial_mode_from_string(const std::string& s);
RnnMode rnn_mode_from_string(const std::string& s);

struct ModelConfig {
  int c_in = 0;    // input sensors after channel selection
  int d1 = 270;    // virtual channels after spatial attention
  int d2 = 320;    // conv block width
  int n_blocks = 5;
  int k_harmonics = 32;  // Fourier grid resolution per axis
  double spatial_dropout_p = 0.1;
  double spatial_dropout_radius = 0.1;
  SubjectMode subject_mode = SubjectMode::SubjectLayer;
  SpatialMode spatial_mode = SpatialMode::Shared;
  RnnMode rnn_mode = RnnMode::Unidirectional;
  int rnn_hidden = 128;
  int attn_heads = 1;
  int f_out = 0;  // audio feature channels

  void validate() const;
  // Dilations for block k: (2^{2k mod 5}, 2^{2k+1 mod 5}).
  static std::pair<std::int64_t, std::int64_t> block_dilations(int k);
};

// f: R^{C x T} -> R^{F x T}; spatial attention -> subject stage ->
// dilated conv blocks -> recurrent stage -> 1x1 projections.
class Model {
 public:
  Model(ModelConfig cfg, std::vector<std::string> subjects, SensorLayout layout,
        std::uint64_t seed);

  Tensor forward(const Tensor& x, const std::string& subject, bool train, Rng& rng);

  // stages exposed for unit testing
  Tensor spatial_attention(const Tensor& x, const std::string& subject, bool train, Rng& rng);
  Tensor subject_stage(const Tensor& x, const std::string& subject);
  Tensor conv_sequence(const Tensor& x, bool train);
  Tensor dual_path_rnn(const Tensor& x);
  Tensor final_projection(const Tensor& x);

  // Attention weights over input sensors for one subject, [D1 x C] rows
  // summing to 1 (no dropout applied).
  Tensor spatial_weights(const std::string& subject);

  const ModelConfig& config() const { return cfg_; }
  const std::vector<std::string>& subjects() const { return subjects_; }
  const SensorLayout& layout() const { return layout_; }

  std::vector<Tensor> parameters();
  const std::vector<std::pair<std::string, Tensor>>& named_parameters() const { return params_; }
  // Parameters owned exclusively by one subject.
  std::vector<std::string> subject_param_names(const std::string& subject) const;
  Tensor param(const std::string& name) const;
  std::map<std::string, std::vector<double>*> buffers();

  void zero_grad();

 private:
  int subject_index(const std::string& subject) const;
  Tensor register_param(const std::string& name, Tensor t);

  ModelConfig cfg_;
  std::vector<std::string> subjects_;
  SensorLayout layout_;
  std::vector<std::pair<std::string, Tensor>> params_;

  Tensor fourier_basis_;               // [2K^2 x C]
  std::vector<Tensor> spatial_coeffs_;  // 1 or n_subjects entries, [D1 x 2K^2]
  std::vector<Tensor> subject_layer_, subject_emb_, subject_attn_score_;
  Tensor subject_shared_;  // [D1 x D1]

  struct ConvBlock {
    Tensor w1, b1, w2, b2, wskip;
    Tensor gamma1, beta1, gamma2, beta2;
    BatchNormState bn1, bn2;
  };
  std::vector<ConvBlock> blocks_;

  struct RnnBlock {
    LstmWeights fwd, bwd;
    Tensor proj_w, proj_b;     // [D2 x H] or [D2 x 2H]
    Tensor wq, wk, wv;         // self-attention maps, [D2 x D2]
  };
  std::vector<RnnBlock> rnn_blocks_;

  Tensor fin_w1, fin_b1, fin_w2, fin_b2;
};

// ---- checkpoints (JSON manifest + one float64 LE blob per parameter) ----
struct CheckpointExtra {
  std::map<std::string, std::vector<double>> arrays;
  std::map<std::string, std::string> strings;
};

void save_checkpoint(const Model& m, const std::string& dir, std::int64_t step,
                     const CheckpointExtra& extra = {});

struct CheckpointInfo {
  std::int64_t step = 0;
  CheckpointExtra extra;
};

// Loads parameters into an existing model; throws ConfigError with a diff
// listing when the checkpoint's config or shapes do not match.
CheckpointInfo load_checkpoint(Model& m, const std::string& dir);

// Builds the model (config, subjects, layout) recorded in the checkpoint.
Model model_from_checkpoint(const std::string& dir, std::uint64_t seed = 0);

}  // namespace nd
