#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "quarc/dataset.hpp"
#include "quarc/fusion.hpp"

namespace quarc {

enum class ImageEncoder { builtin_qcnn, external_features };

struct ModelConfig {
  int variant = 1;
  Algebra algebra = Algebra::quaternion;
  std::uint64_t seed = 0;
  std::size_t embed_dim = 100;
  std::size_t max_len = 150;
  std::size_t conv_filters = 128;  // quaternion units
  std::size_t conv_width = 5;
  std::size_t common_dim = 16;  // quaternion units
  ImageEncoder image_encoder = ImageEncoder::builtin_qcnn;
  std::size_t image_filters1 = 8;
  std::size_t image_filters2 = 16;
  std::size_t feature_dim = 64;  // reals, external_features only
  double dropout = 0.35;
  double lr = 1e-3;
  std::size_t epochs = 20;
  std::size_t batch = 128;

  // Throws ConfigError on out-of-range values.
  void validate() const;
  // Every key, defaults included, as `key=value` lines.
  std::string to_text() const;

  bool uses_tweet() const { return variant != 7; }
  bool uses_img_text() const { return variant <= 5; }
  bool uses_image() const { return variant != 6; }
};

// `key=value` lines; blank lines and lines starting with '#' are ignored.
// Unknown keys are rejected. When no seed is given, QUARC_SEED is used.
ModelConfig parse_config(std::string_view text);
ModelConfig load_config(const std::filesystem::path& path);

// One sample prepared for a model: token rows (padding rows are not
// stored) and the image or feature tensor in the model's algebra.
struct EncodedSample {
  TextRows tweet;
  TextRows img_text;
  Tensor image;
  int label = 0;
  std::uint64_t key = 0;  // fnv1a(id), mixed into dropout keys
};

EncodedSample encode_sample(const Sample& s, const Dataset& ds, const ModelConfig& cfg);
std::vector<EncodedSample> encode_samples(const Dataset& ds, const std::vector<std::size_t>& which,
                                          const ModelConfig& cfg);

struct TextPathway {
  Layer conv;
  Layer mlp;
  DropoutSite drop;
};

struct ImagePathway {
  std::optional<Layer> conv1;
  std::optional<Layer> conv2;
  Layer proj;
  DropoutSite drop;
};

class Model {
 public:
  static Model build(const ModelConfig& cfg);

  // Real logits [2].
  NodeId logits(Tape& tape, const EncodedSample& x, Mode mode, std::uint64_t dropout_key) const;
  // Class probabilities in eval mode.
  std::array<double, 2> predict(const EncodedSample& x) const;

  const ModelConfig& config() const noexcept { return cfg_; }
  ParameterSet& params() noexcept { return params_; }
  const ParameterSet& params() const noexcept { return params_; }

 private:
  struct TextOut {
    NodeId c;  // conv output sequence, kept for attention
    NodeId t;  // pathway vector
    std::vector<bool> mask;
  };
  struct ImageOut {
    NodeId p;        // pooled image vector
    NodeId p_prime;  // projected vector before dropout
    NodeId p_drop;   // projected vector after dropout
  };

  TextOut run_text(Tape& tape, const TextPathway& path, const TextRows& rows, Mode mode, std::uint64_t key) const;
  ImageOut run_image(Tape& tape, const Tensor& image, Mode mode, std::uint64_t key) const;

  ModelConfig cfg_;
  ParameterSet params_;
  std::optional<TextPathway> tweet_, img_text_;
  std::optional<ImagePathway> image_;
  std::optional<AttentionBlock> att_tt_, att_tp_;
  std::optional<GatedSumBlock> gs_tt_, gs_tp_, gs_tw_;
  ConcatHead head_;
};

// Trainable real scalars (four per quaternion entry).
std::size_t count_params(const Model& model);

struct RatioRow {
  int variant = 0;
  std::size_t quaternion = 0;
  std::size_t real = 0;
  double ratio = 0.0;
};

// Builds every variant in both algebras from one config.
std::vector<RatioRow> ratio_report(const ModelConfig& cfg);

}  // namespace quarc
