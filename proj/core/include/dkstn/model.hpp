#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "dkstn/dkpm.hpp"
#include "dkstn/param_io.hpp"
#include "dkstn/srcm.hpp"
#include "dkstn/taam.hpp"

namespace dkstn {

struct ModelConfig {
  std::size_t lat = 13;
  std::size_t lon = 144;
  std::size_t channels = 4;
  SrcmConfig srcm;
  TaamConfig taam;

  void validate() const;
  std::size_t feature_dim() const;  // D_in
};

struct TrainingMeta {
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  std::uint64_t seed = 0;
  std::vector<double> train_loss;  // index 0 = before training
  std::vector<double> valid_loss;
};

/// Full parameter set: input batchnorm, SRCM, encoder, attention, decoder
/// and head, plus the preprocessing fit used at inference.
class DkstnModel {
 public:
  DkstnModel() = default;
  DkstnModel(const ModelConfig& config, std::uint64_t seed);

  ModelConfig config;
  BatchNormState bn{4};
  SrcmWeights srcm;
  LstmWeights encoder;
  AttentionWeights attention;
  DecoderStack decoder;
  std::optional<HarmonicFit> harmonics;
  TrainingMeta meta;

  /// Stable order; names are unique.
  std::vector<Parameter*> parameters();
  std::size_t parameter_count();
  std::size_t horizon() const { return decoder.horizon; }
  void zero_grad();

  /// x is preprocessed [B, k, l, w, c]; returns [B, horizon, 2].
  Var forward(Var x);
  /// Inference on preprocessed inputs with frozen batchnorm statistics,
  /// evaluated in chunks of `batch` samples.
  Tensor predict(const Tensor& inputs, std::size_t batch = 64);

  std::vector<NamedTensor> to_entries();
  static DkstnModel from_entries(const std::vector<NamedTensor>& entries);
  void save(const std::filesystem::path& path);
  static DkstnModel load(const std::filesystem::path& path);
};

/// Number of trainable scalars implied by a configuration.
std::size_t expected_parameter_count(const ModelConfig& config);

}  // namespace dkstn
