#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "promptdt/tensor.hpp"
#include "promptdt/trajectory.hpp"

namespace promptdt {

/// Input ablations. PromptDT sees prompt and history with reward-to-go;
/// MtOrl drops the prompt; PromptMtBc drops history reward-to-go; MtBc drops both.
enum class Variant { PromptDT, MtOrl, PromptMtBc, MtBc };

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);
bool variant_uses_prompt(Variant v);
bool variant_uses_history_rtg(Variant v);

/// Rewrites a full (prompt + rtg everywhere) input into the variant's layout:
/// MtOrl drops the prompt, PromptMtBc drops the rtg slot of history tuples,
/// MtBc drops both.
ModelInput apply_variant(Variant v, ModelInput input);

#ifdef PROMPTDT_TRAIN_DOUBLE
using Real = double;
#else
using Real = float;
#endif

struct ModelConfig {
  std::size_t state_dim = 4;
  std::size_t action_dim = 2;
  std::size_t embed_dim = 128;
  std::size_t n_layers = 3;
  std::size_t n_heads = 1;
  std::size_t context_len = 20;     // K
  std::size_t max_prompt_len = 20;  // largest K* the model accepts
  std::size_t max_ep_len = 100;     // rows of each timestep table
  std::string activation = "relu";
  double rtg_scale = 1.0;
  double ln_eps = 1e-5;
  Variant variant = Variant::PromptDT;
  // Frozen state normalization; empty means identity.
  std::vector<double> state_mean;
  std::vector<double> state_std;

  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

template <typename T>
struct LinearWeights {
  Tensor<T> weight;  // [in x out]
  Tensor<T> bias;    // [out]
};

template <typename T>
struct NormWeights {
  Tensor<T> gain;
  Tensor<T> bias;
};

template <typename T>
struct BlockWeights {
  NormWeights<T> ln_attn;
  LinearWeights<T> query, key, value, attn_out;
  NormWeights<T> ln_mlp;
  LinearWeights<T> mlp_in, mlp_out;
};

/// Token embeddings for one part of the sequence (prompt or history).
template <typename T>
struct TokenEmbedding {
  LinearWeights<T> rtg, state, action;
  Tensor<T> timestep;  // [max_ep_len x embed_dim]
};

/// All learnable parameters. Copies are deep.
template <typename T>
class ModelWeights {
 public:
  ModelConfig config;
  TokenEmbedding<T> prompt_embed;
  TokenEmbedding<T> history_embed;
  NormWeights<T> embed_ln;
  std::vector<BlockWeights<T>> blocks;
  NormWeights<T> final_ln;
  LinearWeights<T> action_head;

  ModelWeights() = default;
  ModelWeights(const ModelWeights& other);
  ModelWeights& operator=(const ModelWeights& other);
  ModelWeights(ModelWeights&&) noexcept = default;
  ModelWeights& operator=(ModelWeights&&) noexcept = default;

  /// Gaussian(0, 0.02) matrices, zero biases, unit norm gains.
  static ModelWeights initialize(const ModelConfig& config, std::uint64_t seed);
  /// Every parameter zero, norm gains included.
  static ModelWeights zeros(const ModelConfig& config);

  /// Parameters in checkpoint order.
  std::vector<std::pair<std::string, Tensor<T>*>> named_parameters();
  std::vector<std::pair<std::string, const Tensor<T>*>> named_parameters() const;
  std::vector<Tensor<T>> parameters();

  void zero_grad();
  std::size_t parameter_count() const;
  bool all_finite() const;

  template <typename U>
  ModelWeights<U> cast() const;
};

/// Embedded token stream [B*L x embed_dim] for a batch of equal-layout inputs.
template <typename T>
struct EmbeddedTokens {
  Tensor<T> tokens;
  PaddingMask mask;
  std::vector<std::int64_t> state_rows;       // one per tuple, batch-major
  std::vector<std::uint8_t> tuple_is_real;   // 1 unless the tuple is padding
};

template <typename T>
EmbeddedTokens<T> embed_tokens(Tape<T>& tape, const ModelWeights<T>& w,
                               std::span<const ModelInput> batch);

/// Predicted actions, one row per tuple: [B*(K*+K) x action_dim].
template <typename T>
Tensor<T> forward(Tape<T>& tape, const ModelWeights<T>& w, std::span<const ModelInput> batch);

/// Action predicted at the final state token.
template <typename T>
std::vector<double> predict_next_action(const ModelWeights<T>& w, const ModelInput& input);

/// predict_next_action for a batch in one pass.
template <typename T>
std::vector<std::vector<double>> predict_next_actions(const ModelWeights<T>& w,
                                                      std::span<const ModelInput> batch);

/// Mean squared action error over every non-padded tuple, prompt included.
template <typename T>
Tensor<T> compute_loss(Tape<T>& tape, const ModelWeights<T>& w, std::span<const ModelInput> batch);

/// Raised for malformed checkpoint files.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

template <typename T>
void save_checkpoint(const ModelWeights<T>& w, const std::filesystem::path& path);

template <typename T>
ModelWeights<T> load_checkpoint(const std::filesystem::path& path);

}  // namespace promptdt
