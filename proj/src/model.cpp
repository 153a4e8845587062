#include "promptdt/model.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <random>
#include <stdexcept>

#include "binary_io.hpp"

namespace promptdt {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::PromptDT: return "prompt-dt";
    case Variant::MtOrl: return "mt-orl";
    case Variant::PromptMtBc: return "prompt-mt-bc";
    case Variant::MtBc: return "mt-bc";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  for (auto v : {Variant::PromptDT, Variant::MtOrl, Variant::PromptMtBc, Variant::MtBc}) {
    if (variant_name(v) == name) return v;
  }
  throw std::invalid_argument("unknown variant '" + std::string(name) + "'");
}

bool variant_uses_prompt(Variant v) { return v == Variant::PromptDT || v == Variant::PromptMtBc; }
bool variant_uses_history_rtg(Variant v) { return v == Variant::PromptDT || v == Variant::MtOrl; }

ModelInput apply_variant(Variant v, ModelInput input) {
  if (!variant_uses_prompt(v)) input.prompt.segments.clear();
  input.prompt_rtg = true;
  input.history_rtg = variant_uses_history_rtg(v);
  rebuild_tokens(input);
  return input;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("model config: " + msg); };
  if (state_dim == 0 || action_dim == 0) fail("state and action dims must be positive");
  if (embed_dim == 0 || n_layers == 0 || n_heads == 0) fail("embed_dim, n_layers, n_heads must be positive");
  if (embed_dim % n_heads != 0) fail("embed_dim " + std::to_string(embed_dim) + " not divisible by n_heads " + std::to_string(n_heads));
  if (context_len == 0) fail("context length K must be positive");
  if (max_ep_len == 0) fail("max_ep_len must be positive");
  if (activation != "relu") fail("unsupported activation '" + activation + "'");
  if (!(rtg_scale > 0.0) || !std::isfinite(rtg_scale)) fail("rtg_scale must be positive");
  if (!(ln_eps > 0.0)) fail("ln_eps must be positive");
  if (!state_mean.empty() && state_mean.size() != state_dim) fail("state_mean has wrong size");
  if (state_mean.size() != state_std.size()) fail("state_mean/state_std size mismatch");
  for (double s : state_std) {
    if (!(s > 0.0)) fail("state_std entries must be positive");
  }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"state_dim", c.state_dim},
                     {"action_dim", c.action_dim},
                     {"embed_dim", c.embed_dim},
                     {"n_layers", c.n_layers},
                     {"n_heads", c.n_heads},
                     {"context_len", c.context_len},
                     {"max_prompt_len", c.max_prompt_len},
                     {"max_ep_len", c.max_ep_len},
                     {"activation", c.activation},
                     {"rtg_scale", c.rtg_scale},
                     {"ln_eps", c.ln_eps},
                     {"variant", std::string(variant_name(c.variant))},
                     {"state_mean", c.state_mean},
                     {"state_std", c.state_std}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  j.at("state_dim").get_to(c.state_dim);
  j.at("action_dim").get_to(c.action_dim);
  j.at("embed_dim").get_to(c.embed_dim);
  j.at("n_layers").get_to(c.n_layers);
  j.at("n_heads").get_to(c.n_heads);
  j.at("context_len").get_to(c.context_len);
  j.at("max_prompt_len").get_to(c.max_prompt_len);
  j.at("max_ep_len").get_to(c.max_ep_len);
  j.at("activation").get_to(c.activation);
  j.at("rtg_scale").get_to(c.rtg_scale);
  j.at("ln_eps").get_to(c.ln_eps);
  c.variant = parse_variant(j.at("variant").get<std::string>());
  j.at("state_mean").get_to(c.state_mean);
  j.at("state_std").get_to(c.state_std);
}

// ---------------------------------------------------------------------------
// Parameters

namespace {

template <typename T>
void list_linear(std::vector<std::pair<std::string, Tensor<T>*>>& out, const std::string& name,
                 LinearWeights<T>& l) {
  out.emplace_back(name + ".weight", &l.weight);
  out.emplace_back(name + ".bias", &l.bias);
}

template <typename T>
void list_norm(std::vector<std::pair<std::string, Tensor<T>*>>& out, const std::string& name,
               NormWeights<T>& n) {
  out.emplace_back(name + ".gain", &n.gain);
  out.emplace_back(name + ".bias", &n.bias);
}

template <typename T>
void list_embedding(std::vector<std::pair<std::string, Tensor<T>*>>& out, const std::string& name,
                    TokenEmbedding<T>& e) {
  list_linear(out, name + ".rtg", e.rtg);
  list_linear(out, name + ".state", e.state);
  list_linear(out, name + ".action", e.action);
  out.emplace_back(name + ".timestep", &e.timestep);
}

template <typename T>
LinearWeights<T> make_linear(std::size_t in, std::size_t out) {
  return {Tensor<T>(Shape{in, out}, true), Tensor<T>(Shape{out}, true)};
}

template <typename T>
NormWeights<T> make_norm(std::size_t d) {
  return {Tensor<T>(Shape{d}, true), Tensor<T>(Shape{d}, true)};
}

template <typename T>
TokenEmbedding<T> make_embedding(const ModelConfig& c) {
  return {make_linear<T>(1, c.embed_dim), make_linear<T>(c.state_dim, c.embed_dim),
          make_linear<T>(c.action_dim, c.embed_dim),
          Tensor<T>(Shape{c.max_ep_len, c.embed_dim}, true)};
}

template <typename T>
ModelWeights<T> allocate(const ModelConfig& c) {
  c.validate();
  ModelWeights<T> w;
  w.config = c;
  const std::size_t d = c.embed_dim;
  w.prompt_embed = make_embedding<T>(c);
  w.history_embed = make_embedding<T>(c);
  w.embed_ln = make_norm<T>(d);
  for (std::size_t l = 0; l < c.n_layers; ++l) {
    BlockWeights<T> b;
    b.ln_attn = make_norm<T>(d);
    b.query = make_linear<T>(d, d);
    b.key = make_linear<T>(d, d);
    b.value = make_linear<T>(d, d);
    b.attn_out = make_linear<T>(d, d);
    b.ln_mlp = make_norm<T>(d);
    b.mlp_in = make_linear<T>(d, 4 * d);
    b.mlp_out = make_linear<T>(4 * d, d);
    w.blocks.push_back(std::move(b));
  }
  w.final_ln = make_norm<T>(d);
  w.action_head = make_linear<T>(d, c.action_dim);
  return w;
}

bool is_gain(const std::string& name) { return name.size() > 5 && name.ends_with(".gain"); }
bool is_bias(const std::string& name) { return name.ends_with(".bias"); }

}  // namespace

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> ModelWeights<T>::named_parameters() {
  std::vector<std::pair<std::string, Tensor<T>*>> out;
  list_embedding(out, "prompt_embed", prompt_embed);
  list_embedding(out, "history_embed", history_embed);
  list_norm(out, "embed_ln", embed_ln);
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    const std::string p = "blocks." + std::to_string(l);
    auto& b = blocks[l];
    list_norm(out, p + ".ln_attn", b.ln_attn);
    list_linear(out, p + ".query", b.query);
    list_linear(out, p + ".key", b.key);
    list_linear(out, p + ".value", b.value);
    list_linear(out, p + ".attn_out", b.attn_out);
    list_norm(out, p + ".ln_mlp", b.ln_mlp);
    list_linear(out, p + ".mlp_in", b.mlp_in);
    list_linear(out, p + ".mlp_out", b.mlp_out);
  }
  list_norm(out, "final_ln", final_ln);
  list_linear(out, "action_head", action_head);
  return out;
}

template <typename T>
std::vector<std::pair<std::string, const Tensor<T>*>> ModelWeights<T>::named_parameters() const {
  auto mutable_list = const_cast<ModelWeights*>(this)->named_parameters();
  std::vector<std::pair<std::string, const Tensor<T>*>> out;
  out.reserve(mutable_list.size());
  for (auto& [name, t] : mutable_list) out.emplace_back(std::move(name), t);
  return out;
}

template <typename T>
std::vector<Tensor<T>> ModelWeights<T>::parameters() {
  std::vector<Tensor<T>> out;
  for (auto& [name, t] : named_parameters()) out.push_back(*t);
  return out;
}

template <typename T>
ModelWeights<T>::ModelWeights(const ModelWeights& other)
    : config(other.config),
      prompt_embed(other.prompt_embed),
      history_embed(other.history_embed),
      embed_ln(other.embed_ln),
      blocks(other.blocks),
      final_ln(other.final_ln),
      action_head(other.action_head) {
  for (auto& [name, t] : named_parameters()) *t = t->clone();
}

template <typename T>
ModelWeights<T>& ModelWeights<T>::operator=(const ModelWeights& other) {
  if (this != &other) {
    ModelWeights copy(other);
    *this = std::move(copy);
  }
  return *this;
}

template <typename T>
ModelWeights<T> ModelWeights<T>::initialize(const ModelConfig& config, std::uint64_t seed) {
  ModelWeights w = allocate<T>(config);
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 0.02);
  for (auto& [name, t] : w.named_parameters()) {
    if (is_gain(name)) {
      for (auto& x : t->data()) x = T(1);
    } else if (is_bias(name)) {
      continue;
    } else {
      for (auto& x : t->data()) x = static_cast<T>(normal(rng));
    }
  }
  return w;
}

template <typename T>
ModelWeights<T> ModelWeights<T>::zeros(const ModelConfig& config) {
  return allocate<T>(config);
}

template <typename T>
void ModelWeights<T>::zero_grad() {
  for (auto& [name, t] : named_parameters()) t->zero_grad();
}

template <typename T>
std::size_t ModelWeights<T>::parameter_count() const {
  std::size_t n = 0;
  for (auto& [name, t] : named_parameters()) n += t->numel();
  return n;
}

template <typename T>
bool ModelWeights<T>::all_finite() const {
  for (auto& [name, t] : named_parameters()) {
    for (T x : t->data()) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

template <typename T>
template <typename U>
ModelWeights<U> ModelWeights<T>::cast() const {
  ModelWeights<U> out = ModelWeights<U>::zeros(config);
  auto src = named_parameters();
  auto dst = out.named_parameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    auto from = src[i].second->data();
    auto to = dst[i].second->data();
    for (std::size_t k = 0; k < from.size(); ++k) to[k] = static_cast<U>(from[k]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Forward pass

namespace {

enum Group : std::size_t { kPrompt = 0, kHistory = 1 };

std::size_t modality_index(Modality m) { return static_cast<std::size_t>(m); }

void check_batch(const ModelConfig& c, std::span<const ModelInput> batch) {
  if (batch.empty()) throw ContractError("model: empty batch");
  const auto& first = batch.front();
  for (const auto& in : batch) {
    if (in.state_dim != c.state_dim || in.action_dim != c.action_dim) {
      throw DimensionError("model: input dims " + std::to_string(in.state_dim) + "/" +
                           std::to_string(in.action_dim) + " do not match config " +
                           std::to_string(c.state_dim) + "/" + std::to_string(c.action_dim));
    }
    if (in.tokens.size() != first.tokens.size() || in.tuple_count() != first.tuple_count() ||
        in.prompt_tuples() != first.prompt_tuples()) {
      throw DimensionError("model: batch mixes token layouts");
    }
    const bool has_prompt = in.prompt_tuples() > 0;
    if (has_prompt && !variant_uses_prompt(c.variant)) {
      throw std::invalid_argument("model: variant " + std::string(variant_name(c.variant)) +
                                  " does not accept a prompt");
    }
    if (in.history_rtg != variant_uses_history_rtg(c.variant)) {
      throw std::invalid_argument("model: history reward-to-go layout does not match variant " +
                                  std::string(variant_name(c.variant)));
    }
    if (in.prompt_tuples() > c.max_prompt_len) {
      throw std::invalid_argument("model: prompt of " + std::to_string(in.prompt_tuples()) +
                                  " steps exceeds max_prompt_len " + std::to_string(c.max_prompt_len));
    }
  }
}

}  // namespace

template <typename T>
EmbeddedTokens<T> embed_tokens(Tape<T>& tape, const ModelWeights<T>& w,
                               std::span<const ModelInput> batch) {
  const ModelConfig& c = w.config;
  check_batch(c, batch);
  const std::size_t B = batch.size();
  const std::size_t L = batch.front().tokens.size();
  const std::size_t n_tuples = batch.front().tuple_count();
  const std::size_t ds = c.state_dim, da = c.action_dim;
  const std::array<std::size_t, 3> width{1, ds, da};

  // Gather the raw values of every non-padded token into one matrix per
  // (group, modality); remember where each token's row lands.
  std::array<std::array<std::vector<T>, 3>, 2> values;
  std::array<std::array<std::size_t, 3>, 2> counts{};
  std::vector<std::array<std::size_t, 3>> placement(B * L);  // group, modality, row
  std::vector<std::int64_t> pos_prompt(B * L, -1), pos_history(B * L, -1);

  EmbeddedTokens<T> out;
  out.mask = PaddingMask(B, L);
  out.state_rows.assign(B * n_tuples, -1);
  out.tuple_is_real.assign(B * n_tuples, 0);

  const bool normalize = !c.state_mean.empty();
  const auto max_t = static_cast<std::int64_t>(c.max_ep_len);
  for (std::size_t b = 0; b < B; ++b) {
    const auto& tokens = batch[b].tokens;
    for (std::size_t i = 0; i < L; ++i) {
      const Token& tok = tokens[i];
      const std::size_t r = b * L + i;
      if (tok.tuple >= n_tuples) throw DimensionError("model: token tuple index out of range");
      if (tok.modality == Modality::State) {
        out.state_rows[b * n_tuples + tok.tuple] = static_cast<std::int64_t>(r);
        out.tuple_is_real[b * n_tuples + tok.tuple] = tok.padded ? 0 : 1;
      }
      if (tok.padded) {
        out.mask.padded[r] = 1;
        placement[r] = {0, 0, static_cast<std::size_t>(-1)};
        continue;
      }
      if (tok.timestep < 0 || tok.timestep >= max_t) {
        throw std::out_of_range("model: timestep " + std::to_string(tok.timestep) +
                                " outside the positional table of max_ep_len=" +
                                std::to_string(c.max_ep_len));
      }
      const std::size_t g = tok.in_prompt ? kPrompt : kHistory;
      const std::size_t m = modality_index(tok.modality);
      if (tok.value.size() != width[m]) throw DimensionError("model: token value has wrong width");
      auto& dst = values[g][m];
      switch (tok.modality) {
        case Modality::ReturnToGo:
          dst.push_back(static_cast<T>(tok.value[0] / c.rtg_scale));
          break;
        case Modality::State:
          for (std::size_t k = 0; k < ds; ++k) {
            const double s = normalize ? (tok.value[k] - c.state_mean[k]) / c.state_std[k] : tok.value[k];
            dst.push_back(static_cast<T>(s));
          }
          break;
        case Modality::Action:
          for (double a : tok.value) dst.push_back(static_cast<T>(a));
          break;
      }
      placement[r] = {g, m, counts[g][m]++};
      (tok.in_prompt ? pos_prompt : pos_history)[r] = tok.timestep;
    }
  }
  for (std::size_t t = 0; t < out.state_rows.size(); ++t) {
    if (out.state_rows[t] < 0) throw DimensionError("model: tuple without a state token");
  }

  // Modality-specific linear embeddings, stacked in (group, modality) order.
  std::vector<Tensor<T>> parts;
  std::array<std::array<std::size_t, 3>, 2> offset{};
  std::size_t total = 0;
  for (std::size_t g = 0; g < 2; ++g) {
    const TokenEmbedding<T>& emb = g == kPrompt ? w.prompt_embed : w.history_embed;
    const std::array<const LinearWeights<T>*, 3> lin{&emb.rtg, &emb.state, &emb.action};
    for (std::size_t m = 0; m < 3; ++m) {
      if (counts[g][m] == 0) continue;
      Tensor<T> raw(Shape{counts[g][m], width[m]}, std::move(values[g][m]));
      parts.push_back(ops::linear(tape, raw, lin[m]->weight, lin[m]->bias));
      offset[g][m] = total;
      total += counts[g][m];
    }
  }
  if (parts.empty()) throw ContractError("model: every token is padding");

  std::vector<std::int64_t> layout(B * L, -1);
  for (std::size_t r = 0; r < B * L; ++r) {
    if (out.mask.padded[r]) continue;
    const auto [g, m, row] = placement[r];
    layout[r] = static_cast<std::int64_t>(offset[g][m] + row);
  }
  Tensor<T> stacked = parts.size() == 1 ? parts.front() : ops::concat_rows<T>(tape, parts);
  Tensor<T> tokens = ops::gather_rows(tape, stacked, layout);

  // Shared per-timestep positional vector; padded slots stay zero.
  Tensor<T> pos = ops::gather_rows(tape, w.history_embed.timestep, pos_history);
  const bool any_prompt = counts[kPrompt][0] + counts[kPrompt][1] + counts[kPrompt][2] > 0;
  if (any_prompt) {
    pos = ops::add(tape, pos, ops::gather_rows(tape, w.prompt_embed.timestep, pos_prompt));
  }
  out.tokens = ops::add(tape, tokens, pos);
  return out;
}

namespace {

template <typename T>
Tensor<T> run_trunk(Tape<T>& tape, const ModelWeights<T>& w, const EmbeddedTokens<T>& emb) {
  const T eps = static_cast<T>(w.config.ln_eps);
  Tensor<T> x = ops::layer_norm(tape, emb.tokens, w.embed_ln.gain, w.embed_ln.bias, eps);
  for (const auto& blk : w.blocks) {
    Tensor<T> h = ops::layer_norm(tape, x, blk.ln_attn.gain, blk.ln_attn.bias, eps);
    Tensor<T> q = ops::linear(tape, h, blk.query.weight, blk.query.bias);
    Tensor<T> k = ops::linear(tape, h, blk.key.weight, blk.key.bias);
    Tensor<T> v = ops::linear(tape, h, blk.value.weight, blk.value.bias);
    Tensor<T> a = ops::causal_attention(tape, q, k, v, emb.mask, w.config.n_heads);
    x = ops::add(tape, x, ops::linear(tape, a, blk.attn_out.weight, blk.attn_out.bias));
    h = ops::layer_norm(tape, x, blk.ln_mlp.gain, blk.ln_mlp.bias, eps);
    h = ops::relu(tape, ops::linear(tape, h, blk.mlp_in.weight, blk.mlp_in.bias));
    x = ops::add(tape, x, ops::linear(tape, h, blk.mlp_out.weight, blk.mlp_out.bias));
  }
  x = ops::layer_norm(tape, x, w.final_ln.gain, w.final_ln.bias, eps);
  Tensor<T> at_states = ops::gather_rows(tape, x, emb.state_rows);
  return ops::linear(tape, at_states, w.action_head.weight, w.action_head.bias);
}

}  // namespace

template <typename T>
Tensor<T> forward(Tape<T>& tape, const ModelWeights<T>& w, std::span<const ModelInput> batch) {
  return run_trunk(tape, w, embed_tokens(tape, w, batch));
}

template <typename T>
std::vector<std::vector<double>> predict_next_actions(const ModelWeights<T>& w,
                                                      std::span<const ModelInput> batch) {
  Tape<T> tape(false);
  Tensor<T> pred = forward(tape, w, batch);
  const std::size_t n_tuples = batch.front().tuple_count();
  const std::size_t da = w.config.action_dim;
  std::vector<std::vector<double>> out(batch.size(), std::vector<double>(da));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const T* row = pred.ptr() + ((b + 1) * n_tuples - 1) * da;
    for (std::size_t k = 0; k < da; ++k) out[b][k] = static_cast<double>(row[k]);
  }
  return out;
}

template <typename T>
std::vector<double> predict_next_action(const ModelWeights<T>& w, const ModelInput& input) {
  return predict_next_actions(w, std::span<const ModelInput>(&input, 1)).front();
}

template <typename T>
Tensor<T> compute_loss(Tape<T>& tape, const ModelWeights<T>& w, std::span<const ModelInput> batch) {
  if (batch.empty()) throw ContractError("compute_loss: empty batch");
  EmbeddedTokens<T> emb = embed_tokens(tape, w, batch);
  Tensor<T> pred = run_trunk(tape, w, emb);
  const std::size_t n_tuples = batch.front().tuple_count();
  const std::size_t da = w.config.action_dim;
  Tensor<T> target(Shape{batch.size() * n_tuples, da});
  for (std::size_t b = 0; b < batch.size(); ++b) {
    for (const Token& tok : batch[b].tokens) {
      if (tok.modality != Modality::Action) continue;
      T* row = target.ptr() + (b * n_tuples + tok.tuple) * da;
      for (std::size_t k = 0; k < da; ++k) row[k] = static_cast<T>(tok.value[k]);
    }
  }
  std::size_t real = 0;
  for (auto r : emb.tuple_is_real) real += r;
  if (real == 0) throw ContractError("compute_loss: batch has no non-padded positions");
  return ops::mse_loss(tape, pred, target, emb.tuple_is_real);
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// Layout: "PDTW" | u16 version | u32 header length | JSON header |
// parameter blocks (f32 LE, header order) | u32 CRC32 of the blocks.

template <typename T>
void save_checkpoint(const ModelWeights<T>& w, const std::filesystem::path& path) {
  nlohmann::json header;
  header["config"] = w.config;
  header["parameters"] = nlohmann::json::array();
  std::vector<unsigned char> payload;
  payload.reserve(w.parameter_count() * 4);
  for (const auto& [name, t] : w.named_parameters()) {
    header["parameters"].push_back({{"name", name}, {"shape", t->shape()}});
    for (T x : t->data()) io::put_f32(payload, static_cast<float>(x));
  }
  const std::string head = header.dump();
  std::vector<unsigned char> bytes;
  io::put_bytes(bytes, "PDTW");
  io::put_u16(bytes, kCheckpointVersion);
  io::put_u32(bytes, static_cast<std::uint32_t>(head.size()));
  io::put_bytes(bytes, head);
  bytes.insert(bytes.end(), payload.begin(), payload.end());
  io::put_u32(bytes, io::crc32_of(payload));
  io::write_file(path.string(), bytes);
}

template <typename T>
ModelWeights<T> load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw CheckpointError("checkpoint not found: " + path.string());
  const auto bytes = io::read_file(path.string());
  try {
    io::Reader in(bytes);
    if (in.str(4) != "PDTW") throw CheckpointError("not a checkpoint (bad magic): " + path.string());
    const auto version = in.u16();
    if (version != kCheckpointVersion) {
      throw CheckpointError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                            std::to_string(kCheckpointVersion) + ")");
    }
    const auto header = nlohmann::json::parse(in.str(in.u32()));
    ModelConfig config = header.at("config").get<ModelConfig>();
    ModelWeights<T> w = ModelWeights<T>::zeros(config);
    auto params = w.named_parameters();
    const auto& listed = header.at("parameters");
    if (listed.size() != params.size()) throw CheckpointError("checkpoint parameter count mismatch");
    std::size_t payload_size = 0;
    for (const auto& [name, t] : params) payload_size += 4 * t->numel();
    auto payload = in.take(payload_size);
    const auto crc = in.u32();
    if (crc != io::crc32_of(payload)) throw CheckpointError("checkpoint checksum mismatch");
    io::Reader body(payload);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& [name, t] = params[i];
      if (listed[i].at("name").get<std::string>() != name ||
          listed[i].at("shape").get<Shape>() != t->shape()) {
        throw CheckpointError("checkpoint parameter " + std::to_string(i) + " does not match " + name +
                              " " + shape_to_string(t->shape()));
      }
      for (auto& x : t->data()) x = static_cast<T>(body.f32());
    }
    return w;
  } catch (const std::out_of_range&) {
    throw CheckpointError("truncated checkpoint: " + path.string());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("bad checkpoint header: " + std::string(e.what()));
  }
}

#define PROMPTDT_INSTANTIATE_MODEL(T)                                                              \
  template class ModelWeights<T>;                                                                  \
  template EmbeddedTokens<T> embed_tokens(Tape<T>&, const ModelWeights<T>&,                        \
                                          std::span<const ModelInput>);                            \
  template Tensor<T> forward(Tape<T>&, const ModelWeights<T>&, std::span<const ModelInput>);       \
  template std::vector<double> predict_next_action(const ModelWeights<T>&, const ModelInput&);     \
  template std::vector<std::vector<double>> predict_next_actions(const ModelWeights<T>&,           \
                                                                 std::span<const ModelInput>);     \
  template Tensor<T> compute_loss(Tape<T>&, const ModelWeights<T>&, std::span<const ModelInput>);  \
  template void save_checkpoint(const ModelWeights<T>&, const std::filesystem::path&);             \
  template ModelWeights<T> load_checkpoint(const std::filesystem::path&);

PROMPTDT_INSTANTIATE_MODEL(float)
PROMPTDT_INSTANTIATE_MODEL(double)

template ModelWeights<double> ModelWeights<float>::cast<double>() const;
template ModelWeights<float> ModelWeights<double>::cast<float>() const;
template ModelWeights<float> ModelWeights<float>::cast<float>() const;
template ModelWeights<double> ModelWeights<double>::cast<double>() const;

#undef PROMPTDT_INSTANTIATE_MODEL

}  // namespace promptdt
