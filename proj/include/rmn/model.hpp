#pragma once

#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rmn/lstm.hpp"
#include "rmn/memory_block.hpp"
#include "rmn/numeric.hpp"
#include "rmn/rng.hpp"

namespace rmn {

enum class LayerKind { lstm, mb };

// Named architectures: "lstm" (1..3 layers via lstm2/lstm3), "rm" = lstm,mb,
// "rmr" = lstm,mb,lstm, "completion-rm" = lstm,lstm,lstm,mb. Any comma list
// of "lstm"/"mb" is accepted as well.
std::vector<LayerKind> parse_arch(std::string_view arch);
std::string arch_to_string(const std::vector<LayerKind>& layers);

struct ModelConfig {
  std::vector<LayerKind> layers{LayerKind::lstm, LayerKind::mb};
  int vocab_size = 0;
  int dim = 128;
  int memory_size = 15;
  bool temporal = true;
  Composition composition = Composition::gated;
  MemoryDirection direction = MemoryDirection::unidirectional;
  OutputGate output_gate = OutputGate::tanh_gate;

  bool has_memory() const;
  void validate() const;
};

struct AttentionRow {
  int sentence = 0;
  int t = 0;  // current word position; the prediction target is t + 1
  std::vector<int> word_ids;
  std::vector<int> positions;
  Vec probs;

  int target_position() const { return t + 1; }
};

using AttentionTrace = std::vector<AttentionRow>;

struct StepOutput {
  Vec probs;
  bool has_attention = false;
  AttentionRow attention;
};

struct SentenceScore {
  double nll = 0.0;
  int tokens = 0;
  AttentionTrace trace;
};

struct TrainMode {
  double dropout = 0.0;
  Rng* rng = nullptr;
};

class ModelStack {
 public:
  // All parameters zero (a uniform next-word distribution).
  explicit ModelStack(const ModelConfig& config);
  static ModelStack init(const ModelConfig& config, Rng& rng);
  static ModelStack init(const ModelConfig& config, std::uint64_t seed);

  ModelStack(const ModelStack& other);
  ModelStack& operator=(const ModelStack& other);
  ModelStack(ModelStack&& other) noexcept;
  ModelStack& operator=(ModelStack&& other) noexcept;

  const ModelConfig& config() const { return config_; }
  ParamRegistry& params() { return registry_; }
  const ParamRegistry& params() const { return registry_; }

  std::vector<LstmState> zero_states() const;

  // Eval-mode step at 1-indexed position t; `states` holds one entry per
  // LSTM layer and is advanced in place.
  StepOutput forward_step(std::span<const int> sentence_ids, int t, std::vector<LstmState>& states) const;

  // -sum ln P(x_{t+1} | x_1..x_t) for t = 1..L-1, starting from zero state.
  SentenceScore sentence_nll(std::span<const int> sentence_ids, bool keep_trace = true) const;

  Vec next_word_distribution(std::span<const int> prefix_ids) const;

  // Forward and full backpropagation through time over one sentence. Adds
  // weight * d(nll)/d(theta) to the gradient slots and returns the nll.
  double accumulate_gradients(std::span<const int> sentence_ids, double weight, const TrainMode& mode = {});

  LstmCell& lstm(std::size_t layer) { return std::get<LstmCell>(layers_.at(layer)); }
  MemoryBlock& memory_block();
  const MemoryBlock* memory_block_ptr() const;

  Tensor embedding;
  Tensor out_weight;
  Tensor out_bias;

 private:
  struct StepCache;

  Vec step(std::span<const int> ids, int t, std::vector<LstmState>& states, const TrainMode& mode,
           StepCache* cache, AttentionRow* row) const;
  void check_ids(std::span<const int> ids) const;
  void rebuild_registry();

  ModelConfig config_;
  std::vector<std::variant<LstmCell, MemoryBlock>> layers_;
  ParamRegistry registry_;
};

}  // namespace rmn
