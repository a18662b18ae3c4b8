#include "rmn/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rmn {

namespace {

void fill_uniform(Tensor& t, Rng& rng) {
  for (Eigen::Index k = 0; k < t.value.size(); ++k) t.value.data()[k] = rng.uniform_open(-0.05, 0.05);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::vector<LayerKind> parse_arch(std::string_view arch) {
  using L = LayerKind;
  if (arch == "lstm") return {L::lstm};
  if (arch == "lstm2") return {L::lstm, L::lstm};
  if (arch == "lstm3") return {L::lstm, L::lstm, L::lstm};
  if (arch == "rm") return {L::lstm, L::mb};
  if (arch == "rmr") return {L::lstm, L::mb, L::lstm};
  if (arch == "completion-rm") return {L::lstm, L::lstm, L::lstm, L::mb};

  std::vector<LayerKind> layers;
  std::stringstream ss{std::string(arch)};
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item == "lstm") {
      layers.push_back(L::lstm);
    } else if (item == "mb") {
      layers.push_back(L::mb);
    } else {
      throw std::invalid_argument("unknown architecture: " + std::string(arch));
    }
  }
  if (layers.empty()) throw std::invalid_argument("empty architecture");
  return layers;
}

std::string arch_to_string(const std::vector<LayerKind>& layers) {
  std::string out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (i > 0) out += ',';
    out += layers[i] == LayerKind::lstm ? "lstm" : "mb";
  }
  return out;
}

bool ModelConfig::has_memory() const {
  return std::find(layers.begin(), layers.end(), LayerKind::mb) != layers.end();
}

void ModelConfig::validate() const {
  if (vocab_size < 1) throw std::invalid_argument("model: vocabulary size must be >= 1");
  if (dim < 1) throw std::invalid_argument("model: dimension must be >= 1");
  if (memory_size < 1) throw std::invalid_argument("model: memory size must be >= 1");
  if (layers.empty()) throw std::invalid_argument("model: no layers");
  if (std::count(layers.begin(), layers.end(), LayerKind::mb) > 1) {
    throw std::invalid_argument("model: at most one memory block is supported");
  }
  if (layers.front() != LayerKind::lstm) {
    throw std::invalid_argument("model: the memory block must sit on top of an LSTM layer");
  }
}

struct ModelStack::StepCache {
  struct LstmPart {
    LstmCache cell;
    Vec mask;
  };
  std::vector<std::variant<LstmPart, MbCache>> layers;
  Vec top;
  Vec probs;
};

ModelStack::ModelStack(const ModelConfig& config)
    : embedding(config.vocab_size, config.dim),
      out_weight(config.vocab_size, config.dim),
      out_bias(config.vocab_size, 1),
      config_(config) {
  config_.validate();
  for (LayerKind kind : config_.layers) {
    if (kind == LayerKind::lstm) {
      layers_.emplace_back(LstmCell(config_.dim, config_.dim, config_.output_gate));
    } else {
      layers_.emplace_back(MemoryBlock(config_.vocab_size, config_.dim, config_.memory_size, config_.temporal,
                                       config_.composition, config_.direction));
    }
  }
  rebuild_registry();
}

ModelStack ModelStack::init(const ModelConfig& config, Rng& rng) {
  ModelStack model(config);
  fill_uniform(model.embedding, rng);
  for (auto& layer : model.layers_) {
    if (auto* cell = std::get_if<LstmCell>(&layer)) {
      *cell = LstmCell::init(config.dim, config.dim, rng, config.output_gate);
    } else {
      layer = MemoryBlock::init(config.vocab_size, config.dim, config.memory_size, config.temporal,
                                config.composition, config.direction, rng);
    }
  }
  fill_uniform(model.out_weight, rng);
  fill_uniform(model.out_bias, rng);
  model.rebuild_registry();
  return model;
}

ModelStack ModelStack::init(const ModelConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  return init(config, rng);
}

ModelStack::ModelStack(const ModelStack& other)
    : embedding(other.embedding),
      out_weight(other.out_weight),
      out_bias(other.out_bias),
      config_(other.config_),
      layers_(other.layers_) {
  rebuild_registry();
}

ModelStack& ModelStack::operator=(const ModelStack& other) {
  if (this != &other) {
    embedding = other.embedding;
    out_weight = other.out_weight;
    out_bias = other.out_bias;
    config_ = other.config_;
    layers_ = other.layers_;
    rebuild_registry();
  }
  return *this;
}

ModelStack::ModelStack(ModelStack&& other) noexcept
    : embedding(std::move(other.embedding)),
      out_weight(std::move(other.out_weight)),
      out_bias(std::move(other.out_bias)),
      config_(std::move(other.config_)),
      layers_(std::move(other.layers_)) {
  rebuild_registry();
  other.registry_.clear();
}

ModelStack& ModelStack::operator=(ModelStack&& other) noexcept {
  if (this != &other) {
    embedding = std::move(other.embedding);
    out_weight = std::move(other.out_weight);
    out_bias = std::move(other.out_bias);
    config_ = std::move(other.config_);
    layers_ = std::move(other.layers_);
    rebuild_registry();
    other.registry_.clear();
  }
  return *this;
}

void ModelStack::rebuild_registry() {
  registry_.clear();
  registry_.add("embed.E", embedding);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::string prefix = "layer" + std::to_string(l);
    if (auto* cell = std::get_if<LstmCell>(&layers_[l])) {
      cell->register_params(registry_, prefix + ".lstm.");
    } else {
      std::get<MemoryBlock>(layers_[l]).register_params(registry_, prefix + ".mb.");
    }
  }
  registry_.add("out.W", out_weight);
  registry_.add("out.b", out_bias);
}

MemoryBlock& ModelStack::memory_block() {
  for (auto& layer : layers_) {
    if (auto* mb = std::get_if<MemoryBlock>(&layer)) return *mb;
  }
  throw std::logic_error("model has no memory block");
}

const MemoryBlock* ModelStack::memory_block_ptr() const {
  for (const auto& layer : layers_) {
    if (const auto* mb = std::get_if<MemoryBlock>(&layer)) return mb;
  }
  return nullptr;
}

std::vector<LstmState> ModelStack::zero_states() const {
  std::vector<LstmState> states;
  for (LayerKind kind : config_.layers) {
    if (kind == LayerKind::lstm) states.push_back(LstmState::zeros(config_.dim));
  }
  return states;
}

void ModelStack::check_ids(std::span<const int> ids) const {
  for (int id : ids) {
    if (id < 0 || id >= config_.vocab_size) throw std::out_of_range("word id out of vocabulary: " + std::to_string(id));
  }
}

Vec ModelStack::step(std::span<const int> ids, int t, std::vector<LstmState>& states, const TrainMode& mode,
                     StepCache* cache, AttentionRow* row) const {
  if (t < 1 || t > static_cast<int>(ids.size())) throw std::out_of_range("forward_step: position outside sentence");
  if (states.size() != static_cast<std::size_t>(std::count(config_.layers.begin(), config_.layers.end(),
                                                           LayerKind::lstm))) {
    throw std::invalid_argument("forward_step: state count does not match layer spec");
  }
  const bool train = mode.dropout > 0.0;
  if (train && mode.rng == nullptr) throw std::invalid_argument("dropout requires a generator");

  Vec v = embedding.value.row(ids[t - 1]).transpose();
  std::size_t lstm_index = 0;
  for (const auto& layer : layers_) {
    if (const auto* cell = std::get_if<LstmCell>(&layer)) {
      StepCache::LstmPart part;
      LstmState& state = states[lstm_index++];
      state = cell->step(v, state, cache != nullptr ? &part.cell : nullptr);
      v = train ? apply_dropout(state.h, mode.dropout, DropoutMode::train, *mode.rng, &part.mask) : state.h;
      if (cache != nullptr) cache->layers.emplace_back(std::move(part));
    } else {
      const auto& mb = std::get<MemoryBlock>(layer);
      MbCache mb_cache;
      MbOutput out = mb.step(ids, t, v, cache != nullptr ? &mb_cache : nullptr);
      v = std::move(out.h_m);
      if (row != nullptr) {
        row->t = t;
        row->word_ids = std::move(out.slice.word_ids);
        row->positions = std::move(out.slice.positions);
        row->probs = std::move(out.p);
      }
      if (cache != nullptr) cache->layers.emplace_back(std::move(mb_cache));
    }
  }
  Vec probs = softmax_stable(out_weight.value * v + out_bias.value);
  if (cache != nullptr) {
    cache->top = std::move(v);
    cache->probs = probs;
  }
  return probs;
}

StepOutput ModelStack::forward_step(std::span<const int> sentence_ids, int t, std::vector<LstmState>& states) const {
  check_ids(sentence_ids);
  StepOutput out;
  out.has_attention = config_.has_memory();
  out.probs = step(sentence_ids, t, states, {}, nullptr, out.has_attention ? &out.attention : nullptr);
  return out;
}

SentenceScore ModelStack::sentence_nll(std::span<const int> sentence_ids, bool keep_trace) const {
  if (sentence_ids.size() < 2) throw std::invalid_argument("sentence_nll: sentence needs at least 2 ids");
  check_ids(sentence_ids);
  SentenceScore score;
  auto states = zero_states();
  const bool traced = keep_trace && config_.has_memory();
  const int length = static_cast<int>(sentence_ids.size());
  for (int t = 1; t < length; ++t) {
    AttentionRow row;
    const Vec probs = step(sentence_ids, t, states, {}, nullptr, traced ? &row : nullptr);
    score.nll -= std::log(probs[sentence_ids[t]]);
    if (traced) score.trace.push_back(std::move(row));
  }
  score.tokens = length - 1;
  return score;
}

Vec ModelStack::next_word_distribution(std::span<const int> prefix_ids) const {
  if (prefix_ids.empty()) throw std::invalid_argument("next_word_distribution: empty prefix");
  check_ids(prefix_ids);
  auto states = zero_states();
  Vec probs;
  for (int t = 1; t <= static_cast<int>(prefix_ids.size()); ++t) probs = step(prefix_ids, t, states, {}, nullptr, nullptr);
  return probs;
}

double ModelStack::accumulate_gradients(std::span<const int> ids, double weight, const TrainMode& mode) {
  if (ids.size() < 2) throw std::invalid_argument("accumulate_gradients: sentence needs at least 2 ids");
  check_ids(ids);
  const int length = static_cast<int>(ids.size());

  std::vector<StepCache> caches(static_cast<std::size_t>(length - 1));
  auto states = zero_states();
  double nll = 0.0;
  for (int t = 1; t < length; ++t) {
    StepCache& cache = caches[static_cast<std::size_t>(t - 1)];
    step(ids, t, states, mode, &cache, nullptr);
    nll -= std::log(cache.probs[ids[t]]);
  }
  if (!std::isfinite(nll)) throw NumericError("non-finite sentence loss");

  std::vector<Vec> dh_next;
  std::vector<Vec> dc_next;
  for (std::size_t k = 0; k < states.size(); ++k) {
    dh_next.push_back(Vec::Zero(config_.dim));
    dc_next.push_back(Vec::Zero(config_.dim));
  }

  for (int t = length - 1; t >= 1; --t) {
    StepCache& cache = caches[static_cast<std::size_t>(t - 1)];
    Vec dlogits = weight * cache.probs;
    dlogits[ids[t]] -= weight;
    out_weight.grad.noalias() += dlogits * cache.top.transpose();
    out_bias.grad += dlogits;
    Vec dv = out_weight.value.transpose() * dlogits;

    std::size_t lstm_index = states.size();
    for (std::size_t l = layers_.size(); l-- > 0;) {
      if (auto* cell = std::get_if<LstmCell>(&layers_[l])) {
        --lstm_index;
        auto& part = std::get<StepCache::LstmPart>(cache.layers[l]);
        if (part.mask.size() > 0) dv = dv.cwiseProduct(part.mask);
        LstmInputGrads g = cell->backward(part.cell, dv + dh_next[lstm_index], dc_next[lstm_index]);
        dh_next[lstm_index] = std::move(g.dh_prev);
        dc_next[lstm_index] = std::move(g.dc_prev);
        dv = std::move(g.dx);
      } else {
        dv = std::get<MemoryBlock>(layers_[l]).backward(std::get<MbCache>(cache.layers[l]), dv);
      }
    }
    embedding.grad.row(ids[t - 1]) += dv.transpose();
  }
  return nll;
}

}  // namespace rmn
