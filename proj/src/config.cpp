#include "rmn/config.hpp"

#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace rmn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("config " + key + ": bad number '" + text + "'");
  return value;
}

bool parse_switch(const std::string& key, const std::string& text) {
  if (text == "on" || text == "true" || text == "1") return true;
  if (text == "off" || text == "false" || text == "0") return false;
  throw std::invalid_argument("config " + key + ": expected on/off, got '" + text + "'");
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

KeyValues parse_key_values(std::istream& in) {
  KeyValues out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key=value");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty key");
    out[key] = trim(t.substr(eq + 1));
  }
  return out;
}

void apply_key_values(RunConfig& c, const KeyValues& values) {
  for (const auto& [key, v] : values) {
    if (key == "arch") {
      c.model.layers = parse_arch(v);
    } else if (key == "dim") {
      c.model.dim = parse_number<int>(key, v);
    } else if (key == "memory_size") {
      c.model.memory_size = parse_number<int>(key, v);
    } else if (key == "temporal") {
      c.model.temporal = parse_switch(key, v);
    } else if (key == "compose") {
      if (v == "linear") {
        c.model.composition = Composition::linear;
      } else if (v == "gated") {
        c.model.composition = Composition::gated;
      } else {
        throw std::invalid_argument("config compose: expected linear or gated");
      }
    } else if (key == "direction") {
      if (v == "uni") {
        c.model.direction = MemoryDirection::unidirectional;
      } else if (v == "bi") {
        c.model.direction = MemoryDirection::bidirectional;
      } else {
        throw std::invalid_argument("config direction: expected uni or bi");
      }
    } else if (key == "output_gate") {
      if (v == "tanh") {
        c.model.output_gate = OutputGate::tanh_gate;
      } else if (v == "sigmoid") {
        c.model.output_gate = OutputGate::sigmoid_gate;
      } else {
        throw std::invalid_argument("config output_gate: expected tanh or sigmoid");
      }
    } else if (key == "vocab_size") {
      c.model.vocab_size = parse_number<int>(key, v);
    } else if (key == "epochs") {
      c.train.epochs = parse_number<int>(key, v);
    } else if (key == "batch_size") {
      c.train.batch_size = parse_number<std::size_t>(key, v);
    } else if (key == "initial_lr") {
      c.train.initial_lr = parse_number<double>(key, v);
    } else if (key == "lr_halving_start_epoch") {
      c.train.lr_halving_start_epoch = parse_number<int>(key, v);
    } else if (key == "clip_threshold") {
      c.train.clip_threshold = parse_number<double>(key, v);
    } else if (key == "seed") {
      c.train.seed = parse_number<std::uint64_t>(key, v);
    } else if (key == "dropout") {
      c.train.dropout = parse_number<double>(key, v);
    } else if (key == "record_time") {
      c.train.record_time = parse_switch(key, v);
    } else if (key == "vocab_max_size") {
      c.vocab.max_size = parse_number<std::size_t>(key, v);
    } else if (key == "vocab_min_count") {
      c.vocab.min_count = parse_number<std::size_t>(key, v);
    } else if (key == "max_sentence_length") {
      c.max_sentence_length = parse_number<std::size_t>(key, v);
    } else {
      throw std::invalid_argument("unknown config key: " + key);
    }
  }
}

KeyValues to_key_values(const RunConfig& c) {
  KeyValues kv;
  kv["arch"] = arch_to_string(c.model.layers);
  kv["dim"] = std::to_string(c.model.dim);
  kv["memory_size"] = std::to_string(c.model.memory_size);
  kv["temporal"] = c.model.temporal ? "on" : "off";
  kv["compose"] = c.model.composition == Composition::gated ? "gated" : "linear";
  kv["direction"] = c.model.direction == MemoryDirection::bidirectional ? "bi" : "uni";
  kv["output_gate"] = c.model.output_gate == OutputGate::tanh_gate ? "tanh" : "sigmoid";
  kv["vocab_size"] = std::to_string(c.model.vocab_size);
  kv["epochs"] = std::to_string(c.train.epochs);
  kv["batch_size"] = std::to_string(c.train.batch_size);
  kv["initial_lr"] = format_double(c.train.initial_lr);
  kv["lr_halving_start_epoch"] = std::to_string(c.train.lr_halving_start_epoch);
  kv["clip_threshold"] = format_double(c.train.clip_threshold);
  kv["seed"] = std::to_string(c.train.seed);
  kv["dropout"] = format_double(c.train.dropout);
  kv["record_time"] = c.train.record_time ? "on" : "off";
  kv["vocab_max_size"] = std::to_string(c.vocab.max_size);
  kv["vocab_min_count"] = std::to_string(c.vocab.min_count);
  kv["max_sentence_length"] = std::to_string(c.max_sentence_length);
  return kv;
}

}  // namespace rmn
