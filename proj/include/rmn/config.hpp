#pragma once

#include <istream>
#include <map>
#include <string>

#include "rmn/data.hpp"
#include "rmn/model.hpp"
#include "rmn/training.hpp"

namespace rmn {

using KeyValues = std::map<std::string, std::string>;

// Flat "key = value" lines; blank lines and '#' comments are ignored.
KeyValues parse_key_values(std::istream& in);

// Every knob of a run: architecture, optimizer and corpus handling.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  VocabOptions vocab;
  std::size_t max_sentence_length = 150;
};

// Throws std::invalid_argument on unknown keys or unparsable values.
void apply_key_values(RunConfig& config, const KeyValues& values);
KeyValues to_key_values(const RunConfig& config);

}  // namespace rmn
