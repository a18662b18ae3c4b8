#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rmn {

using EncodedSentence = std::vector<int>;

struct VocabOptions {
  // 0 means unlimited. Neither limit counts the reserved tokens.
  std::size_t max_size = 0;
  std::size_t min_count = 1;
};

class Vocabulary {
 public:
  static constexpr int kBegin = 0;
  static constexpr int kEnd = 1;
  static constexpr int kUnknown = 2;
  static constexpr std::string_view kBeginToken = "<s>";
  static constexpr std::string_view kEndToken = "</s>";
  static constexpr std::string_view kUnknownToken = "<unk>";

  Vocabulary();

  // Ranks tokens by descending frequency, ties broken lexicographically.
  static Vocabulary build(std::istream& corpus, const VocabOptions& options = {});

  // Reads the "token<TAB>id<TAB>count" format written by save().
  static Vocabulary load(std::istream& in);
  void save(std::ostream& out) const;
  std::string serialize() const;

  // FNV-1a over the serialized form; stored in checkpoints.
  std::uint64_t hash() const;

  std::size_t size() const { return tokens_.size(); }
  int id(std::string_view token) const;
  const std::string& token(int id) const;
  std::uint64_t count(int id) const { return counts_.at(static_cast<std::size_t>(id)); }

  // [begin, ids..., end]; nullopt for a blank line.
  std::optional<EncodedSentence> encode(std::string_view line) const;
  std::vector<std::string> decode(const EncodedSentence& ids) const;

 private:
  void add(std::string token, std::uint64_t count);

  std::unordered_map<std::string, int> index_;
  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> counts_;
};

std::vector<std::string> split_tokens(std::string_view line);

struct Corpus {
  std::vector<EncodedSentence> sentences;
  std::size_t blank_lines = 0;
  std::size_t too_long = 0;
};

// Encodes one sentence per line; blank lines and lines with more than
// max_tokens tokens (0 = no cap) are skipped and counted.
Corpus encode_corpus(const Vocabulary& vocab, std::istream& in, std::size_t max_tokens = 150);

struct Batch {
  std::vector<std::size_t> members;  // indices into the sentence list
  std::size_t length = 0;            // encoded length shared by every member
};

// Groups sentences by exact encoded length, shuffles within each bucket,
// cuts consecutive chunks of batch_size, and emits buckets in shuffled order.
std::vector<Batch> bucket_batches(const std::vector<EncodedSentence>& sentences, std::size_t batch_size,
                                  std::uint64_t seed);

}  // namespace rmn
