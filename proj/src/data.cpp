#include "rmn/data.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>

#include "rmn/numeric.hpp"
#include "rmn/rng.hpp"

namespace rmn {

std::vector<std::string> split_tokens(std::string_view line) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r' || line[i] == '\n')) ++i;
    const std::size_t start = i;
    while (i < line.size() && !(line[i] == ' ' || line[i] == '\t' || line[i] == '\r' || line[i] == '\n')) ++i;
    if (i > start) tokens.emplace_back(line.substr(start, i - start));
  }
  return tokens;
}

Vocabulary::Vocabulary() {
  add(std::string(kBeginToken), 0);
  add(std::string(kEndToken), 0);
  add(std::string(kUnknownToken), 0);
}

void Vocabulary::add(std::string token, std::uint64_t count) {
  if (index_.count(token) != 0) throw FormatError("duplicate vocabulary token: " + token);
  index_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(std::move(token));
  counts_.push_back(count);
}

Vocabulary Vocabulary::build(std::istream& corpus, const VocabOptions& options) {
  std::unordered_map<std::string, std::uint64_t> freq;
  std::uint64_t sentences = 0;
  std::string line;
  while (std::getline(corpus, line)) {
    auto tokens = split_tokens(line);
    if (tokens.empty()) continue;
    ++sentences;
    for (auto& tok : tokens) ++freq[tok];
  }
  if (sentences == 0) throw std::invalid_argument("build_vocab: empty corpus");

  std::uint64_t unknown = 0;
  if (auto it = freq.find(std::string(kUnknownToken)); it != freq.end()) {
    unknown += it->second;
    freq.erase(it);
  }
  freq.erase(std::string(kBeginToken));
  freq.erase(std::string(kEndToken));

  std::vector<std::pair<std::string, std::uint64_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });

  Vocabulary vocab;
  vocab.counts_[kBegin] = sentences;
  vocab.counts_[kEnd] = sentences;
  for (auto& [token, count] : ranked) {
    const bool over_size = options.max_size != 0 && vocab.size() - 3 >= options.max_size;
    if (count < options.min_count || over_size) {
      unknown += count;
      continue;
    }
    vocab.add(token, count);
  }
  vocab.counts_[kUnknown] = unknown;
  return vocab;
}

Vocabulary Vocabulary::load(std::istream& in) {
  Vocabulary vocab;
  vocab.index_.clear();
  vocab.tokens_.clear();
  vocab.counts_.clear();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw FormatError("vocabulary line " + std::to_string(line_no) + ": expected 3 fields");
    std::string token = line.substr(0, t1);
    int id = 0;
    std::uint64_t count = 0;
    try {
      id = std::stoi(line.substr(t1 + 1, t2 - t1 - 1));
      count = std::stoull(line.substr(t2 + 1));
    } catch (const std::exception&) {
      throw FormatError("vocabulary line " + std::to_string(line_no) + ": bad number");
    }
    if (id != static_cast<int>(vocab.tokens_.size())) {
      throw FormatError("vocabulary line " + std::to_string(line_no) + ": ids must be dense and ordered");
    }
    vocab.add(std::move(token), count);
  }
  if (vocab.size() < 3 || vocab.tokens_[kBegin] != kBeginToken || vocab.tokens_[kEnd] != kEndToken ||
      vocab.tokens_[kUnknown] != kUnknownToken) {
    throw FormatError("vocabulary: reserved tokens missing or misplaced");
  }
  return vocab;
}

void Vocabulary::save(std::ostream& out) const { out << serialize(); }

std::string Vocabulary::serialize() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < tokens_.size(); ++i) out << tokens_[i] << '\t' << i << '\t' << counts_[i] << '\n';
  return out.str();
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

int Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnknown : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) throw std::out_of_range("token id out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

std::optional<EncodedSentence> Vocabulary::encode(std::string_view line) const {
  const auto tokens = split_tokens(line);
  if (tokens.empty()) return std::nullopt;
  EncodedSentence ids;
  ids.reserve(tokens.size() + 2);
  ids.push_back(kBegin);
  for (const auto& tok : tokens) ids.push_back(id(tok));
  ids.push_back(kEnd);
  return ids;
}

std::vector<std::string> Vocabulary::decode(const EncodedSentence& ids) const {
  std::vector<std::string> out;
  for (int id : ids) {
    if (id == kBegin || id == kEnd) continue;
    out.push_back(token(id));
  }
  return out;
}

Corpus encode_corpus(const Vocabulary& vocab, std::istream& in, std::size_t max_tokens) {
  Corpus corpus;
  std::string line;
  while (std::getline(in, line)) {
    auto ids = vocab.encode(line);
    if (!ids) {
      ++corpus.blank_lines;
      continue;
    }
    if (max_tokens != 0 && ids->size() - 2 > max_tokens) {
      ++corpus.too_long;
      continue;
    }
    corpus.sentences.push_back(std::move(*ids));
  }
  return corpus;
}

std::vector<Batch> bucket_batches(const std::vector<EncodedSentence>& sentences, std::size_t batch_size,
                                  std::uint64_t seed) {
  if (batch_size < 1) throw std::invalid_argument("bucket_batches: batch size must be >= 1");
  std::map<std::size_t, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < sentences.size(); ++i) buckets[sentences[i].size()].push_back(i);

  Rng rng(seed);
  std::vector<std::vector<Batch>> per_bucket;
  for (auto& [length, members] : buckets) {
    rng.shuffle(std::span<std::size_t>(members));
    std::vector<Batch> chunks;
    for (std::size_t start = 0; start < members.size(); start += batch_size) {
      const std::size_t stop = std::min(members.size(), start + batch_size);
      Batch batch;
      batch.length = length;
      batch.members.assign(members.begin() + static_cast<std::ptrdiff_t>(start),
                           members.begin() + static_cast<std::ptrdiff_t>(stop));
      chunks.push_back(std::move(batch));
    }
    per_bucket.push_back(std::move(chunks));
  }
  rng.shuffle(std::span<std::vector<Batch>>(per_bucket));

  std::vector<Batch> out;
  for (auto& chunks : per_bucket) {
    for (auto& b : chunks) out.push_back(std::move(b));
  }
  return out;
}

}  // namespace rmn
