#include "rmn/completion.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace rmn {

bool is_blank_token(const std::string& token) {
  return token.size() >= 3 && std::all_of(token.begin(), token.end(), [](char c) { return c == '_'; });
}

std::vector<std::string> CompletionItem::spliced(std::size_t k) const {
  std::vector<std::string> out(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(blank));
  out.insert(out.end(), candidates.at(k).begin(), candidates.at(k).end());
  out.insert(out.end(), tokens.begin() + static_cast<std::ptrdiff_t>(blank) + 1, tokens.end());
  return out;
}

CompletionItem make_item(std::string id, const std::string& sentence,
                         const std::array<std::string, kCandidates>& candidates, int gold) {
  CompletionItem item;
  item.id = std::move(id);
  item.tokens = split_tokens(sentence);
  const auto blanks = std::count_if(item.tokens.begin(), item.tokens.end(), is_blank_token);
  if (blanks != 1) {
    throw FormatError("item " + item.id + ": expected exactly one blank, found " + std::to_string(blanks));
  }
  item.blank = static_cast<std::size_t>(std::find_if(item.tokens.begin(), item.tokens.end(), is_blank_token) -
                                        item.tokens.begin());
  for (std::size_t k = 0; k < kCandidates; ++k) {
    item.candidates[k] = split_tokens(candidates[k]);
    if (item.candidates[k].empty()) throw FormatError("item " + item.id + ": empty candidate");
  }
  if (gold < 0 || gold >= static_cast<int>(kCandidates)) throw FormatError("item " + item.id + ": gold index out of range");
  item.gold = gold;
  return item;
}

std::vector<CompletionItem> parse_items(std::istream& in) {
  std::vector<CompletionItem> items;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (fields.size() != 8) throw FormatError("items line " + std::to_string(line_no) + ": expected 8 fields");
    if (fields[7].size() != 1 || fields[7][0] < 'a' || fields[7][0] > 'e') {
      throw FormatError("items line " + std::to_string(line_no) + ": gold must be a letter a-e");
    }
    items.push_back(make_item(fields[0], fields[1], {fields[2], fields[3], fields[4], fields[5], fields[6]},
                              fields[7][0] - 'a'));
  }
  return items;
}

CompletionScore score_candidates(const ModelStack& model, const Vocabulary& vocab, const CompletionItem& item,
                                 bool length_normalize) {
  CompletionScore score;
  for (std::size_t k = 0; k < kCandidates; ++k) {
    std::string line;
    for (const auto& tok : item.spliced(k)) {
      if (!line.empty()) line += ' ';
      line += tok;
    }
    const auto ids = vocab.encode(line);
    if (!ids) throw FormatError("item " + item.id + ": empty sentence");
    const SentenceScore s = model.sentence_nll(*ids, false);
    score.log_prob[k] = length_normalize ? -s.nll / s.tokens : -s.nll;
  }
  for (std::size_t k = 1; k < kCandidates; ++k) {
    if (score.log_prob[k] > score.log_prob[static_cast<std::size_t>(score.chosen)]) score.chosen = static_cast<int>(k);
  }
  return score;
}

double challenge_accuracy(const ModelStack& model, const Vocabulary& vocab, const std::vector<CompletionItem>& items,
                          bool length_normalize) {
  if (items.empty()) throw std::invalid_argument("challenge_accuracy: no items");
  std::size_t correct = 0;
  for (const auto& item : items) correct += score_candidates(model, vocab, item, length_normalize).chosen == item.gold;
  return static_cast<double>(correct) / static_cast<double>(items.size());
}

char gold_letter(int index) { return static_cast<char>('a' + index); }

void write_completion_header(std::ostream& out) {
  out << "id\tchosen\tgold\tcorrect\tscore_a\tscore_b\tscore_c\tscore_d\tscore_e\n";
}

void write_completion_row(std::ostream& out, const CompletionItem& item, const CompletionScore& score) {
  out << item.id << '\t' << gold_letter(score.chosen) << '\t' << gold_letter(item.gold) << '\t'
      << (score.chosen == item.gold ? 1 : 0);
  char buf[64];
  for (double lp : score.log_prob) {
    std::snprintf(buf, sizeof buf, "\t%.6f", lp);
    out << buf;
  }
  out << '\n';
}

}  // namespace rmn
