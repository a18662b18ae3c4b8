#pragma once

#include <array>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "rmn/data.hpp"
#include "rmn/memory_block.hpp"
#include "rmn/model.hpp"

namespace rmn {

inline constexpr std::size_t kCandidates = 5;

struct CompletionItem {
  std::string id;
  std::vector<std::string> tokens;  // sentence tokens, blank included
  std::size_t blank = 0;            // index of the blank within tokens
  std::array<std::vector<std::string>, kCandidates> candidates;
  int gold = 0;

  // Sentence tokens with candidate k spliced into the blank.
  std::vector<std::string> spliced(std::size_t k) const;
};

bool is_blank_token(const std::string& token);

CompletionItem make_item(std::string id, const std::string& sentence,
                         const std::array<std::string, kCandidates>& candidates, int gold);

// "id<TAB>sentence with ___<TAB>a<TAB>b<TAB>c<TAB>d<TAB>e<TAB>gold_letter".
std::vector<CompletionItem> parse_items(std::istream& in);

struct CompletionScore {
  std::array<double, kCandidates> log_prob{};
  int chosen = 0;
};

// Whole-sentence log-probability per candidate; argmax with ties to the
// lowest index. With length_normalize the score is divided by the number of
// predicted tokens.
CompletionScore score_candidates(const ModelStack& model, const Vocabulary& vocab, const CompletionItem& item,
                                 bool length_normalize = false);

double challenge_accuracy(const ModelStack& model, const Vocabulary& vocab, const std::vector<CompletionItem>& items,
                          bool length_normalize = false);

char gold_letter(int index);

void write_completion_header(std::ostream& out);
void write_completion_row(std::ostream& out, const CompletionItem& item, const CompletionScore& score);

}  // namespace rmn
