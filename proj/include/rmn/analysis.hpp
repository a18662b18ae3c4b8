#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "rmn/data.hpp"
#include "rmn/model.hpp"

namespace rmn {

// exp(total NLL / total predicted tokens) over the corpus.
double perplexity(const ModelStack& model, const std::vector<EncodedSentence>& corpus);

// Attention rows for every step of every sentence; row.sentence indexes the
// corpus.
AttentionTrace collect_traces(const ModelStack& model, const std::vector<EncodedSentence>& corpus);

// Mean attention per memory position, oldest (index 0) to newest (n-1).
// Slots are right-aligned so the current word is always position n; each
// mean runs over the steps in which that position existed.
struct PositionAverage {
  std::vector<double> mean;
  std::vector<std::size_t> count;
};
PositionAverage avg_attention_by_position(const AttentionTrace& trace, int memory_size);
void write_position_average(std::ostream& out, const PositionAverage& avg);

inline constexpr std::size_t kDefaultHeatmapSamples = 100;

// Writes sample_count rows drawn without replacement, in trace order. Each
// row: "sentence:t", "ids=<slot word ids>", then memory_size right-aligned
// probability columns (missing slots empty).
void dump_heatmap(const AttentionTrace& trace, int memory_size, std::size_t sample_count, std::uint64_t seed,
                  std::ostream& out);

struct DistantPair {
  int attended_id = 0;
  int predicted_id = 0;
  std::string attended_word;
  std::string predicted_word;
  int distance = 0;  // target position - attended position
  int sentence = 0;
  int t = 0;
};

// Index of the most attended slot; ties go to the most recent slot.
std::size_t attention_argmax(const AttentionRow& row);

inline constexpr int kDefaultMinDistance = 7;

std::vector<DistantPair> distant_pairs(const AttentionTrace& trace, const std::vector<EncodedSentence>& corpus,
                                       const Vocabulary& vocab, int min_distance = kDefaultMinDistance,
                                       double min_mass = 0.0);
void write_pairs(std::ostream& out, const std::vector<DistantPair>& pairs);

struct CooccurrenceRow {
  int distance = 0;
  std::size_t pairs = 0;
  std::optional<double> mean_frequency;
};

// Number of times `attended` is followed within the same sentence by
// `predicted` at a distance of 1..window.
std::uint64_t count_cooccurrence(const std::vector<EncodedSentence>& corpus, int attended, int predicted, int window);

// Mean training-corpus co-occurrence count of the pairs at each distance
// min_distance..window. An empty pair list yields an empty table.
std::vector<CooccurrenceRow> cooccurrence_stats(const std::vector<DistantPair>& pairs,
                                                const std::vector<EncodedSentence>& training, int window,
                                                int min_distance = kDefaultMinDistance);
void write_cooccurrence(std::ostream& out, const std::vector<CooccurrenceRow>& rows);

struct ParsedSentence {
  std::vector<std::string> tokens;
  std::vector<int> heads;  // 1-based token index of the head, 0 for root
  std::vector<std::string> relations;
};

// Tab-separated (index, token, head, relation) lines, sentences separated by
// blank lines; '#' lines are comments.
std::vector<ParsedSentence> parse_dependencies(std::istream& in);

inline constexpr int kIndividualBins = 8;

struct DependencyTable {
  std::vector<std::string> columns;  // oldest bin first
  std::vector<std::string> rows;     // "ALL" first, then sorted labels
  std::vector<std::vector<double>> sum;
  std::vector<std::vector<std::size_t>> count;
  std::size_t skipped_sentences = 0;

  std::optional<double> mean(std::size_t row, std::size_t col) const;
  std::size_t row_index(const std::string& label) const;
};

// Which memory-position column a slot at the given depth (1 = current word)
// falls in.
std::size_t dependency_column(int depth, int memory_size);

// Mean attention at the argmax slot, per (relation+direction, position)
// cell. "→rel" means the predicted word depends on the attended word,
// "rel←" the reverse; anything else lands in "none".
DependencyTable dependency_breakdown(const AttentionTrace& trace, const std::vector<EncodedSentence>& corpus,
                                     const std::vector<ParsedSentence>& parses, int memory_size);
void write_dependency_table(std::ostream& out, const DependencyTable& table);

}  // namespace rmn
