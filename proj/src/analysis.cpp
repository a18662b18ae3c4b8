#include "rmn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "rmn/rng.hpp"

namespace rmn {

namespace {

std::string format_prob(double p) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9f", p);
  return buf;
}

// Depth of a slot relative to the current word (1 = current word); future
// slots of a bidirectional memory have depth <= 0.
int slot_depth(const AttentionRow& row, std::size_t slot) { return row.t - row.positions[slot] + 1; }

}  // namespace

double perplexity(const ModelStack& model, const std::vector<EncodedSentence>& corpus) {
  if (corpus.empty()) throw std::invalid_argument("perplexity: empty corpus");
  double nll = 0.0;
  std::size_t tokens = 0;
  for (const auto& sentence : corpus) {
    const SentenceScore s = model.sentence_nll(sentence, false);
    nll += s.nll;
    tokens += static_cast<std::size_t>(s.tokens);
  }
  return std::exp(nll / static_cast<double>(tokens));
}

AttentionTrace collect_traces(const ModelStack& model, const std::vector<EncodedSentence>& corpus) {
  AttentionTrace trace;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    SentenceScore s = model.sentence_nll(corpus[i], true);
    for (auto& row : s.trace) {
      row.sentence = static_cast<int>(i);
      trace.push_back(std::move(row));
    }
  }
  return trace;
}

PositionAverage avg_attention_by_position(const AttentionTrace& trace, int memory_size) {
  if (trace.empty()) throw std::invalid_argument("avg_attention_by_position: empty trace");
  const auto n = static_cast<std::size_t>(memory_size);
  std::vector<double> sum(n, 0.0);
  PositionAverage avg;
  avg.count.assign(n, 0);
  for (const auto& row : trace) {
    for (std::size_t k = 0; k < row.positions.size(); ++k) {
      const int depth = slot_depth(row, k);
      if (depth < 1 || depth > memory_size) continue;
      const std::size_t col = n - static_cast<std::size_t>(depth);
      sum[col] += row.probs[static_cast<Eigen::Index>(k)];
      ++avg.count[col];
    }
  }
  avg.mean.assign(n, 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    if (avg.count[c] > 0) avg.mean[c] = sum[c] / static_cast<double>(avg.count[c]);
  }
  return avg;
}

void write_position_average(std::ostream& out, const PositionAverage& avg) {
  out << "position\tmean_attention\tsteps\n";
  for (std::size_t c = 0; c < avg.mean.size(); ++c) {
    out << (c + 1) << '\t' << format_prob(avg.mean[c]) << '\t' << avg.count[c] << '\n';
  }
}

void dump_heatmap(const AttentionTrace& trace, int memory_size, std::size_t sample_count, std::uint64_t seed,
                  std::ostream& out) {
  if (sample_count > trace.size()) {
    throw std::invalid_argument("dump_heatmap: requested " + std::to_string(sample_count) + " samples from " +
                                std::to_string(trace.size()) + " steps");
  }
  std::vector<std::size_t> order(trace.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = 0; i < sample_count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(order.size() - i));
    std::swap(order[i], order[j]);
  }
  order.resize(sample_count);
  std::sort(order.begin(), order.end());

  const auto n = static_cast<std::size_t>(memory_size);
  out << "step\tword_ids";
  for (std::size_t c = 1; c <= n; ++c) out << "\tpos" << c;
  out << '\n';
  for (std::size_t idx : order) {
    const AttentionRow& row = trace[idx];
    std::vector<std::string> cells(n);
    std::string ids;
    for (std::size_t k = 0; k < row.positions.size(); ++k) {
      const int depth = slot_depth(row, k);
      if (depth < 1 || depth > memory_size) continue;
      cells[n - static_cast<std::size_t>(depth)] = format_prob(row.probs[static_cast<Eigen::Index>(k)]);
      if (!ids.empty()) ids += ',';
      ids += std::to_string(row.word_ids[k]);
    }
    out << row.sentence << ':' << row.t << "\tids=" << ids;
    for (const auto& cell : cells) out << '\t' << cell;
    out << '\n';
  }
}

std::size_t attention_argmax(const AttentionRow& row) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < row.positions.size(); ++k) {
    const double p = row.probs[static_cast<Eigen::Index>(k)];
    const double q = row.probs[static_cast<Eigen::Index>(best)];
    if (p > q || (p == q && row.positions[k] > row.positions[best])) best = k;
  }
  return best;
}

std::vector<DistantPair> distant_pairs(const AttentionTrace& trace, const std::vector<EncodedSentence>& corpus,
                                       const Vocabulary& vocab, int min_distance, double min_mass) {
  if (min_distance < 1) throw std::invalid_argument("distant_pairs: min_distance must be >= 1");
  std::vector<DistantPair> pairs;
  for (const auto& row : trace) {
    const std::size_t slot = attention_argmax(row);
    if (row.probs[static_cast<Eigen::Index>(slot)] < min_mass) continue;
    const int distance = row.target_position() - row.positions[slot];
    if (distance < min_distance) continue;
    const auto& sentence = corpus.at(static_cast<std::size_t>(row.sentence));
    DistantPair pair;
    pair.attended_id = row.word_ids[slot];
    pair.predicted_id = sentence.at(static_cast<std::size_t>(row.target_position() - 1));
    pair.attended_word = vocab.token(pair.attended_id);
    pair.predicted_word = vocab.token(pair.predicted_id);
    pair.distance = distance;
    pair.sentence = row.sentence;
    pair.t = row.t;
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

void write_pairs(std::ostream& out, const std::vector<DistantPair>& pairs) {
  out << "sentence\tt\tdistance\tattended\tpredicted\n";
  for (const auto& p : pairs) {
    out << p.sentence << '\t' << p.t << '\t' << p.distance << '\t' << p.attended_word << '\t' << p.predicted_word
        << '\n';
  }
}

std::uint64_t count_cooccurrence(const std::vector<EncodedSentence>& corpus, int attended, int predicted,
                                 int window) {
  std::uint64_t count = 0;
  for (const auto& s : corpus) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (s[j] != predicted) continue;
      const std::size_t lo = j >= static_cast<std::size_t>(window) ? j - static_cast<std::size_t>(window) : 0;
      for (std::size_t i = lo; i < j; ++i) count += s[i] == attended ? 1 : 0;
    }
  }
  return count;
}

std::vector<CooccurrenceRow> cooccurrence_stats(const std::vector<DistantPair>& pairs,
                                                const std::vector<EncodedSentence>& training, int window,
                                                int min_distance) {
  if (pairs.empty()) return {};
  if (window < 1) throw std::invalid_argument("cooccurrence_stats: window must be >= 1");

  // One pass over the training corpus counts every requested (attended,
  // predicted) combination at once.
  std::map<std::pair<int, int>, std::uint64_t> counts;
  std::map<int, std::set<int>> wanted_by_predicted;
  for (const auto& p : pairs) {
    counts[{p.attended_id, p.predicted_id}] = 0;
    wanted_by_predicted[p.predicted_id].insert(p.attended_id);
  }
  for (const auto& s : training) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      auto it = wanted_by_predicted.find(s[j]);
      if (it == wanted_by_predicted.end()) continue;
      const std::size_t lo = j >= static_cast<std::size_t>(window) ? j - static_cast<std::size_t>(window) : 0;
      for (std::size_t i = lo; i < j; ++i) {
        if (it->second.count(s[i]) != 0) ++counts[{s[i], s[j]}];
      }
    }
  }

  std::vector<CooccurrenceRow> rows;
  for (int d = min_distance; d <= window; ++d) {
    CooccurrenceRow row;
    row.distance = d;
    double total = 0.0;
    for (const auto& p : pairs) {
      if (p.distance != d) continue;
      ++row.pairs;
      total += static_cast<double>(counts[{p.attended_id, p.predicted_id}]);
    }
    if (row.pairs > 0) row.mean_frequency = total / static_cast<double>(row.pairs);
    rows.push_back(row);
  }
  return rows;
}

void write_cooccurrence(std::ostream& out, const std::vector<CooccurrenceRow>& rows) {
  out << "distance\tpairs\tmean_frequency\n";
  char buf[64];
  for (const auto& r : rows) {
    out << r.distance << '\t' << r.pairs << '\t';
    if (r.mean_frequency) {
      std::snprintf(buf, sizeof buf, "%.6f", *r.mean_frequency);
      out << buf;
    }
    out << '\n';
  }
}

std::vector<ParsedSentence> parse_dependencies(std::istream& in) {
  std::vector<ParsedSentence> out;
  ParsedSentence current;
  std::string line;
  int line_no = 0;
  auto flush = [&] {
    if (current.tokens.empty()) return;
    const int n = static_cast<int>(current.tokens.size());
    for (int h : current.heads) {
      if (h < 0 || h > n) throw FormatError("parse ending at line " + std::to_string(line_no) + ": head out of range");
    }
    out.push_back(std::move(current));
    current = {};
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    if (line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (fields.size() != 4) throw FormatError("parse line " + std::to_string(line_no) + ": expected 4 fields");
    int index = 0;
    int head = 0;
    try {
      std::size_t used = 0;
      index = std::stoi(fields[0], &used);
      if (used != fields[0].size()) throw std::invalid_argument("index");
      head = std::stoi(fields[2], &used);
      if (used != fields[2].size()) throw std::invalid_argument("head");
    } catch (const std::exception&) {
      throw FormatError("parse line " + std::to_string(line_no) + ": bad index or head");
    }
    if (index != static_cast<int>(current.tokens.size()) + 1) {
      throw FormatError("parse line " + std::to_string(line_no) + ": token indices must run 1, 2, ...");
    }
    current.tokens.push_back(fields[1]);
    current.heads.push_back(head);
    current.relations.push_back(fields[3]);
  }
  flush();
  return out;
}

std::size_t dependency_column(int depth, int memory_size) {
  // Columns run oldest to newest: [merged bin], n-7, ..., n.
  const int individual = std::min(memory_size, kIndividualBins);
  const int merged = memory_size > kIndividualBins ? 1 : 0;
  if (depth > individual) return 0;
  return static_cast<std::size_t>(merged + individual - depth);
}

std::optional<double> DependencyTable::mean(std::size_t row, std::size_t col) const {
  if (count[row][col] == 0) return std::nullopt;
  return sum[row][col] / static_cast<double>(count[row][col]);
}

std::size_t DependencyTable::row_index(const std::string& label) const {
  auto it = std::find(rows.begin(), rows.end(), label);
  if (it == rows.end()) throw std::out_of_range("no dependency row " + label);
  return static_cast<std::size_t>(it - rows.begin());
}

DependencyTable dependency_breakdown(const AttentionTrace& trace, const std::vector<EncodedSentence>& corpus,
                                     const std::vector<ParsedSentence>& parses, int memory_size) {
  DependencyTable table;
  const int individual = std::min(memory_size, kIndividualBins);
  if (memory_size > kIndividualBins) table.columns.push_back("1-" + std::to_string(memory_size - kIndividualBins));
  for (int pos = memory_size - individual + 1; pos <= memory_size; ++pos) table.columns.push_back(std::to_string(pos));

  std::vector<bool> aligned(corpus.size(), false);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    aligned[i] = i < parses.size() && parses[i].tokens.size() + 2 == corpus[i].size();
    if (!aligned[i]) ++table.skipped_sentences;
  }

  std::map<std::string, std::pair<std::vector<double>, std::vector<std::size_t>>> cells;
  auto add = [&](const std::string& label, std::size_t col, double p) {
    auto& cell = cells[label];
    if (cell.first.empty()) {
      cell.first.assign(table.columns.size(), 0.0);
      cell.second.assign(table.columns.size(), 0);
    }
    cell.first[col] += p;
    cell.second[col] += 1;
  };

  for (const auto& row : trace) {
    const auto sid = static_cast<std::size_t>(row.sentence);
    if (sid >= corpus.size() || !aligned[sid]) continue;
    const std::size_t slot = attention_argmax(row);
    const int depth = slot_depth(row, slot);
    if (depth < 1) continue;
    const std::size_t col = dependency_column(depth, memory_size);
    const double p = row.probs[static_cast<Eigen::Index>(slot)];

    // Sentence position k holds parse token k-1; boundary markers have no parse.
    const ParsedSentence& parse = parses[sid];
    const int n_tokens = static_cast<int>(parse.tokens.size());
    const int attended = row.positions[slot] - 1;
    const int target = row.target_position() - 1;
    std::string label = "none";
    if (attended >= 1 && attended <= n_tokens && target >= 1 && target <= n_tokens) {
      if (parse.heads[static_cast<std::size_t>(target - 1)] == attended) {
        label = "→" + parse.relations[static_cast<std::size_t>(target - 1)];
      } else if (parse.heads[static_cast<std::size_t>(attended - 1)] == target) {
        label = parse.relations[static_cast<std::size_t>(attended - 1)] + "←";
      }
    }
    add(label, col, p);
    add("ALL", col, p);
  }

  if (cells.count("ALL") == 0) {
    cells["ALL"] = {std::vector<double>(table.columns.size(), 0.0), std::vector<std::size_t>(table.columns.size(), 0)};
  }
  table.rows.push_back("ALL");
  table.sum.push_back(cells["ALL"].first);
  table.count.push_back(cells["ALL"].second);
  for (auto& [label, cell] : cells) {
    if (label == "ALL") continue;
    table.rows.push_back(label);
    table.sum.push_back(cell.first);
    table.count.push_back(cell.second);
  }
  return table;
}

void write_dependency_table(std::ostream& out, const DependencyTable& table) {
  out << "relation";
  for (const auto& c : table.columns) out << "\tmean@" << c;
  for (const auto& c : table.columns) out << "\tsteps@" << c;
  out << '\n';
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    out << table.rows[r];
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      out << '\t';
      if (auto m = table.mean(r, c)) out << format_prob(*m);
    }
    for (std::size_t c = 0; c < table.columns.size(); ++c) out << '\t' << table.count[r][c];
    out << '\n';
  }
}

}  // namespace rmn
