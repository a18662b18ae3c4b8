// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "rmn/analysis.hpp"
#include "rmn/checkpoint.hpp"
#include "rmn/completion.hpp"
#include "rmn/io.hpp"
#include "rmn/training.hpp"
#include "test_support.hpp"

namespace {

using namespace rmn;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Outcome gradient_fidelity() {
  const auto started = std::chrono::steady_clock::now();
  struct V {
    const char* name;
    const char* arch;
    bool temporal;
    Composition composition;
  };
  const V variants[] = {
      {"RM(+tM-g)", "rm", true, Composition::gated},     {"RM(-tM-g)", "rm", false, Composition::gated},
      {"RM(+tM-l)", "rm", true, Composition::linear},    {"RM(-tM-l)", "rm", false, Composition::linear},
      {"RMR(+tM-g)", "rmr", true, Composition::gated},   {"RMR(-tM-g)", "rmr", false, Composition::gated},
      {"RMR(+tM-l)", "rmr", true, Composition::linear},  {"RMR(-tM-l)", "rmr", false, Composition::linear},
  };
  Rng rng(5);
  const std::vector<EncodedSentence> batch{testing::random_sentence(rng, 12, 6), testing::random_sentence(rng, 12, 4),
                                           testing::random_sentence(rng, 12, 8)};
  double worst = 0.0;
  std::string worst_name;
  for (const auto& v : variants) {
    ModelStack model = ModelStack::init(testing::small_config(parse_arch(v.arch), v.temporal, v.composition, 12, 8, 4), 17);
    testing::spread_parameters(model, 71);
    const GradCheckResult r = testing::model_gradient_check(model, batch);
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      worst_name = std::string(v.name) + " " + r.worst_param;
    }
  }
  const double elapsed = seconds_since(started);
  return {worst < 1e-4 && elapsed < 120.0,
          "max rel error " + fmt("%.2e", worst) + " (" + worst_name + "), " + fmt("%.1f s", elapsed)};
}

// Sentences of 14 words. Word 3 is one of five markers; word 12 is the
// target that marker selects; every other word is one of twenty fillers.
constexpr int kMarkers = 5;
constexpr int kFirstMarker = 3;
constexpr int kFirstTarget = kFirstMarker + kMarkers;
constexpr int kFirstFiller = kFirstTarget + kMarkers;
constexpr int kFillers = 20;
constexpr int kSyntheticVocab = kFirstFiller + kFillers;
constexpr int kMarkerWord = 3;
constexpr int kTargetWord = 12;

EncodedSentence long_distance_sentence(Rng& rng) {
  EncodedSentence s{Vocabulary::kBegin};
  int marker = 0;
  for (int w = 1; w <= 14; ++w) {
    if (w == kMarkerWord) {
      marker = static_cast<int>(rng.below(kMarkers));
      s.push_back(kFirstMarker + marker);
    } else if (w == kTargetWord) {
      s.push_back(kFirstTarget + marker);
    } else {
      s.push_back(kFirstFiller + static_cast<int>(rng.below(kFillers)));
    }
  }
  s.push_back(Vocabulary::kEnd);
  return s;
}

struct LongDistanceScore {
  double accuracy = 0.0;
  double marker_mass = 0.0;
};

LongDistanceScore score_long_distance(const ModelStack& model, const std::vector<EncodedSentence>& test) {
  // Word w sits at encoded index w, i.e. sentence position w + 1. Predicting
  // word 12 happens at t = 12.
  LongDistanceScore score;
  for (const auto& s : test) {
    auto states = model.zero_states();
    for (int t = 1; t <= kTargetWord; ++t) {
      const StepOutput out = model.forward_step(s, t, states);
      if (t != kTargetWord) continue;
      Eigen::Index best = 0;
      out.probs.maxCoeff(&best);
      score.accuracy += best == s[kTargetWord] ? 1.0 : 0.0;
      if (out.has_attention) {
        for (std::size_t k = 0; k < out.attention.positions.size(); ++k) {
          if (out.attention.positions[k] == kMarkerWord + 1) score.marker_mass += out.attention.probs[static_cast<Eigen::Index>(k)];
        }
      }
    }
  }
  score.accuracy /= static_cast<double>(test.size());
  score.marker_mass /= static_cast<double>(test.size());
  return score;
}

TrainConfig long_distance_schedule() {
  TrainConfig tc;
  tc.epochs = 10;
  tc.batch_size = 2;
  tc.initial_lr = 0.5;
  tc.lr_halving_start_epoch = tc.epochs + 1;
  tc.record_time = false;
  return tc;
}

Outcome long_distance() {
  const auto started = std::chrono::steady_clock::now();
  Rng rng(2024);
  std::vector<EncodedSentence> train_set, test_set;
  for (int i = 0; i < 2000; ++i) train_set.push_back(long_distance_sentence(rng));
  for (int i = 0; i < 500; ++i) test_set.push_back(long_distance_sentence(rng));

  ModelConfig rm_config = testing::small_config(parse_arch("rm"), true, Composition::gated, kSyntheticVocab, 32, 15);
  ModelStack rm = ModelStack::init(rm_config, 1);
  // A one-layer LSTM at d = 45 has 19383 parameters against the RM's 19201.
  ModelConfig lstm_config = testing::small_config(parse_arch("lstm"), false, Composition::gated, kSyntheticVocab, 45, 15);
  ModelStack lstm = ModelStack::init(lstm_config, 1);

  const TrainConfig tc = long_distance_schedule();
  train(rm, train_set, nullptr, tc);
  train(lstm, train_set, nullptr, tc);
  const LongDistanceScore rm_score = score_long_distance(rm, test_set);
  const LongDistanceScore lstm_score = score_long_distance(lstm, test_set);
  const double elapsed = seconds_since(started);

  const bool pass = rm_score.accuracy > 0.9 && rm_score.marker_mass > 0.5 && lstm_score.accuracy < rm_score.accuracy &&
                    elapsed < 900.0;
  std::ostringstream detail;
  detail << "RM acc " << fmt("%.3f", rm_score.accuracy) << ", marker mass " << fmt("%.3f", rm_score.marker_mass)
         << "; LSTM acc " << fmt("%.3f", lstm_score.accuracy) << " (" << rm.params().num_values() << " vs "
         << lstm.params().num_values() << " params, " << tc.epochs << " epochs), " << fmt("%.0f s", elapsed);
  return {pass, detail.str()};
}

Outcome uniform_perplexity() {
  std::istringstream text("a b c d e f g\ng f e\nd c b a\n");
  const Vocabulary vocab = Vocabulary::build(text);
  std::istringstream again("a b c d e f g\ng f e\nd c b a\n");
  const Corpus corpus = encode_corpus(vocab, again);
  double worst = 0.0;
  for (const char* arch : {"lstm", "rm", "rmr"}) {
    const ModelStack uniform(testing::small_config(parse_arch(arch), true, Composition::gated,
                                                   static_cast<int>(vocab.size()), 6, 3));
    worst = std::max(worst, std::abs(perplexity(uniform, corpus.sentences) - 10.0));
  }
  return {vocab.size() == 10 && worst <= 1e-6, "|V| = " + std::to_string(vocab.size()) + ", max |ppl - 10| " + fmt("%.1e", worst)};
}

Outcome memorization() {
  std::ostringstream text;
  for (const auto& s : testing::memorization_corpus()) text << s << '\n';
  std::istringstream vin(text.str()), cin(text.str());
  const Vocabulary vocab = Vocabulary::build(vin);
  const Corpus corpus = encode_corpus(vocab, cin);
  ModelStack model = ModelStack::init(testing::small_config(parse_arch("rm"), true, Composition::gated,
                                                            static_cast<int>(vocab.size()), 16, 15),
                                      1);
  TrainConfig tc;
  tc.epochs = 200;
  tc.batch_size = 1;
  tc.initial_lr = 3.0;
  tc.lr_halving_start_epoch = tc.epochs + 1;
  tc.record_time = false;
  const TrainResult result = train(model, corpus.sentences, nullptr, tc);
  const double final_train = result.log.back().train_ppl;
  const double ppl = perplexity(model, corpus.sentences);
  return {final_train < 1.3 && ppl < 1.3,
          "final epoch train ppl " + fmt("%.4f", final_train) + ", eval ppl " + fmt("%.4f", ppl)};
}

Outcome optimizer_exactness() {
  const TrainConfig config;
  bool schedule_ok = true;
  for (int e = 1; e <= 15; ++e) {
    const double expected = e <= 4 ? 1.0 : std::ldexp(1.0, -(e - 4));
    schedule_ok = schedule_ok && lr_at_epoch(config, e) == expected;
  }
  schedule_ok = schedule_ok && lr_at_epoch(config, 15) == 1.0 / 2048.0;

  Rng rng(77);
  double worst_norm = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Tensor> tensors;
    tensors.reserve(4);
    for (int k = 0; k < 4; ++k) tensors.emplace_back(1 + static_cast<int>(rng.below(9)), 1 + static_cast<int>(rng.below(9)));
    ParamRegistry registry;
    for (int k = 0; k < 4; ++k) registry.add("p" + std::to_string(k), tensors[static_cast<std::size_t>(k)]);
    const double magnitude = std::pow(10.0, rng.uniform_open(-2.0, 12.0));
    for (auto& t : tensors) {
      for (Eigen::Index i = 0; i < t.grad.size(); ++i) t.grad.data()[i] = magnitude * rng.uniform_open(-1.0, 1.0);
    }
    if (trial % 7 == 0) tensors[0].grad(0, 0) = 1e150;
    clip_gradients(registry, 5.0);
    double sq = 0.0;
    for (const auto& t : tensors) sq += t.grad.squaredNorm();
    worst_norm = std::max(worst_norm, std::sqrt(sq));
  }
  return {schedule_ok && worst_norm <= 5.0 + 1e-9,
          std::string("schedule ") + (schedule_ok ? "exact" : "WRONG") + ", worst post-clip norm " + fmt("%.12f", worst_norm)};
}

struct PipelineArtifacts {
  std::string checkpoint, log, heatmap, positions, pairs, cooccurrence, dependencies;
};

PipelineArtifacts toy_pipeline(const std::string& data) {
  RunConfig run;
  {
    std::istringstream cfg(read_file(data + "/toy.cfg"));
    apply_key_values(run, parse_key_values(cfg));
  }
  std::istringstream vin(read_file(data + "/train.txt"));
  const Vocabulary vocab = Vocabulary::build(vin, run.vocab);
  run.model.vocab_size = static_cast<int>(vocab.size());
  std::istringstream tin(read_file(data + "/train.txt"));
  const Corpus training = encode_corpus(vocab, tin, run.max_sentence_length);
  std::istringstream ein(read_file(data + "/valid.txt"));
  const Corpus valid = encode_corpus(vocab, ein, 0);

  ModelStack model = ModelStack::init(run.model, run.train.seed);
  const TrainResult result = train(model, training.sentences, &valid.sentences, run.train);
  const ModelStack& best = *result.best;

  PipelineArtifacts a;
  a.checkpoint = checkpoint_bytes(best, {run, result.best_epoch, vocab.hash()});
  std::ostringstream log;
  write_log_header(log);
  for (const auto& row : result.log) write_log_row(log, row);
  a.log = log.str();

  const AttentionTrace trace = collect_traces(best, valid.sentences);
  const int n = run.model.memory_size;
  std::ostringstream heat, pos, pairs_out, cooc, deps;
  dump_heatmap(trace, n, kDefaultHeatmapSamples, run.train.seed, heat);
  write_position_average(pos, avg_attention_by_position(trace, n));
  const auto pairs = distant_pairs(trace, valid.sentences, vocab, 3);
  write_pairs(pairs_out, pairs);
  write_cooccurrence(cooc, cooccurrence_stats(pairs, training.sentences, n, 3));
  std::istringstream pin(read_file(data + "/valid.conll"));
  write_dependency_table(deps, dependency_breakdown(trace, valid.sentences, parse_dependencies(pin), n));
  a.heatmap = heat.str();
  a.positions = pos.str();
  a.pairs = pairs_out.str();
  a.cooccurrence = cooc.str();
  a.dependencies = deps.str();
  return a;
}

Outcome determinism(const std::string& data) {
  const PipelineArtifacts first = toy_pipeline(data);
  const PipelineArtifacts second = toy_pipeline(data);
  std::string differing;
  auto check = [&](const char* name, const std::string& a, const std::string& b) {
    if (a != b || a.empty()) differing += std::string(differing.empty() ? "" : ", ") + name;
  };
  check("checkpoint", first.checkpoint, second.checkpoint);
  check("log", first.log, second.log);
  check("heatmap", first.heatmap, second.heatmap);
  check("positions", first.positions, second.positions);
  check("pairs", first.pairs, second.pairs);
  check("cooccurrence", first.cooccurrence, second.cooccurrence);
  check("dependencies", first.dependencies, second.dependencies);
  return {differing.empty(), differing.empty() ? "checkpoint (" + std::to_string(first.checkpoint.size()) +
                                                     " bytes), log, heatmap and 4 tables byte-identical"
                                               : "differ: " + differing};
}

Outcome completion_oracle() {
  const std::string text = "the cat sat\na dog ran\nbirds fly high\n";
  std::istringstream vin(text), cin(text);
  const Vocabulary vocab = Vocabulary::build(vin);
  const Corpus corpus = encode_corpus(vocab, cin);
  ModelStack model = ModelStack::init(testing::small_config(parse_arch("rm"), true, Composition::gated,
                                                            static_cast<int>(vocab.size()), 16, 4),
                                      2);
  TrainConfig tc;
  tc.epochs = 150;
  tc.batch_size = 1;
  tc.initial_lr = 2.0;
  tc.lr_halving_start_epoch = tc.epochs + 1;
  tc.record_time = false;
  train(model, corpus.sentences, nullptr, tc);
  const CompletionItem planted = make_item("planted", "the ___ sat", {"dog", "cat", "ran", "fly", "high"}, 1);
  const CompletionScore trained = score_candidates(model, vocab, planted);

  const ModelStack uniform(testing::small_config(parse_arch("rm"), true, Composition::gated,
                                                 static_cast<int>(vocab.size()), 16, 4));
  const CompletionScore tie = score_candidates(uniform, vocab, planted);
  bool all_equal = true;
  for (double lp : tie.log_prob) all_equal = all_equal && lp == tie.log_prob[0];
  return {trained.chosen == 1 && tie.chosen == 0 && all_equal,
          std::string("planted item chose '") + gold_letter(trained.chosen) + "' (gold 'b'), uniform tie chose '" +
              gold_letter(tie.chosen) + "'"};
}

AttentionRow hand_row(int sentence, int t, std::vector<double> probs, std::vector<int> ids) {
  AttentionRow r;
  r.sentence = sentence;
  r.t = t;
  r.word_ids = std::move(ids);
  r.probs.resize(static_cast<Eigen::Index>(probs.size()));
  const int first = t - static_cast<int>(probs.size()) + 1;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    r.positions.push_back(first + static_cast<int>(k));
    r.probs[static_cast<Eigen::Index>(k)] = probs[k];
  }
  return r;
}

Outcome analysis_correctness() {
  std::vector<std::string> failures;

  // Distance threshold.
  {
    std::istringstream words("a b c d e f g h i j\n");
    const Vocabulary vocab = Vocabulary::build(words);
    EncodedSentence s{0, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 1};
    std::vector<double> at7(8, 0.0), at6(8, 0.0);
    at7[1] = 1.0;
    at6[2] = 1.0;
    const std::vector<int> ids(s.begin(), s.begin() + 8);
    const auto pairs = distant_pairs({hand_row(0, 8, at7, ids), hand_row(0, 8, at6, ids)}, {s}, vocab);
    if (pairs.size() != 1 || pairs[0].distance != 7) failures.push_back("distance threshold");
  }

  // Co-occurrence against the brute-force scan on 50 sentences.
  {
    Rng rng(50);
    std::vector<EncodedSentence> corpus;
    for (int i = 0; i < 50; ++i) corpus.push_back(testing::random_sentence(rng, 10, 5 + static_cast<int>(rng.below(14))));
    std::vector<DistantPair> pairs;
    for (int k = 0; k < 60; ++k) {
      DistantPair p;
      p.attended_id = 3 + static_cast<int>(rng.below(7));
      p.predicted_id = 3 + static_cast<int>(rng.below(7));
      p.distance = 7 + static_cast<int>(rng.below(9));
      pairs.push_back(p);
    }
    const auto rows = cooccurrence_stats(pairs, corpus, 15);
    bool ok = rows.size() == 9;
    for (const auto& row : rows) {
      double total = 0.0;
      std::size_t n = 0;
      for (const auto& p : pairs) {
        if (p.distance != row.distance) continue;
        total += static_cast<double>(testing::brute_force_cooccurrence(corpus, p.attended_id, p.predicted_id, 15));
        ++n;
      }
      ok = ok && row.pairs == n && (n == 0 ? !row.mean_frequency : *row.mean_frequency == total / static_cast<double>(n));
    }
    if (!ok) failures.push_back("co-occurrence");
  }

  // Dependency cells on three hand-built parses.
  {
    std::istringstream in(
        "1\tA\t0\troot\n2\tB\t1\tmod\n3\tC\t1\tobj\n\n"
        "1\tX\t2\tsubj\n2\tY\t0\troot\n\n"
        "1\tP\t0\troot\n2\tQ\t1\tdet\n3\tR\t2\tamod\n");
    const auto parses = parse_dependencies(in);
    const std::vector<EncodedSentence> corpus{{0, 3, 4, 5, 1}, {0, 6, 7, 1}, {0, 8, 9, 10, 1}};
    const AttentionTrace trace{
        hand_row(0, 2, {0.0, 1.0}, {0, 3}),            hand_row(0, 3, {0.1, 0.8, 0.1}, {0, 3, 4}),
        hand_row(1, 2, {0.0, 1.0}, {0, 6}),            hand_row(2, 4, {0.1, 0.1, 0.6, 0.2}, {0, 8, 9, 10}),
        hand_row(2, 3, {0.1, 0.7, 0.2}, {0, 8, 9}),
    };
    const DependencyTable t = dependency_breakdown(trace, corpus, parses, 4);
    const bool ok = t.rows == std::vector<std::string>{"ALL", "none", "subj←", "→mod", "→obj"} &&
                    t.mean(t.row_index("→mod"), 3) == 1.0 && t.mean(t.row_index("→obj"), 2) == 0.8 &&
                    t.mean(t.row_index("subj←"), 3) == 1.0 && t.count[t.row_index("none")][2] == 2 &&
                    std::abs(*t.mean(t.row_index("none"), 2) - 0.65) < 1e-15 && t.count[0][2] == 3 &&
                    t.count[0][3] == 2 && std::abs(*t.mean(0, 2) - 0.7) < 1e-15;
    if (!ok) failures.push_back("dependency cells");
  }

  std::string detail = "distance 7 in / 6 out, co-occurrence = brute force, dependency cells exact";
  if (!failures.empty()) {
    detail = "failed:";
    for (const auto& f : failures) detail += " " + f;
  }
  return {failures.empty(), detail};
}

Outcome reference_targets(const std::string& source) {
  std::string readme;
  try {
    readme = read_file(source + "/README.md");
  } catch (const Error&) {
    return {false, "README.md not found"};
  }
  std::string missing;
  for (const char* value : {"118.6", "88.9", "127.2", "56.0", "69.2"}) {
    if (readme.find(value) == std::string::npos) missing += std::string(" ") + value;
  }
  return {missing.empty(), missing.empty() ? "full-corpus reference numbers documented in README (not run)"
                                           : "README lacks" + missing};
}

}  // namespace

int main() {
  const std::string source = RMN_SOURCE_DIR;
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"gradient fidelity", gradient_fidelity},
      {"synthetic long-distance dependency", long_distance},
      {"uniform-model perplexity", uniform_perplexity},
      {"overfit memorization", memorization},
      {"optimizer exactness", optimizer_exactness},
      {"determinism", [&] { return determinism(source + "/data/toy"); }},
      {"completion scoring oracle", completion_oracle},
      {"analysis correctness", analysis_correctness},
      {"reference-only targets", [&] { return reference_targets(source); }},
  };
  int failed = 0;
  int index = 0;
  for (const auto& [name, run] : criteria) {
    ++index;
    Outcome outcome;
    try {
      outcome = run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    failed += outcome.pass ? 0 : 1;
    std::printf("%s %d %s: %s\n", outcome.pass ? "PASS" : "FAIL", index, name, outcome.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
