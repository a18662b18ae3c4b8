#include <gtest/gtest.h>

#include <sstream>

#include "rmn/completion.hpp"
#include "rmn/training.hpp"
#include "test_support.hpp"

namespace rmn {
namespace {

Vocabulary vocab_of(const std::string& text) {
  std::istringstream in(text);
  return Vocabulary::build(in);
}

const std::string kThree = "the cat sat\na dog ran\nbirds fly high\n";

ModelStack memorize_three(const Vocabulary& vocab, bool bidirectional) {
  std::istringstream in(kThree);
  const Corpus corpus = encode_corpus(vocab, in);
  ModelConfig mc = testing::small_config({LayerKind::lstm, LayerKind::mb}, true, Composition::gated,
                                         static_cast<int>(vocab.size()), 16, 4);
  if (bidirectional) mc.direction = MemoryDirection::bidirectional;
  ModelStack model = ModelStack::init(mc, 2);
  TrainConfig tc;
  tc.epochs = 150;
  tc.batch_size = 1;
  tc.initial_lr = 2.0;
  tc.lr_halving_start_epoch = tc.epochs + 1;
  tc.record_time = false;
  train(model, corpus.sentences, nullptr, tc);
  return model;
}

TEST(Items, BlankDetection) {
  EXPECT_TRUE(is_blank_token("___"));
  EXPECT_TRUE(is_blank_token("_____"));
  EXPECT_FALSE(is_blank_token("__"));
  EXPECT_FALSE(is_blank_token("a_b"));
  EXPECT_THROW(make_item("x", "no blank here", {"a", "b", "c", "d", "e"}, 0), FormatError);
  EXPECT_THROW(make_item("x", "two ___ blanks ___", {"a", "b", "c", "d", "e"}, 0), FormatError);
  EXPECT_THROW(make_item("x", "one ___", {"a", "b", "c", "d", "e"}, 5), FormatError);
}

TEST(Items, SpliceMultiToken) {
  const CompletionItem item = make_item("1", "she saw her ___ today", {"mother 's", "b", "c", "d", "e"}, 0);
  EXPECT_EQ(item.blank, 3u);
  EXPECT_EQ(item.spliced(0), (std::vector<std::string>{"she", "saw", "her", "mother", "'s", "today"}));
  EXPECT_EQ(item.spliced(1).size(), 5u);
}

TEST(Items, ParseFile) {
  std::istringstream in("q1\tthe ___ sat\tcat\tdog\tran\thigh\tfly\ta\nq2\ta ___ ran\tcat\tdog\tran\thigh\tfly\tb\n");
  const auto items = parse_items(in);
  ASSERT_EQ(items.size(), 2u);
  EXPECT_EQ(items[1].gold, 1);
  EXPECT_EQ(items[0].candidates[4], (std::vector<std::string>{"fly"}));
  std::istringstream bad_gold("q\tthe ___ sat\ta\tb\tc\td\te\tz\n");
  EXPECT_THROW(parse_items(bad_gold), FormatError);
  std::istringstream short_line("q\tthe ___ sat\ta\tb\tc\n");
  EXPECT_THROW(parse_items(short_line), FormatError);
  EXPECT_EQ(gold_letter(2), 'c');
}

TEST(Scoring, UniformModelTiesToFirst) {
  const Vocabulary vocab = vocab_of(kThree);
  const ModelStack uniform(testing::small_config({LayerKind::lstm, LayerKind::mb}, true, Composition::gated,
                                                 static_cast<int>(vocab.size())));
  const auto item = make_item("t", "the ___ sat", {"dog", "cat", "ran", "fly", "high"}, 1);
  const CompletionScore score = score_candidates(uniform, vocab, item);
  for (double lp : score.log_prob) EXPECT_EQ(lp, score.log_prob[0]);
  EXPECT_EQ(score.chosen, 0);
}

TEST(Scoring, TotalNotPerTokenLogProb) {
  const Vocabulary vocab = vocab_of(kThree);
  const ModelStack uniform(testing::small_config({LayerKind::lstm}, false, Composition::linear,
                                                 static_cast<int>(vocab.size())));
  const auto item = make_item("t", "the ___ sat", {"dog ran fly", "cat", "ran", "fly", "high"}, 1);
  const CompletionScore total = score_candidates(uniform, vocab, item);
  const double lv = std::log(static_cast<double>(vocab.size()));
  EXPECT_NEAR(total.log_prob[0], -6 * lv, 1e-9);
  EXPECT_NEAR(total.log_prob[1], -4 * lv, 1e-9);
  EXPECT_EQ(total.chosen, 1);
  const CompletionScore normalized = score_candidates(uniform, vocab, item, true);
  EXPECT_NEAR(normalized.log_prob[0], normalized.log_prob[1], 1e-12);
  EXPECT_EQ(normalized.chosen, 0);
}

TEST(Scoring, MatchesSentenceNllExactly) {
  const Vocabulary vocab = vocab_of(kThree);
  ModelStack m = ModelStack::init(testing::small_config({LayerKind::lstm, LayerKind::mb}, true, Composition::gated,
                                                        static_cast<int>(vocab.size())),
                                  4);
  testing::spread_parameters(m, 5);
  const auto item = make_item("t", "a ___ ran", {"dog", "cat", "sat", "the birds", "high"}, 0);
  const auto score = score_candidates(m, vocab, item);
  for (std::size_t k = 0; k < kCandidates; ++k) {
    std::string line;
    for (const auto& tok : item.spliced(k)) line += tok + ' ';
    EXPECT_EQ(score.log_prob[k], -m.sentence_nll(*vocab.encode(line), false).nll);
  }
}

TEST(Scoring, CandidatePermutation) {
  const Vocabulary vocab = vocab_of(kThree);
  ModelStack m = ModelStack::init(testing::small_config({LayerKind::lstm, LayerKind::mb}, true, Composition::gated,
                                                        static_cast<int>(vocab.size())),
                                  6);
  testing::spread_parameters(m, 7);
  const std::array<std::string, kCandidates> c{"dog", "cat", "sat", "fly", "high"};
  const std::array<std::string, kCandidates> p{c[3], c[0], c[4], c[1], c[2]};
  const auto a = score_candidates(m, vocab, make_item("t", "the ___ ran", c, 0));
  const auto b = score_candidates(m, vocab, make_item("t", "the ___ ran", p, 0));
  const int perm[] = {3, 0, 4, 1, 2};
  for (int k = 0; k < 5; ++k) EXPECT_EQ(b.log_prob[static_cast<std::size_t>(k)], a.log_prob[static_cast<std::size_t>(perm[k])]);
  EXPECT_EQ(p[static_cast<std::size_t>(b.chosen)], c[static_cast<std::size_t>(a.chosen)]);
}

TEST(Scoring, MemorizedModelPicksPlantedCandidate) {
  const Vocabulary vocab = vocab_of(kThree);
  const ModelStack model = memorize_three(vocab, false);
  const auto item = make_item("planted", "the ___ sat", {"dog", "cat", "ran", "fly", "high"}, 1);
  EXPECT_EQ(score_candidates(model, vocab, item).chosen, 1);
  const std::vector<CompletionItem> items{item, make_item("p2", "a dog ___", {"sat", "fly", "high", "ran", "cat"}, 3)};
  EXPECT_EQ(challenge_accuracy(model, vocab, items), 1.0);
  EXPECT_EQ(challenge_accuracy(model, vocab, items), challenge_accuracy(model, vocab, items));
  EXPECT_THROW(challenge_accuracy(model, vocab, {}), std::invalid_argument);
}

TEST(Scoring, BidirectionalModelScores) {
  const Vocabulary vocab = vocab_of(kThree);
  const ModelStack model = memorize_three(vocab, true);
  const auto item = make_item("planted", "birds ___ high", {"dog", "cat", "ran", "fly", "sat"}, 3);
  EXPECT_EQ(score_candidates(model, vocab, item).chosen, 3);
}

TEST(Output, RowFormat) {
  const auto item = make_item("q7", "the ___ sat", {"dog", "cat", "ran", "fly", "high"}, 1);
  CompletionScore score;
  score.log_prob = {-1.5, -0.25, -3, -4, -5};
  score.chosen = 1;
  std::ostringstream out;
  write_completion_header(out);
  write_completion_row(out, item, score);
  const std::string text = out.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "id\tchosen\tgold\tcorrect\tscore_a\tscore_b\tscore_c\tscore_d\tscore_e");
  EXPECT_NE(text.find("q7\tb\tb\t1\t"), std::string::npos);
}

}  // namespace
}  // namespace rmn
