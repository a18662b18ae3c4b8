#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "rmn/analysis.hpp"
#include "rmn/checkpoint.hpp"
#include "rmn/completion.hpp"
#include "rmn/config.hpp"
#include "rmn/io.hpp"
#include "rmn/training.hpp"

namespace {

using namespace rmn;

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> dim;
  std::optional<int> memory_size;
  std::optional<int> epochs;
  std::optional<std::string> arch;
  std::optional<std::string> temporal;
  std::optional<std::string> compose;
  std::optional<std::string> direction;

  KeyValues flags() const {
    KeyValues kv;
    if (seed) kv["seed"] = std::to_string(*seed);
    if (dim) kv["dim"] = std::to_string(*dim);
    if (memory_size) kv["memory_size"] = std::to_string(*memory_size);
    if (epochs) kv["epochs"] = std::to_string(*epochs);
    if (arch) kv["arch"] = *arch;
    if (temporal) kv["temporal"] = *temporal;
    if (compose) kv["compose"] = *compose;
    if (direction) kv["direction"] = *direction;
    return kv;
  }
};

void add_model_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "key=value run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "overrides the configured seed");
  cmd->add_option("--dim", o.dim, "hidden and embedding size");
  cmd->add_option("--memory-size", o.memory_size, "memory block window n");
  cmd->add_option("--epochs", o.epochs, "number of training epochs");
  cmd->add_option("--arch", o.arch, "lstm, lstm2, lstm3, rm, rmr, completion-rm or a comma list");
  cmd->add_option("--temporal", o.temporal, "temporal matrix")->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--compose", o.compose, "composition function")->check(CLI::IsMember({"linear", "gated"}));
  cmd->add_option("--direction", o.direction, "memory direction")->check(CLI::IsMember({"uni", "bi"}));
}

RunConfig resolve_config(const Overrides& o) {
  RunConfig run;
  if (!o.config_path.empty()) {
    std::istringstream in(read_file(o.config_path));
    apply_key_values(run, parse_key_values(in));
  }
  apply_key_values(run, o.flags());
  return run;
}

std::string vocab_path_for(const std::string& model_path, const std::string& explicit_path) {
  return explicit_path.empty() ? model_path + ".vocab" : explicit_path;
}

Vocabulary read_vocabulary(const std::string& path) {
  std::istringstream in(read_file(path));
  return Vocabulary::load(in);
}

Corpus read_corpus(const Vocabulary& vocab, const std::string& path, std::size_t max_tokens) {
  std::istringstream in(read_file(path));
  Corpus corpus = encode_corpus(vocab, in, max_tokens);
  if (corpus.too_long > 0) {
    std::cerr << "rmn: " << path << ": skipped " << corpus.too_long << " sentences longer than " << max_tokens
              << " tokens\n";
  }
  if (corpus.sentences.empty()) throw Error(path + ": no sentences");
  return corpus;
}

struct LoadedModel {
  LoadedCheckpoint checkpoint;
  Vocabulary vocab;
};

LoadedModel load_model(const std::string& model_path, const std::string& vocab_flag) {
  std::istringstream in(read_file(model_path));
  LoadedModel m{load_checkpoint(in), read_vocabulary(vocab_path_for(model_path, vocab_flag))};
  if (m.vocab.hash() != m.checkpoint.meta.vocab_hash) {
    throw Error(model_path + ": vocabulary does not match the one the model was trained with");
  }
  return m;
}

std::string log_text(const std::vector<EpochLog>& rows) {
  std::ostringstream out;
  write_log_header(out);
  for (const auto& row : rows) write_log_row(out, row);
  return out.str();
}

struct TrainArgs {
  Overrides o;
  std::string corpus, valid, out, vocab, log, resume;
  bool uniform = false;
  bool epoch_checkpoints = true;
};

int run_train(const TrainArgs& a) {
  RunConfig run;
  Vocabulary vocab;
  std::optional<ModelStack> model;
  int start_epoch = 1;
  const std::string vocab_path = vocab_path_for(a.out, a.vocab);

  if (!a.resume.empty()) {
    LoadedModel loaded = load_model(a.resume, vocab_path);
    run = loaded.checkpoint.meta.config;
    if (!a.o.config_path.empty()) throw CLI::ValidationError("--config", "cannot be combined with --resume");
    KeyValues kv = a.o.flags();
    for (const auto& [key, value] : kv) {
      if (key != "epochs") throw CLI::ValidationError("--" + key, "only --epochs may change when resuming");
    }
    apply_key_values(run, kv);
    vocab = std::move(loaded.vocab);
    model.emplace(std::move(loaded.checkpoint.model));
    start_epoch = loaded.checkpoint.meta.epochs_completed + 1;
  } else {
    run = resolve_config(a.o);
    std::istringstream in(read_file(a.corpus));
    vocab = Vocabulary::build(in, run.vocab);
    run.model.vocab_size = static_cast<int>(vocab.size());
    run.model.validate();
    model.emplace(a.uniform ? ModelStack(run.model) : ModelStack::init(run.model, run.train.seed));
  }
  write_file_atomic(vocab_path, vocab.serialize());

  if (a.uniform) {
    write_file_atomic(a.out, checkpoint_bytes(*model, {run, 0, vocab.hash()}));
    std::cout << "wrote uniform model " << a.out << " (|V|=" << vocab.size() << ")\n";
    return 0;
  }

  const Corpus corpus = read_corpus(vocab, a.corpus, run.max_sentence_length);
  std::optional<Corpus> valid;
  if (!a.valid.empty()) valid = read_corpus(vocab, a.valid, run.max_sentence_length);

  run.train.validate();
  if (start_epoch > run.train.epochs) throw Error("checkpoint already completed every configured epoch");

  const std::string log_path = a.log.empty() ? a.out + ".log" : a.log;
  std::string log = log_text({});
  if (start_epoch > 1) {
    // Keep the rows of the epochs already completed when resuming into an
    // existing log.
    std::ifstream existing(log_path);
    std::string line;
    std::getline(existing, line);
    while (std::getline(existing, line)) {
      if (line.empty() || std::stoi(line) >= start_epoch) break;
      log += line + '\n';
    }
  }
  std::string committed;
  auto on_epoch = [&](const EpochLog& row, const ModelStack& m, bool) {
    std::ostringstream line;
    write_log_row(line, row);
    log += line.str();
    write_file_atomic(log_path, log);
    const std::string bytes = checkpoint_bytes(m, {run, row.epoch, vocab.hash()});
    if (a.epoch_checkpoints) write_file_atomic(a.out + ".epoch" + std::to_string(row.epoch), bytes);
    committed = bytes;
    std::cout << line.str() << std::flush;
  };
  std::cout << log_text({});
  const TrainResult result =
      train(*model, corpus.sentences, valid ? &valid->sentences : nullptr, run.train, start_epoch, on_epoch);
  if (result.best) committed = checkpoint_bytes(*result.best, {run, result.best_epoch, vocab.hash()});
  write_file_atomic(a.out, committed);
  std::cout << "wrote " << a.out << " (epoch " << result.best_epoch << ")\n";
  return 0;
}

struct EvalArgs {
  std::string model, vocab, corpus, out, positions, train_corpus, parses, items, cooc;
  std::optional<std::uint64_t> seed;
  std::size_t samples = kDefaultHeatmapSamples;
  int min_distance = kDefaultMinDistance;
  double min_mass = 0.0;
  bool normalize = false;
};

int run_ppl(const EvalArgs& a) {
  const LoadedModel m = load_model(a.model, a.vocab);
  const Corpus corpus = read_corpus(m.vocab, a.corpus, m.checkpoint.meta.config.max_sentence_length);
  std::printf("perplexity\t%.6f\n", perplexity(m.checkpoint.model, corpus.sentences));
  return 0;
}

void require_memory(const ModelStack& model) {
  if (!model.config().has_memory()) throw Error("this analysis needs a model with a memory block");
}

int run_dump_attention(const EvalArgs& a) {
  const LoadedModel m = load_model(a.model, a.vocab);
  const ModelStack& model = m.checkpoint.model;
  require_memory(model);
  const Corpus corpus = read_corpus(m.vocab, a.corpus, m.checkpoint.meta.config.max_sentence_length);
  const AttentionTrace trace = collect_traces(model, corpus.sentences);
  const int n = model.config().memory_size;
  const std::uint64_t seed = a.seed.value_or(m.checkpoint.meta.config.train.seed);
  std::ostringstream heatmap;
  dump_heatmap(trace, n, a.samples, seed, heatmap);
  write_file_atomic(a.out, heatmap.str());
  if (!a.positions.empty()) {
    std::ostringstream avg;
    write_position_average(avg, avg_attention_by_position(trace, n));
    write_file_atomic(a.positions, avg.str());
  }
  std::cout << "wrote " << a.samples << " of " << trace.size() << " steps to " << a.out << '\n';
  return 0;
}

int run_analyze_pairs(const EvalArgs& a) {
  const LoadedModel m = load_model(a.model, a.vocab);
  const ModelStack& model = m.checkpoint.model;
  require_memory(model);
  const std::size_t cap = m.checkpoint.meta.config.max_sentence_length;
  const Corpus corpus = read_corpus(m.vocab, a.corpus, cap);
  const Corpus training = a.train_corpus.empty() ? corpus : read_corpus(m.vocab, a.train_corpus, cap);
  const auto pairs = distant_pairs(collect_traces(model, corpus.sentences), corpus.sentences, m.vocab, a.min_distance,
                                   a.min_mass);
  std::ostringstream pairs_out;
  write_pairs(pairs_out, pairs);
  write_file_atomic(a.out, pairs_out.str());
  std::ostringstream table;
  write_cooccurrence(table, cooccurrence_stats(pairs, training.sentences, model.config().memory_size, a.min_distance));
  write_file_atomic(a.cooc.empty() ? a.out + ".cooc" : a.cooc, table.str());
  std::cout << pairs.size() << " distant pairs\n";
  return 0;
}

int run_analyze_deps(const EvalArgs& a) {
  const LoadedModel m = load_model(a.model, a.vocab);
  const ModelStack& model = m.checkpoint.model;
  require_memory(model);
  // No length cap here: parse blocks are matched to corpus lines by order.
  const Corpus corpus = read_corpus(m.vocab, a.corpus, 0);
  std::istringstream parse_in(read_file(a.parses));
  const auto parses = parse_dependencies(parse_in);
  const DependencyTable table =
      dependency_breakdown(collect_traces(model, corpus.sentences), corpus.sentences, parses, model.config().memory_size);
  std::ostringstream out;
  write_dependency_table(out, table);
  write_file_atomic(a.out, out.str());
  if (table.skipped_sentences > 0) {
    std::cerr << "rmn: skipped " << table.skipped_sentences << " sentences whose parse does not match\n";
  }
  std::cout << "wrote " << table.rows.size() << " relation rows to " << a.out << '\n';
  return 0;
}

int run_complete(const EvalArgs& a) {
  const LoadedModel m = load_model(a.model, a.vocab);
  std::istringstream in(read_file(a.items));
  const auto items = parse_items(in);
  if (items.empty()) throw Error(a.items + ": no items");
  std::ostringstream table;
  write_completion_header(table);
  std::size_t correct = 0;
  for (const auto& item : items) {
    const CompletionScore score = score_candidates(m.checkpoint.model, m.vocab, item, a.normalize);
    write_completion_row(table, item, score);
    correct += score.chosen == item.gold ? 1 : 0;
  }
  if (!a.out.empty()) write_file_atomic(a.out, table.str());
  std::printf("accuracy\t%.6f\t(%zu/%zu)\n", static_cast<double>(correct) / static_cast<double>(items.size()), correct,
              items.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recurrent memory network language models"};
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model on a corpus");
  add_model_flags(train_cmd, train_args.o);
  train_cmd->add_option("--corpus", train_args.corpus, "training text, one sentence per line")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--valid", train_args.valid, "validation text")->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train_args.out, "checkpoint to write")->required();
  train_cmd->add_option("--vocab", train_args.vocab, "vocabulary path (default <out>.vocab)");
  train_cmd->add_option("--log", train_args.log, "training log path (default <out>.log)");
  train_cmd->add_option("--resume", train_args.resume, "continue from an epoch checkpoint")
      ->check(CLI::ExistingFile);
  train_cmd->add_flag("--uniform", train_args.uniform, "write the all-zero (uniform) model without training");
  train_cmd->add_flag("!--no-epoch-checkpoints", train_args.epoch_checkpoints, "skip <out>.epochN files");

  EvalArgs eval;
  auto add_model = [&](CLI::App* cmd) {
    cmd->add_option("--model", eval.model, "checkpoint to load")->required()->check(CLI::ExistingFile);
    cmd->add_option("--vocab", eval.vocab, "vocabulary path (default <model>.vocab)");
  };
  CLI::App* ppl_cmd = app.add_subcommand("ppl", "corpus perplexity");
  add_model(ppl_cmd);
  ppl_cmd->add_option("--corpus", eval.corpus)->required()->check(CLI::ExistingFile);

  CLI::App* dump_cmd = app.add_subcommand("dump-attention", "sampled attention heatmap");
  add_model(dump_cmd);
  dump_cmd->add_option("--corpus", eval.corpus)->required()->check(CLI::ExistingFile);
  dump_cmd->add_option("--out", eval.out, "heatmap table")->required();
  dump_cmd->add_option("--positions", eval.positions, "also write average attention per position");
  dump_cmd->add_option("--samples", eval.samples, "number of sampled steps");
  dump_cmd->add_option("--seed", eval.seed, "sampling seed (default: the model's seed)");

  CLI::App* pairs_cmd = app.add_subcommand("analyze-pairs", "distant attention pairs and co-occurrence");
  add_model(pairs_cmd);
  pairs_cmd->add_option("--corpus", eval.corpus, "text to trace")->required()->check(CLI::ExistingFile);
  pairs_cmd->add_option("--train-corpus", eval.train_corpus, "corpus for co-occurrence counts (default --corpus)")
      ->check(CLI::ExistingFile);
  pairs_cmd->add_option("--out", eval.out, "pairs table")->required();
  pairs_cmd->add_option("--cooc", eval.cooc, "co-occurrence table (default <out>.cooc)");
  pairs_cmd->add_option("--min-distance", eval.min_distance)->check(CLI::PositiveNumber);
  pairs_cmd->add_option("--min-mass", eval.min_mass)->check(CLI::Range(0.0, 1.0));

  CLI::App* deps_cmd = app.add_subcommand("analyze-deps", "attention by dependency relation");
  add_model(deps_cmd);
  deps_cmd->add_option("--corpus", eval.corpus)->required()->check(CLI::ExistingFile);
  deps_cmd->add_option("--parses", eval.parses, "tab-separated parses, one block per corpus line")
      ->required()
      ->check(CLI::ExistingFile);
  deps_cmd->add_option("--out", eval.out)->required();

  CLI::App* complete_cmd = app.add_subcommand("complete", "sentence completion accuracy");
  add_model(complete_cmd);
  complete_cmd->add_option("--items", eval.items)->required()->check(CLI::ExistingFile);
  complete_cmd->add_option("--out", eval.out, "per-item score table");
  complete_cmd->add_flag("--normalize", eval.normalize, "divide scores by the number of predicted tokens");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) return run_train(train_args);
    if (ppl_cmd->parsed()) return run_ppl(eval);
    if (dump_cmd->parsed()) return run_dump_attention(eval);
    if (pairs_cmd->parsed()) return run_analyze_pairs(eval);
    if (deps_cmd->parsed()) return run_analyze_deps(eval);
    if (complete_cmd->parsed()) return run_complete(eval);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "rmn: error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
