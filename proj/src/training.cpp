#include "rmn/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "rmn/analysis.hpp"

namespace rmn {

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(initial_lr > 0.0)) throw std::invalid_argument("initial_lr must be positive");
  if (lr_halving_start_epoch < 1) throw std::invalid_argument("lr_halving_start_epoch must be >= 1");
  if (!(clip_threshold > 0.0)) throw std::invalid_argument("clip_threshold must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must lie in [0, 1)");
}

double lr_at_epoch(const TrainConfig& config, int epoch) {
  if (epoch < 1) throw std::invalid_argument("lr_at_epoch: epochs are 1-indexed");
  if (epoch < config.lr_halving_start_epoch) return config.initial_lr;
  return std::ldexp(config.initial_lr, -(epoch - config.lr_halving_start_epoch + 1));
}

double sgd_update(ParamRegistry& registry, double lr, double clip_threshold) {
  const double scale = clip_gradients(registry, clip_threshold);
  for (const auto& e : registry) {
    e.tensor->value -= lr * e.tensor->grad;
    if (!all_finite(e.tensor->value)) throw NumericError("non-finite parameter after update: " + e.name);
    e.tensor->zero_grad();
  }
  return scale;
}

void write_log_header(std::ostream& out) { out << "epoch\tlr\ttrain_ppl\tvalid_ppl\tseconds\n"; }

void write_log_row(std::ostream& out, const EpochLog& row) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d\t%.10g\t%.6f\t", row.epoch, row.lr, row.train_ppl);
  out << buf;
  if (row.valid_ppl) {
    std::snprintf(buf, sizeof buf, "%.6f", *row.valid_ppl);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "\t%.3f\n", row.seconds);
  out << buf;
}

TrainingDiverged::TrainingDiverged(int epoch, std::size_t batch, const std::string& what)
    : NumericError("training diverged at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) +
                   ": " + what),
      epoch_(epoch),
      batch_(batch) {}

double batch_loss_and_grad(ModelStack& model, const std::vector<EncodedSentence>& sentences, const Batch& batch,
                           const TrainMode& mode) {
  std::size_t tokens = 0;
  for (std::size_t idx : batch.members) tokens += sentences.at(idx).size() - 1;
  const double weight = 1.0 / static_cast<double>(tokens);
  double nll = 0.0;
  for (std::size_t idx : batch.members) nll += model.accumulate_gradients(sentences[idx], weight, mode);
  return nll * weight;
}

TrainResult train(ModelStack& model, const std::vector<EncodedSentence>& sentences,
                  const std::vector<EncodedSentence>* valid, const TrainConfig& config, int start_epoch,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (sentences.empty()) throw std::invalid_argument("train: empty corpus");
  for (const auto& s : sentences) {
    if (s.size() < 2) throw std::invalid_argument("train: sentence shorter than 2 ids");
  }
  const bool has_valid = valid != nullptr && !valid->empty();

  TrainResult result;
  double best_valid = INFINITY;
  model.params().zero_grad();
  for (int epoch = start_epoch; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const double lr = lr_at_epoch(config, epoch);
    const auto batches = bucket_batches(sentences, config.batch_size, config.seed + static_cast<std::uint64_t>(epoch));
    Rng dropout_rng = Rng(config.seed).split(static_cast<std::uint64_t>(epoch));
    const TrainMode mode{config.dropout, &dropout_rng};

    double epoch_nll = 0.0;
    std::size_t epoch_tokens = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const Batch& batch = batches[b];
      try {
        const double mean = batch_loss_and_grad(model, sentences, batch, mode);
        if (!std::isfinite(mean)) throw NumericError("non-finite batch loss");
        const std::size_t tokens = batch.members.size() * (batch.length - 1);
        epoch_nll += mean * static_cast<double>(tokens);
        epoch_tokens += tokens;
        sgd_update(model.params(), lr, config.clip_threshold);
      } catch (const NumericError& e) {
        throw TrainingDiverged(epoch, b, e.what());
      }
    }

    EpochLog row;
    row.epoch = epoch;
    row.lr = lr;
    row.train_ppl = std::exp(epoch_nll / static_cast<double>(epoch_tokens));
    bool is_best = true;
    if (has_valid) {
      row.valid_ppl = perplexity(model, *valid);
      is_best = *row.valid_ppl < best_valid;
      if (is_best) {
        best_valid = *row.valid_ppl;
        result.best = model;
      }
    }
    if (is_best) result.best_epoch = epoch;
    if (config.record_time) {
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    }
    result.log.push_back(row);
    if (on_epoch) on_epoch(row, model, is_best);
  }
  return result;
}

}  // namespace rmn
