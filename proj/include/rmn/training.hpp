#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "rmn/data.hpp"
#include "rmn/model.hpp"

namespace rmn {

struct TrainConfig {
  int epochs = 15;
  std::size_t batch_size = 20;
  double initial_lr = 1.0;
  int lr_halving_start_epoch = 5;  // first epoch that runs at a halved rate
  double clip_threshold = 5.0;
  std::uint64_t seed = 1;
  double dropout = 0.0;
  // When false the seconds column of the log is written as 0 so that logs of
  // identical runs compare byte-for-byte.
  bool record_time = true;

  void validate() const;
};

double lr_at_epoch(const TrainConfig& config, int epoch);

// Clips to the threshold, takes one SGD step, then clears every gradient.
// Returns the clipping scale.
double sgd_update(ParamRegistry& registry, double lr, double clip_threshold);

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double train_ppl = 0.0;
  std::optional<double> valid_ppl;
  double seconds = 0.0;
};

void write_log_header(std::ostream& out);
void write_log_row(std::ostream& out, const EpochLog& row);

class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(int epoch, std::size_t batch, const std::string& what);
  int epoch() const { return epoch_; }
  std::size_t batch() const { return batch_; }

 private:
  int epoch_;
  std::size_t batch_;
};

struct TrainResult {
  std::vector<EpochLog> log;
  int best_epoch = 0;
  std::optional<ModelStack> best;  // set when a validation corpus is given
};

// Callback after each epoch with the current model; `is_best` marks a new
// best validation perplexity (always true without validation data).
using EpochCallback = std::function<void(const EpochLog&, const ModelStack&, bool is_best)>;

// Mean-per-token NLL minibatch SGD over equal-length buckets. Epochs run
// from start_epoch to config.epochs inclusive; every source of randomness is
// derived from (seed, epoch), so resuming from an epoch checkpoint is exact.
TrainResult train(ModelStack& model, const std::vector<EncodedSentence>& sentences,
                  const std::vector<EncodedSentence>* valid, const TrainConfig& config, int start_epoch = 1,
                  const EpochCallback& on_epoch = {});

// Mean-per-token NLL of one batch, with gradients accumulated into the model.
double batch_loss_and_grad(ModelStack& model, const std::vector<EncodedSentence>& sentences, const Batch& batch,
                           const TrainMode& mode = {});

}  // namespace rmn
