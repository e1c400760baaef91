#pragma once

#include <functional>
#include <vector>

namespace nfgnn {

struct EarlyStoppingConfig {
  int patience = 20;
  int max_epochs = 1000;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_criterion = 0.0;
  double best_criterion = 0.0;  // best value seen up to and including this epoch
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_criterion = 0.0;
  bool stopped_early = false;
};

/// Callbacks driving one training run. validate() returns a criterion where
/// larger is better.
struct TrainHooks {
  std::function<double(int epoch)> run_epoch;
  std::function<double()> validate;
  std::function<void()> save_best;
  std::function<void()> restore_best;
};

/// Epochs are 1-based. A strictly better criterion updates the best epoch;
/// the run halts after `patience` consecutive epochs without improvement or at
/// max_epochs, and restore_best() is called before returning. A NumericalError
/// raised inside an epoch is rethrown with the epoch number in its message.
TrainHistory run_early_stopping(const EarlyStoppingConfig& config, const TrainHooks& hooks);

}  // namespace nfgnn
