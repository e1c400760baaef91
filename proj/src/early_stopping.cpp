#include "nfgnn/early_stopping.hpp"

#include <limits>

#include <fmt/format.h>

#include "nfgnn/errors.hpp"

namespace nfgnn {

TrainHistory run_early_stopping(const EarlyStoppingConfig& config, const TrainHooks& hooks) {
  if (config.max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (config.patience < 1) throw ConfigError("patience must be >= 1");
  TrainHistory h;
  h.best_criterion = -std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    try {
      rec.train_loss = hooks.run_epoch(epoch);
      rec.val_criterion = hooks.validate();
    } catch (const NumericalError& e) {
      throw NumericalError(fmt::format("epoch {}: {}", epoch, e.what()));
    }
    if (rec.val_criterion > h.best_criterion) {
      h.best_criterion = rec.val_criterion;
      h.best_epoch = epoch;
      since_best = 0;
      hooks.save_best();
    } else {
      ++since_best;
    }
    rec.best_criterion = h.best_criterion;
    h.epochs.push_back(rec);
    if (since_best >= config.patience) {
      h.stopped_early = true;
      break;
    }
  }
  hooks.restore_best();
  return h;
}

}  // namespace nfgnn
