#pragma once

#include <filesystem>
#include <memory>

#include "nfgnn/experiment.hpp"
#include "nfgnn/json_io.hpp"

namespace nfgnn {

/// Everything needed to score new data: config, weights, batch-norm running
/// statistics, one-class center, standardizer and the split it was trained on.
json checkpoint_to_json(const TrainedModel& model);
std::unique_ptr<TrainedModel> checkpoint_from_json(const json& j);

void save_checkpoint(const std::filesystem::path& path, const TrainedModel& model);
/// Throws ConfigError when the file is missing or malformed.
std::unique_ptr<TrainedModel> load_checkpoint(const std::filesystem::path& path);

}  // namespace nfgnn
