#pragma once

#include <random>

namespace nfgnn {

/// The one generator type threaded through every stochastic step.
using Rng = std::mt19937_64;

}  // namespace nfgnn
