#pragma once

#include <stdexcept>
#include <string>

namespace nfgnn {

/// Base class for all library errors. Callers that only care about
/// "something went wrong" catch this; the CLI maps ConfigError to exit 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Usage / configuration errors (bad flags, missing files, bad config keys).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// flow_ingest
class MissingColumn : public Error {
 public:
  using Error::Error;
};
class NonNumericFeature : public Error {
 public:
  using Error::Error;
};
class EmptySample : public Error {
 public:
  using Error::Error;
};
class InconsistentDimension : public Error {
 public:
  using Error::Error;
};
class UnknownLabel : public Error {
 public:
  using Error::Error;
};

// graph_builder
class EmptyInput : public Error {
 public:
  using Error::Error;
};

// autodiff_nn
class ShapeMismatch : public Error {
 public:
  using Error::Error;
};
class NumericalError : public Error {
 public:
  using Error::Error;
};
class BatchTooSmall : public Error {
 public:
  using Error::Error;
};
class NotScalarLoss : public Error {
 public:
  using Error::Error;
};

// nfgnn_model
class EmptyGraph : public Error {
 public:
  using Error::Error;
};

// train_eval
class InsufficientClassSize : public Error {
 public:
  using Error::Error;
};

}  // namespace nfgnn
