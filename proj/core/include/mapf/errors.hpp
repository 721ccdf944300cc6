#pragma once

#include <stdexcept>

namespace mapf {

// Caller passed a config whose fields violate a documented constraint.
struct InvalidConfig : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Goal (or start) cell is blocked or out of bounds.
struct InvalidGoal : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A per-agent container has the wrong number of entries.
struct ArityMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Requested instance cannot be produced (e.g. not enough connected free cells).
struct InstanceInfeasible : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Token id outside the vocabulary.
struct InvalidToken : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Non-finite value showed up where the math requires finite ones.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shard or checkpoint file is truncated or has a bad magic/version/count.
struct CorruptShard : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Artifact was produced under a different vocabulary than this build's.
struct IncompatibleVocabulary : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Artifact's stored config does not match what the caller expects.
struct ConfigMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Policy artifact (e.g. a model checkpoint) cannot drive this build's
// episodes: wrong vocabulary or wrong action set.
struct IncompatiblePolicy : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A multi-stage build hit a condition that makes its output untrustworthy.
struct PipelineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mapf
