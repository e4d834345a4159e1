#pragma once

#include <stdexcept>
#include <string>

namespace crowdsim {

// Invalid scenario, parameter or file content supplied by the user.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke an operation's precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A query against state that cannot answer it, e.g. perceiving a dead agent.
class QueryError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Non-finite losses or gradients during learning.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Structurally invalid persisted files (replays, checkpoints).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace crowdsim
