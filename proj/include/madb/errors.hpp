#pragma once

#include <stdexcept>
#include <string>

namespace madb {

/// Invalid user-supplied configuration (ranges, counts, fractions).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error("config: " + what) {}
};

/// A caller broke an operation's precondition (bad ids, shape mismatch).
class ContractViolation : public std::logic_error {
public:
    explicit ContractViolation(const std::string& what) : std::logic_error("contract: " + what) {}
};

/// A join plan is not executable for its query.
class PlanningError : public std::runtime_error {
public:
    explicit PlanningError(const std::string& what) : std::runtime_error("planning: " + what) {}
};

/// Non-finite values surfaced while training a network.
class TrainingError : public std::runtime_error {
public:
    explicit TrainingError(const std::string& what) : std::runtime_error("training: " + what) {}
};

}  // namespace madb
