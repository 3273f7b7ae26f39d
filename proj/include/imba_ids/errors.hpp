#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace imba_ids {

// Shape or dimension precondition violated.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input data could not be read or interpreted.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A configuration key is missing or holds an invalid value.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::invalid_argument(key + ": " + what), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

// Training hit a non-finite loss.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(std::size_t step, std::size_t batch, const std::string& what)
      : std::runtime_error(what), step_(step), batch_(batch) {}

  std::size_t step() const noexcept { return step_; }
  std::size_t batch() const noexcept { return batch_; }

 private:
  std::size_t step_;
  std::size_t batch_;
};

}  // namespace imba_ids
