#pragma once

#include <string>
#include <utility>
#include <variant>

namespace edgeplace {

/// Failure descriptor carried by Outcome. `code` is a stable machine-readable
/// tag (e.g. "capacity:cpu", "parse", "validation"); `message` explains it.
struct Error {
  std::string code;
  std::string message;
};

/// Value-or-error result for operations whose failure is an expected outcome.
template <typename T>
class Outcome {
 public:
  Outcome(T value) : state_(std::in_place_index<0>, std::move(value)) {}
  Outcome(Error error) : state_(std::in_place_index<1>, std::move(error)) {}

  bool ok() const { return state_.index() == 0; }
  explicit operator bool() const { return ok(); }

  T& operator*() { return std::get<0>(state_); }
  const T& operator*() const { return std::get<0>(state_); }
  T* operator->() { return &std::get<0>(state_); }
  const T* operator->() const { return &std::get<0>(state_); }
  const Error& error() const { return std::get<1>(state_); }

 private:
  std::variant<T, Error> state_;
};

}  // namespace edgeplace
