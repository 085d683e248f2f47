#pragma once

#include <stdexcept>
#include <string>

namespace neurodb {

/// Malformed or unreadable user input (files, flags, config values).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition (shape mismatch, k > n, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// No configuration satisfies the requested time/space ceilings.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A metric has no defined value for the given inputs (e.g. all-zero truth).
class UndefinedMetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Construction of an index or engine cannot proceed; names the offending leaf.
class BuildError : public std::runtime_error {
 public:
  BuildError(const std::string& what, int leaf)
      : std::runtime_error(what), leaf_(leaf) {}
  int leaf() const noexcept { return leaf_; }

 private:
  int leaf_;
};

/// Failure while reading a serialized model or engine file.
class LoadError : public std::runtime_error {
 public:
  enum class Kind { BadMagic, Version, Truncated, Checksum, Malformed, Io };

  LoadError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

inline void require(bool condition, const char* message) {
  if (!condition) [[unlikely]] throw ContractError(message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) [[unlikely]] throw ContractError(message);
}

}  // namespace neurodb
