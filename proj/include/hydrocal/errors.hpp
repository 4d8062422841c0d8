#pragma once

#include <stdexcept>
#include <string>

namespace hydrocal {

/// Malformed input file; carries the 1-based line number where parsing failed.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, int line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Flow network is not a forest (a cycle exists). `cell()` is a linear index on the cycle.
class TopologyError : public std::runtime_error {
 public:
  TopologyError(long cell, const std::string& what) : std::runtime_error(what), cell_(cell) {}
  long cell() const noexcept { return cell_; }

 private:
  long cell_;
};

/// A skill metric is mathematically undefined for the given series (zero variance, zero mean, ...).
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Inconsistent configuration or inputs that are well-formed but unusable together.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hydrocal
