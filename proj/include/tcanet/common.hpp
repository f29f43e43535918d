#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tcanet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised when a file or byte buffer does not follow its declared layout.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when well-formed input carries invalid values (NaN, broken invariants).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised on caller contract violations: shape mismatches, out-of-range arguments.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Closed interval in normalized video time.
struct Interval {
  double start = 0.0;
  double end = 0.0;

  double length() const { return end - start; }
  double center() const { return 0.5 * (start + end); }
  bool operator==(const Interval&) const = default;
};

/// Scored temporal proposal in normalized video time.
struct Proposal {
  double start = 0.0;
  double end = 0.0;
  double score = 0.0;

  Interval interval() const { return {start, end}; }
  double length() const { return end - start; }
  double center() const { return 0.5 * (start + end); }
  bool operator==(const Proposal&) const = default;
};

/// Derives an independent 64-bit seed for a named random sub-stream.
std::uint64_t substream_seed(std::uint64_t seed, std::string_view name);

/// Derives an independent seed for an indexed sub-stream (per video, per epoch).
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace tcanet
