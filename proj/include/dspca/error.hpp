#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace dspca {

enum class ErrorKind {
  io,
  parse,
  schema,
  format,
  usage,
  degenerate_index,
  split,
  shape,
  domain,
  bandwidth_underflow,
  selection,
  rank_deficiency,
  not_positive_definite,
  tuning,
  generation,
  benchmark,
  internal,
};

const char* to_string(ErrorKind kind) noexcept;

/// Process exit code for an error kind: 2 usage/input, 3 data shape,
/// 4 numerical failure.
int exit_code(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Kernel weight mass at a query fell below the underflow floor.
/// `rows` holds the offending observation positions for leave-one-out
/// criteria and is empty for a single-query failure.
class BandwidthUnderflow : public Error {
 public:
  BandwidthUnderflow(const std::string& what, std::vector<std::size_t> rows = {})
      : Error(ErrorKind::bandwidth_underflow, what), rows_(std::move(rows)) {}

  const std::vector<std::size_t>& rows() const noexcept { return rows_; }

 private:
  std::vector<std::size_t> rows_;
};

/// Fewer usable eigenpairs than requested on the factor path.
class RankDeficiency : public Error {
 public:
  RankDeficiency(const std::string& what, long usable_rank)
      : Error(ErrorKind::rank_deficiency, what), usable_rank_(usable_rank) {}

  long usable_rank() const noexcept { return usable_rank_; }

 private:
  long usable_rank_;
};

}  // namespace dspca
