#include "dspca/error.hpp"

namespace dspca {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::io: return "io";
    case ErrorKind::parse: return "parse";
    case ErrorKind::schema: return "schema";
    case ErrorKind::format: return "format";
    case ErrorKind::usage: return "usage";
    case ErrorKind::degenerate_index: return "degenerate-index";
    case ErrorKind::split: return "split";
    case ErrorKind::shape: return "shape";
    case ErrorKind::domain: return "domain";
    case ErrorKind::bandwidth_underflow: return "bandwidth-underflow";
    case ErrorKind::selection: return "selection";
    case ErrorKind::rank_deficiency: return "rank-deficiency";
    case ErrorKind::not_positive_definite: return "not-positive-definite";
    case ErrorKind::tuning: return "tuning";
    case ErrorKind::generation: return "generation";
    case ErrorKind::benchmark: return "benchmark";
    case ErrorKind::internal: return "internal";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::io:
    case ErrorKind::parse:
    case ErrorKind::schema:
    case ErrorKind::format:
    case ErrorKind::usage:
    case ErrorKind::degenerate_index:
    case ErrorKind::split:
    case ErrorKind::domain:
      return 2;
    case ErrorKind::shape:
      return 3;
    default:
      return 4;
  }
}

}  // namespace dspca
