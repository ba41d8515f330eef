#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace trafficnmf {

enum class ErrorKind {
  MissingColumn,
  EmptyInput,
  MixedPeriods,
  InvalidRank,
  NonNegativityViolation,
  ShapeMismatch,
  DegenerateClustering,
  HourBinMismatch,
  ZeroTotal,
  MissingInput,
  InvalidConfig,
  NumericalFailure,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  // Message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace trafficnmf
