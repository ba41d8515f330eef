#include "trafficnmf/error.hpp"

namespace trafficnmf {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::MixedPeriods: return "MixedPeriods";
    case ErrorKind::InvalidRank: return "InvalidRank";
    case ErrorKind::NonNegativityViolation: return "NonNegativityViolation";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::DegenerateClustering: return "DegenerateClustering";
    case ErrorKind::HourBinMismatch: return "HourBinMismatch";
    case ErrorKind::ZeroTotal: return "ZeroTotal";
    case ErrorKind::MissingInput: return "MissingInput";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::NumericalFailure: return "NumericalFailure";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), detail_(message) {}

}  // namespace trafficnmf
