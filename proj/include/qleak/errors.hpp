#pragma once

#include <stdexcept>
#include <string>

namespace qleak {

// Error codes used across the library. Tests match on the code, not the text.
enum class Errc {
  NotSquare,
  NotHermitian,
  NotPSD,
  NotFinite,
  UnknownLabel,
  WeightMismatch,
  LayoutMismatch,
  DimensionOverflow,
  BadCut,
  DimMismatch,
  NotClassicalControl,
  BlockLeakage,
  NotCPTP,
  UnknownGate,
  SolverDiverged,
  BadPartition,
  BadDistribution,
  NotCQ,
  ParseError,
  ValidationError,
  BadRound,
  NotUnitaryProtocol,
  NotClassicallyControlled,
  HypothesisViolated,
  BadDims,
  NotImplemented,
  IoError,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::NotSquare: return "NotSquare";
    case Errc::NotHermitian: return "NotHermitian";
    case Errc::NotPSD: return "NotPSD";
    case Errc::NotFinite: return "NotFinite";
    case Errc::UnknownLabel: return "UnknownLabel";
    case Errc::WeightMismatch: return "WeightMismatch";
    case Errc::LayoutMismatch: return "LayoutMismatch";
    case Errc::DimensionOverflow: return "DimensionOverflow";
    case Errc::BadCut: return "BadCut";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::NotClassicalControl: return "NotClassicalControl";
    case Errc::BlockLeakage: return "BlockLeakage";
    case Errc::NotCPTP: return "NotCPTP";
    case Errc::UnknownGate: return "UnknownGate";
    case Errc::SolverDiverged: return "SolverDiverged";
    case Errc::BadPartition: return "BadPartition";
    case Errc::BadDistribution: return "BadDistribution";
    case Errc::NotCQ: return "NotCQ";
    case Errc::ParseError: return "ParseError";
    case Errc::ValidationError: return "ValidationError";
    case Errc::BadRound: return "BadRound";
    case Errc::NotUnitaryProtocol: return "NotUnitaryProtocol";
    case Errc::NotClassicallyControlled: return "NotClassicallyControlled";
    case Errc::HypothesisViolated: return "HypothesisViolated";
    case Errc::BadDims: return "BadDims";
    case Errc::NotImplemented: return "NotImplemented";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

inline void require(bool cond, Errc code, const std::string& msg) {
  if (!cond) fail(code, msg);
}

}  // namespace qleak
