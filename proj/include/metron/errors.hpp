#pragma once

#include <stdexcept>
#include <string>

namespace metron {

enum class Errc {
  StepUnderflow,
  NonFiniteState,
  NoBracket,
  NotTrapped,
  NonDecayingSource,
  NoConvergence,
  LambdaOutOfRange,
  TailNotFree,
  WindowEmpty,
  PreconditionViolated,
  OffShell,
  DegenerateCoupling,
  NoEquilibrium,
  ResonanceSingularity,
  ComplexRoots,
  InvalidSamples,
  GridMismatch,
  OriginSingular,
  QuadratureNotConverged,
  SuperluminalCone,
  KernelUnresolved,
  MetricMismatch,
  InvalidSignature,
  ColorPlaneViolation,
  SingularVChoice,
  DivisionDegenerate,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::StepUnderflow: return "StepUnderflow";
    case Errc::NonFiniteState: return "NonFiniteState";
    case Errc::NoBracket: return "NoBracket";
    case Errc::NotTrapped: return "NotTrapped";
    case Errc::NonDecayingSource: return "NonDecayingSource";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::LambdaOutOfRange: return "LambdaOutOfRange";
    case Errc::TailNotFree: return "TailNotFree";
    case Errc::WindowEmpty: return "WindowEmpty";
    case Errc::PreconditionViolated: return "PreconditionViolated";
    case Errc::OffShell: return "OffShell";
    case Errc::DegenerateCoupling: return "DegenerateCoupling";
    case Errc::NoEquilibrium: return "NoEquilibrium";
    case Errc::ResonanceSingularity: return "ResonanceSingularity";
    case Errc::ComplexRoots: return "ComplexRoots";
    case Errc::InvalidSamples: return "InvalidSamples";
    case Errc::GridMismatch: return "GridMismatch";
    case Errc::OriginSingular: return "OriginSingular";
    case Errc::QuadratureNotConverged: return "QuadratureNotConverged";
    case Errc::SuperluminalCone: return "SuperluminalCone";
    case Errc::KernelUnresolved: return "KernelUnresolved";
    case Errc::MetricMismatch: return "MetricMismatch";
    case Errc::InvalidSignature: return "InvalidSignature";
    case Errc::ColorPlaneViolation: return "ColorPlaneViolation";
    case Errc::SingularVChoice: return "SingularVChoice";
    case Errc::DivisionDegenerate: return "DivisionDegenerate";
  }
  return "Unknown";
}

// Input problems as opposed to solver breakdowns; the CLI maps these to exit code 2.
inline bool is_validation(Errc c) {
  switch (c) {
    case Errc::LambdaOutOfRange:
    case Errc::PreconditionViolated:
    case Errc::OffShell:
    case Errc::DegenerateCoupling:
    case Errc::InvalidSamples:
    case Errc::GridMismatch:
    case Errc::OriginSingular:
    case Errc::SuperluminalCone:
    case Errc::InvalidSignature:
    case Errc::ColorPlaneViolation:
    case Errc::SingularVChoice:
    case Errc::DivisionDegenerate:
    case Errc::NoEquilibrium:
    case Errc::ComplexRoots:
    case Errc::WindowEmpty:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what, int index = -1)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code), index_(index) {}

  Errc code() const noexcept { return code_; }
  // Mode index for NotTrapped(p) in multi-mode solves, -1 otherwise.
  int index() const noexcept { return index_; }

 private:
  Errc code_;
  int index_;
};

}  // namespace metron
