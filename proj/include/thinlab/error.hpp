#pragma once

#include <stdexcept>
#include <string>

namespace thinlab {

enum class ErrorKind {
    OverlappingDisks,
    NonHyperbolicGenerator,
    ZeroLowerLeftEntry,
    DeterminantNotOne,
    TooFewGenerators,
    PoleHit,
    NotMixing,
    InadmissibleConcatenation,
    InadmissibleWord,
    EnumerationTooLarge,
    NoConvergence,
    RootNotBracketed,
    NotSquareFree,
    TooLarge,
    BadPrime,
    DepthExhausted,
    NotInNewSpace,
    NotGenerating,
    ModulusMismatch,
    FibersTooLarge,
    BudgetExceeded,
    ConfigParse,
    Overflow,
    InvalidArgument,
};

inline const char* kind_name(ErrorKind k) {
    switch (k) {
    case ErrorKind::OverlappingDisks: return "OverlappingDisks";
    case ErrorKind::NonHyperbolicGenerator: return "NonHyperbolicGenerator";
    case ErrorKind::ZeroLowerLeftEntry: return "ZeroLowerLeftEntry";
    case ErrorKind::DeterminantNotOne: return "DeterminantNotOne";
    case ErrorKind::TooFewGenerators: return "TooFewGenerators";
    case ErrorKind::PoleHit: return "PoleHit";
    case ErrorKind::NotMixing: return "NotMixing";
    case ErrorKind::InadmissibleConcatenation: return "InadmissibleConcatenation";
    case ErrorKind::InadmissibleWord: return "InadmissibleWord";
    case ErrorKind::EnumerationTooLarge: return "EnumerationTooLarge";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::RootNotBracketed: return "RootNotBracketed";
    case ErrorKind::NotSquareFree: return "NotSquareFree";
    case ErrorKind::TooLarge: return "TooLarge";
    case ErrorKind::BadPrime: return "BadPrime";
    case ErrorKind::DepthExhausted: return "DepthExhausted";
    case ErrorKind::NotInNewSpace: return "NotInNewSpace";
    case ErrorKind::NotGenerating: return "NotGenerating";
    case ErrorKind::ModulusMismatch: return "ModulusMismatch";
    case ErrorKind::FibersTooLarge: return "FibersTooLarge";
    case ErrorKind::BudgetExceeded: return "BudgetExceeded";
    case ErrorKind::ConfigParse: return "ConfigParse";
    case ErrorKind::Overflow: return "Overflow";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& detail)
        : std::runtime_error(std::string(kind_name(kind)) + (detail.empty() ? "" : ": " + detail)),
          kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

// 3 for numerical failures, 2 for everything the caller could have fixed
inline int exit_code_for(ErrorKind k) {
    switch (k) {
    case ErrorKind::NoConvergence:
    case ErrorKind::RootNotBracketed:
    case ErrorKind::BudgetExceeded:
        return 3;
    default:
        return 2;
    }
}

}  // namespace thinlab
