#pragma once

#include <stdexcept>
#include <string>

namespace selfcal {

enum class ErrorKind {
    InvalidArgument,
    Parse,
    InsufficientExcitation,
    IncompleteExcitation,
    DegenerateTorqueEffectiveness,
    NoThrustAuthority,
    NotHoverCapable,
    NotPositiveDefinite,
    NoFreefall,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::InsufficientExcitation: return "insufficient excitation";
    case ErrorKind::IncompleteExcitation: return "incomplete excitation";
    case ErrorKind::DegenerateTorqueEffectiveness: return "degenerate torque effectiveness";
    case ErrorKind::NoThrustAuthority: return "no thrust authority in torque nullspace";
    case ErrorKind::NotHoverCapable: return "not capable of static hover";
    case ErrorKind::NotPositiveDefinite: return "matrix not positive definite";
    case ErrorKind::NoFreefall: return "no free-fall segment";
    }
    return "unknown error";
}

// Every failure raised by the library carries a kind so the CLI can map it
// to an exit code without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace selfcal
