#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace okmp {

enum class ErrorCode {
    FieldMismatch,
    ZeroInverse,
    NotPrime,
    FieldTooSmall,
    DimMismatch,
    DimTooSmall,
    IsotropyExhausted,
    ParamsRejected,
    ZeroSecret,
    IsotropicKey,
    StaleEpoch,
    GroupFull,
    DuplicateMember,
    UnknownMember,
    WrongMode,
    EpochMismatch,
    ZeroRecovered,
    SingularTranscript,
    BadMagic,
    BadVersion,
    BadKind,
    TruncatedFrame,
    LengthMismatch,
    NonCanonical,
    CorruptCapture,
    BindFailure,
    BadConfig,
    AuthFailed,
    ChurnLimit,
    ConnectionClosed,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Process exit status used by the CLI for a given error.
int exit_code(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace okmp
