#include "okmp/error.hpp"

namespace okmp {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::FieldMismatch: return "FieldMismatch";
    case ErrorCode::ZeroInverse: return "ZeroInverse";
    case ErrorCode::NotPrime: return "NotPrime";
    case ErrorCode::FieldTooSmall: return "FieldTooSmall";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::DimTooSmall: return "DimTooSmall";
    case ErrorCode::IsotropyExhausted: return "IsotropyExhausted";
    case ErrorCode::ParamsRejected: return "ParamsRejected";
    case ErrorCode::ZeroSecret: return "ZeroSecret";
    case ErrorCode::IsotropicKey: return "IsotropicKey";
    case ErrorCode::StaleEpoch: return "StaleEpoch";
    case ErrorCode::GroupFull: return "GroupFull";
    case ErrorCode::DuplicateMember: return "DuplicateMember";
    case ErrorCode::UnknownMember: return "UnknownMember";
    case ErrorCode::WrongMode: return "WrongMode";
    case ErrorCode::EpochMismatch: return "EpochMismatch";
    case ErrorCode::ZeroRecovered: return "ZeroRecovered";
    case ErrorCode::SingularTranscript: return "SingularTranscript";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::BadVersion: return "BadVersion";
    case ErrorCode::BadKind: return "BadKind";
    case ErrorCode::TruncatedFrame: return "TruncatedFrame";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NonCanonical: return "NonCanonical";
    case ErrorCode::CorruptCapture: return "CorruptCapture";
    case ErrorCode::BindFailure: return "BindFailure";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::AuthFailed: return "AuthFailed";
    case ErrorCode::ChurnLimit: return "ChurnLimit";
    case ErrorCode::ConnectionClosed: return "ConnectionClosed";
    }
    return "Unknown";
}

int exit_code(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::BadConfig: return 2;
    case ErrorCode::AuthFailed: return 3;
    case ErrorCode::GroupFull: return 4;
    case ErrorCode::DuplicateMember: return 5;
    case ErrorCode::UnknownMember: return 6;
    case ErrorCode::BindFailure: return 7;
    case ErrorCode::ConnectionClosed: return 8;
    case ErrorCode::ChurnLimit: return 9;
    default: return 10;
    }
}

} // namespace okmp
