#pragma once

// Binary framing. Every frame starts with an 18-byte header:
//   "OKMP" | version u8 | kind u8 | epoch u64 LE | dim u32 LE
// followed by a kind-specific body. Field elements are 8-byte little-endian
// canonical residues; anything >= p is rejected on decode.
//
// KEY_ISSUE frames carry member secrets and belong on the confidential
// unicast channel only.

#include "okmp/auth.hpp"
#include "okmp/error.hpp"
#include "okmp/ffield.hpp"
#include "okmp/gkm.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace okmp::wire {

using Bytes = std::vector<std::byte>;

inline constexpr std::size_t kHeaderBytes = 18;
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::uint8_t kDemoVersion = 2;
/// Upper bound on any single frame; guards allocations on hostile input.
inline constexpr std::size_t kMaxFrameBytes = std::size_t{1} << 26;

enum class FrameKind : std::uint8_t {
    Rekey = 1,
    JoinRequest = 2,
    KeyIssue = 3,
    AuthChallenge = 4,
    AuthResponse = 5,
    LeaveNotice = 6,
    Error = 7,
};

std::string to_string(FrameKind kind);

/// Rekey, AuthChallenge, AuthResponse: exactly dim residues.
struct VectorBody {
    std::vector<std::uint64_t> coords;
    friend bool operator==(const VectorBody&, const VectorBody&) = default;
};

/// slot u32 | v (dim residues) | norm_inv | has_aggregate u8 | [u (dim residues)]
struct KeyIssueBody {
    std::uint32_t slot = 0;
    std::vector<std::uint64_t> v;
    std::uint64_t norm_inv = 0;
    std::optional<std::vector<std::uint64_t>> aggregate;
    friend bool operator==(const KeyIssueBody&, const KeyIssueBody&) = default;
};

/// id and credential, each u16-length-prefixed UTF-8.
struct JoinRequestBody {
    std::string member_id;
    std::string credential;
    friend bool operator==(const JoinRequestBody&, const JoinRequestBody&) = default;
};

/// u16-length-prefixed id. Sent by a member to leave and echoed back as the
/// acknowledgement.
struct LeaveNoticeBody {
    std::string member_id;
    friend bool operator==(const LeaveNoticeBody&, const LeaveNoticeBody&) = default;
};

/// code u16 | u16-length-prefixed message
struct ErrorBody {
    ErrorCode code = ErrorCode::BadConfig;
    std::string message;
    friend bool operator==(const ErrorBody&, const ErrorBody&) = default;
};

using FrameBody = std::variant<VectorBody, KeyIssueBody, JoinRequestBody, LeaveNoticeBody, ErrorBody>;

struct Frame {
    FrameKind kind = FrameKind::Rekey;
    std::uint64_t epoch = 0;
    std::uint32_t dim = 0;
    FrameBody body;

    friend bool operator==(const Frame&, const Frame&) = default;
};

/// Throws LengthMismatch when a vector does not have dim entries or the body
/// does not fit the kind, ParamsRejected for strings longer than 65535 bytes.
Bytes encode_frame(const Frame& frame);

/// Throws BadMagic, BadVersion, BadKind, TruncatedFrame, LengthMismatch,
/// NonCanonical. Never reads outside `bytes`.
Frame decode_frame(std::span<const std::byte> bytes, const PrimeField& field);

// Typed helpers between protocol values and frames.
Frame rekey_frame(const RekeyMessage& msg);
RekeyMessage to_rekey(const Frame& frame, const PrimeField& field);
Frame key_issue_frame(const MemberKey& key);
MemberKey to_member_key(const Frame& frame, const PrimeField& field);
Frame challenge_frame(const AuthChallenge& ch);
AuthChallenge to_challenge(const Frame& frame, const PrimeField& field);
Frame response_frame(const AuthResponse& resp);
AuthResponse to_response(const Frame& frame, const PrimeField& field);
Frame join_request_frame(std::string member_id, std::string credential);
Frame leave_notice_frame(std::string member_id, std::uint64_t epoch = 0);
Frame error_frame(ErrorCode code, std::string message);

// Integer demo frames: version 2, kind REKEY, body = comma-separated decimals.
Bytes encode_demo_frame(const DemoRekeyMessage& msg);
DemoRekeyMessage decode_demo_frame(std::span<const std::byte> bytes);
/// Peeks at the version byte; throws TruncatedFrame / BadMagic.
std::uint8_t frame_version(std::span<const std::byte> bytes);

// --- capture files ------------------------------------------------------------
// A capture is a sequence of frames, each preceded by its length as u32 LE.

/// Appends length-prefixed frames to a file. Single writer.
class CaptureWriter {
public:
    /// Truncates an existing file.
    explicit CaptureWriter(const std::filesystem::path& path);
    void append(std::span<const std::byte> frame);
    void flush();

private:
    std::ofstream out_;
};

Bytes to_capture(std::span<const Bytes> frames);
/// Throws CorruptCapture on a short prefix, short frame or oversized length.
std::vector<Bytes> parse_capture(std::span<const std::byte> data);
std::vector<Bytes> read_capture(const std::filesystem::path& path);

/// Decodes the REKEY frames of a capture into an ordered transcript.
std::vector<RekeyMessage> rekeys_from_capture(std::span<const Bytes> frames, const PrimeField& field);

// --- message-length estimators -------------------------------------------------

enum class Scheme { Orthogonal, Euclides, SecureLock };

struct CostModel {
    std::uint64_t n = 1;
    /// Bits per transmitted unit: C for the orthogonal scheme, the prime
    /// size for Euclides, the size of the product of moduli for Secure Lock.
    std::uint64_t unit_bits = 64;
    Scheme scheme = Scheme::Orthogonal;
};

/// Payload bytes of one rekey message, ceil(n * unit_bits / 8). The framed
/// size for the orthogonal scheme adds kHeaderBytes. Throws ParamsRejected
/// when n or unit_bits is zero.
std::uint64_t rekey_length_bytes(const CostModel& model);

} // namespace okmp::wire
