#include "okmp/wire.hpp"

#include <charconv>
#include <cstring>
#include <iterator>

namespace okmp::wire {

namespace {

constexpr char kMagic[4] = {'O', 'K', 'M', 'P'};

class Writer {
public:
    void u8(std::uint8_t v) { out_.push_back(std::byte{v}); }
    void u16(std::uint16_t v) {
        u8(static_cast<std::uint8_t>(v));
        u8(static_cast<std::uint8_t>(v >> 8));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) {
            u8(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void u64(std::uint64_t v) {
        const auto at = out_.size();
        out_.resize(at + 8);
        store_le64(v, out_.data() + at);
    }
    void raw(std::span<const std::byte> b) { out_.insert(out_.end(), b.begin(), b.end()); }
    void text(const std::string& s) {
        if (s.size() > 0xffff) {
            throw Error(ErrorCode::ParamsRejected, "string field longer than 65535 bytes");
        }
        u16(static_cast<std::uint16_t>(s.size()));
        raw(std::as_bytes(std::span(s.data(), s.size())));
    }
    void residues(const std::vector<std::uint64_t>& v, std::uint32_t dim) {
        if (v.size() != dim) {
            throw Error(ErrorCode::LengthMismatch, "vector length " + std::to_string(v.size()) +
                                                       " does not match dim " + std::to_string(dim));
        }
        for (auto x : v) {
            u64(x);
        }
    }
    Bytes take() { return std::move(out_); }

private:
    Bytes out_;
};

// Bounds-checked cursor; every read either succeeds or throws TruncatedFrame.
class Reader {
public:
    explicit Reader(std::span<const std::byte> in) : in_(in) {}

    std::size_t remaining() const noexcept { return in_.size() - pos_; }

    std::span<const std::byte> take(std::size_t n) {
        if (n > remaining()) {
            throw Error(ErrorCode::TruncatedFrame, "frame ends " + std::to_string(n - remaining()) +
                                                       " bytes early");
        }
        auto out = in_.subspan(pos_, n);
        pos_ += n;
        return out;
    }
    std::uint8_t u8() { return std::to_integer<std::uint8_t>(take(1)[0]); }
    std::uint16_t u16() {
        const auto b = take(2);
        return static_cast<std::uint16_t>(std::to_integer<unsigned>(b[0]) |
                                          (std::to_integer<unsigned>(b[1]) << 8));
    }
    std::uint32_t u32() {
        const auto b = take(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) {
            v = (v << 8) | std::to_integer<std::uint32_t>(b[static_cast<std::size_t>(i)]);
        }
        return v;
    }
    std::uint64_t u64() { return load_le64(take(8).data()); }
    std::string text() {
        const auto len = u16();
        const auto b = take(len);
        return std::string(reinterpret_cast<const char*>(b.data()), b.size());
    }
    std::uint64_t residue(std::uint64_t p) {
        const auto v = u64();
        if (v >= p) {
            throw Error(ErrorCode::NonCanonical, "element " + std::to_string(v) + " >= p");
        }
        return v;
    }
    std::vector<std::uint64_t> residues(std::uint32_t dim, std::uint64_t p) {
        // Check the whole extent before allocating.
        if (static_cast<std::uint64_t>(dim) * 8 > remaining()) {
            throw Error(ErrorCode::TruncatedFrame, "body shorter than " + std::to_string(dim) +
                                                       " elements");
        }
        std::vector<std::uint64_t> v(dim);
        for (auto& x : v) {
            x = residue(p);
        }
        return v;
    }
    void expect_end() const {
        if (remaining() != 0) {
            throw Error(ErrorCode::LengthMismatch,
                        std::to_string(remaining()) + " trailing bytes after body");
        }
    }

private:
    std::span<const std::byte> in_;
    std::size_t pos_ = 0;
};

void write_header(Writer& w, std::uint8_t version, FrameKind kind, std::uint64_t epoch,
                  std::uint32_t dim) {
    w.raw(std::as_bytes(std::span(kMagic)));
    w.u8(version);
    w.u8(static_cast<std::uint8_t>(kind));
    w.u64(epoch);
    w.u32(dim);
}

void check_magic(Reader& r) {
    const auto magic = r.take(4);
    if (std::memcmp(magic.data(), kMagic, 4) != 0) {
        throw Error(ErrorCode::BadMagic, "frame does not start with OKMP");
    }
}

bool is_vector_kind(FrameKind k) {
    return k == FrameKind::Rekey || k == FrameKind::AuthChallenge || k == FrameKind::AuthResponse;
}

template <class Body>
const Body& body_as(const Frame& f, FrameKind want) {
    if (f.kind != want) {
        throw Error(ErrorCode::BadKind, "expected " + to_string(want) + ", got " + to_string(f.kind));
    }
    const auto* body = std::get_if<Body>(&f.body);
    if (!body) {
        throw Error(ErrorCode::BadKind, to_string(f.kind) + " frame has the wrong body");
    }
    return *body;
}

FVector checked_vector(const PrimeField& field, const std::vector<std::uint64_t>& coords) {
    return FVector(field, coords);
}

} // namespace

std::string to_string(FrameKind kind) {
    switch (kind) {
    case FrameKind::Rekey: return "REKEY";
    case FrameKind::JoinRequest: return "JOIN_REQ";
    case FrameKind::KeyIssue: return "KEY_ISSUE";
    case FrameKind::AuthChallenge: return "AUTH_CH";
    case FrameKind::AuthResponse: return "AUTH_RESP";
    case FrameKind::LeaveNotice: return "LEAVE_NOTICE";
    case FrameKind::Error: return "ERROR";
    }
    return "kind(" + std::to_string(static_cast<unsigned>(kind)) + ")";
}

Bytes encode_frame(const Frame& frame) {
    Writer w;
    write_header(w, kVersion, frame.kind, frame.epoch, frame.dim);
    auto fail = [&] {
        throw Error(ErrorCode::LengthMismatch, to_string(frame.kind) + " frame has the wrong body");
    };
    if (is_vector_kind(frame.kind)) {
        const auto* b = std::get_if<VectorBody>(&frame.body);
        if (!b) {
            fail();
        }
        w.residues(b->coords, frame.dim);
    } else if (frame.kind == FrameKind::KeyIssue) {
        const auto* b = std::get_if<KeyIssueBody>(&frame.body);
        if (!b) {
            fail();
        }
        w.u32(b->slot);
        w.residues(b->v, frame.dim);
        w.u64(b->norm_inv);
        w.u8(b->aggregate ? 1 : 0);
        if (b->aggregate) {
            w.residues(*b->aggregate, frame.dim);
        }
    } else if (frame.kind == FrameKind::JoinRequest) {
        const auto* b = std::get_if<JoinRequestBody>(&frame.body);
        if (!b || frame.dim != 0) {
            fail();
        }
        w.text(b->member_id);
        w.text(b->credential);
    } else if (frame.kind == FrameKind::LeaveNotice) {
        const auto* b = std::get_if<LeaveNoticeBody>(&frame.body);
        if (!b || frame.dim != 0) {
            fail();
        }
        w.text(b->member_id);
    } else if (frame.kind == FrameKind::Error) {
        const auto* b = std::get_if<ErrorBody>(&frame.body);
        if (!b || frame.dim != 0) {
            fail();
        }
        w.u16(static_cast<std::uint16_t>(b->code));
        w.text(b->message);
    } else {
        throw Error(ErrorCode::BadKind, to_string(frame.kind));
    }
    return w.take();
}

Frame decode_frame(std::span<const std::byte> bytes, const PrimeField& field) {
    if (bytes.size() > kMaxFrameBytes) {
        throw Error(ErrorCode::LengthMismatch, "frame exceeds the size limit");
    }
    Reader r(bytes);
    check_magic(r);
    const auto version = r.u8();
    if (version != kVersion) {
        throw Error(ErrorCode::BadVersion, "unsupported frame version " + std::to_string(version));
    }
    const auto kind_byte = r.u8();
    if (kind_byte < 1 || kind_byte > 7) {
        throw Error(ErrorCode::BadKind, "unknown frame kind " + std::to_string(kind_byte));
    }
    Frame f;
    f.kind = static_cast<FrameKind>(kind_byte);
    f.epoch = r.u64();
    f.dim = r.u32();
    const std::uint64_t p = field.modulus();
    if (is_vector_kind(f.kind)) {
        f.body = VectorBody{r.residues(f.dim, p)};
    } else if (f.kind == FrameKind::KeyIssue) {
        KeyIssueBody b;
        b.slot = r.u32();
        b.v = r.residues(f.dim, p);
        b.norm_inv = r.residue(p);
        const auto has = r.u8();
        if (has > 1) {
            throw Error(ErrorCode::LengthMismatch, "aggregate flag must be 0 or 1");
        }
        if (has) {
            b.aggregate = r.residues(f.dim, p);
        }
        f.body = std::move(b);
    } else {
        if (f.dim != 0) {
            throw Error(ErrorCode::LengthMismatch, to_string(f.kind) + " frames carry dim 0");
        }
        if (f.kind == FrameKind::JoinRequest) {
            JoinRequestBody b;
            b.member_id = r.text();
            b.credential = r.text();
            f.body = std::move(b);
        } else if (f.kind == FrameKind::LeaveNotice) {
            f.body = LeaveNoticeBody{r.text()};
        } else {
            const auto code = r.u16();
            if (code > static_cast<std::uint16_t>(ErrorCode::ConnectionClosed)) {
                throw Error(ErrorCode::LengthMismatch, "unknown error code " + std::to_string(code));
            }
            ErrorBody b;
            b.code = static_cast<ErrorCode>(code);
            b.message = r.text();
            f.body = std::move(b);
        }
    }
    r.expect_end();
    return f;
}

Frame rekey_frame(const RekeyMessage& msg) {
    const auto c = msg.c.coords();
    return Frame{FrameKind::Rekey, msg.epoch, static_cast<std::uint32_t>(c.size()),
                 VectorBody{{c.begin(), c.end()}}};
}

RekeyMessage to_rekey(const Frame& frame, const PrimeField& field) {
    const auto& b = body_as<VectorBody>(frame, FrameKind::Rekey);
    return RekeyMessage{frame.epoch, checked_vector(field, b.coords)};
}

Frame key_issue_frame(const MemberKey& key) {
    KeyIssueBody b;
    b.slot = static_cast<std::uint32_t>(key.slot);
    b.v.assign(key.v.coords().begin(), key.v.coords().end());
    b.norm_inv = key.norm_inv.value();
    if (key.aggregate) {
        b.aggregate.emplace(key.aggregate->coords().begin(), key.aggregate->coords().end());
    }
    return Frame{FrameKind::KeyIssue, key.epoch_issued, static_cast<std::uint32_t>(key.v.dim()),
                 std::move(b)};
}

MemberKey to_member_key(const Frame& frame, const PrimeField& field) {
    const auto& b = body_as<KeyIssueBody>(frame, FrameKind::KeyIssue);
    MemberKey key{b.slot, checked_vector(field, b.v), field.from_canonical(b.norm_inv), frame.epoch,
                  std::nullopt};
    if (b.aggregate) {
        key.aggregate = checked_vector(field, *b.aggregate);
    }
    return key;
}

Frame challenge_frame(const AuthChallenge& ch) {
    const auto c = ch.payload.coords();
    return Frame{FrameKind::AuthChallenge, ch.epoch, static_cast<std::uint32_t>(c.size()),
                 VectorBody{{c.begin(), c.end()}}};
}

AuthChallenge to_challenge(const Frame& frame, const PrimeField& field) {
    const auto& b = body_as<VectorBody>(frame, FrameKind::AuthChallenge);
    return AuthChallenge{frame.epoch, checked_vector(field, b.coords)};
}

Frame response_frame(const AuthResponse& resp) {
    const auto c = resp.payload.coords();
    return Frame{FrameKind::AuthResponse, resp.epoch, static_cast<std::uint32_t>(c.size()),
                 VectorBody{{c.begin(), c.end()}}};
}

AuthResponse to_response(const Frame& frame, const PrimeField& field) {
    const auto& b = body_as<VectorBody>(frame, FrameKind::AuthResponse);
    return AuthResponse{frame.epoch, checked_vector(field, b.coords)};
}

Frame join_request_frame(std::string member_id, std::string credential) {
    return Frame{FrameKind::JoinRequest, 0, 0,
                 JoinRequestBody{std::move(member_id), std::move(credential)}};
}

Frame leave_notice_frame(std::string member_id, std::uint64_t epoch) {
    return Frame{FrameKind::LeaveNotice, epoch, 0, LeaveNoticeBody{std::move(member_id)}};
}

Frame error_frame(ErrorCode code, std::string message) {
    return Frame{FrameKind::Error, 0, 0, ErrorBody{code, std::move(message)}};
}

Bytes encode_demo_frame(const DemoRekeyMessage& msg) {
    Writer w;
    write_header(w, kDemoVersion, FrameKind::Rekey, msg.epoch,
                 static_cast<std::uint32_t>(msg.c.size()));
    std::string body;
    for (std::size_t i = 0; i < msg.c.size(); ++i) {
        if (i) {
            body += ',';
        }
        body += to_decimal(msg.c[i]);
    }
    w.raw(std::as_bytes(std::span(body.data(), body.size())));
    return w.take();
}

std::uint8_t frame_version(std::span<const std::byte> bytes) {
    Reader r(bytes);
    check_magic(r);
    return r.u8();
}

DemoRekeyMessage decode_demo_frame(std::span<const std::byte> bytes) {
    Reader r(bytes);
    check_magic(r);
    const auto version = r.u8();
    if (version != kDemoVersion) {
        throw Error(ErrorCode::BadVersion, "not a demo frame (version " + std::to_string(version) + ")");
    }
    if (r.u8() != static_cast<std::uint8_t>(FrameKind::Rekey)) {
        throw Error(ErrorCode::BadKind, "demo frames carry REKEY only");
    }
    DemoRekeyMessage msg;
    msg.epoch = r.u64();
    const auto dim = r.u32();
    const auto body = r.take(r.remaining());
    const std::string_view text(reinterpret_cast<const char*>(body.data()), body.size());
    std::size_t start = 0;
    while (!text.empty() && start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto end = comma == std::string_view::npos ? text.size() : comma;
        try {
            msg.c.push_back(demo_int_from_decimal(text.substr(start, end - start)));
        } catch (const std::invalid_argument&) {
            throw Error(ErrorCode::LengthMismatch, "malformed decimal in demo frame");
        }
        if (msg.c.size() > dim) {
            break;
        }
        start = end + 1;
    }
    if (msg.c.size() != dim) {
        throw Error(ErrorCode::LengthMismatch, "demo frame declares " + std::to_string(dim) +
                                                   " coordinates, carries " +
                                                   std::to_string(msg.c.size()));
    }
    return msg;
}

CaptureWriter::CaptureWriter(const std::filesystem::path& path)
    : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) {
        throw Error(ErrorCode::CorruptCapture, "cannot open capture " + path.string());
    }
}

void CaptureWriter::append(std::span<const std::byte> frame) {
    Writer w;
    w.u32(static_cast<std::uint32_t>(frame.size()));
    w.raw(frame);
    const auto bytes = w.take();
    out_.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out_) {
        throw Error(ErrorCode::CorruptCapture, "capture write failed");
    }
}

void CaptureWriter::flush() { out_.flush(); }

Bytes to_capture(std::span<const Bytes> frames) {
    Writer w;
    for (const auto& f : frames) {
        w.u32(static_cast<std::uint32_t>(f.size()));
        w.raw(f);
    }
    return w.take();
}

std::vector<Bytes> parse_capture(std::span<const std::byte> data) {
    std::vector<Bytes> frames;
    Reader r(data);
    try {
        while (r.remaining() > 0) {
            const auto len = r.u32();
            if (len > kMaxFrameBytes) {
                throw Error(ErrorCode::CorruptCapture, "frame length " + std::to_string(len) +
                                                           " exceeds the limit");
            }
            const auto frame = r.take(len);
            frames.emplace_back(frame.begin(), frame.end());
        }
    } catch (const Error& e) {
        if (e.code() == ErrorCode::CorruptCapture) {
            throw;
        }
        throw Error(ErrorCode::CorruptCapture, std::string("capture ends mid-record: ") + e.what());
    }
    return frames;
}

std::vector<Bytes> read_capture(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::CorruptCapture, "cannot open capture " + path.string());
    }
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_capture(std::as_bytes(std::span(raw)));
}

std::vector<RekeyMessage> rekeys_from_capture(std::span<const Bytes> frames, const PrimeField& field) {
    std::vector<RekeyMessage> out;
    for (const auto& bytes : frames) {
        const Frame f = decode_frame(bytes, field);
        if (f.kind == FrameKind::Rekey) {
            out.push_back(to_rekey(f, field));
        }
    }
    return out;
}

std::uint64_t rekey_length_bytes(const CostModel& model) {
    if (model.n == 0 || model.unit_bits == 0) {
        throw Error(ErrorCode::ParamsRejected, "cost model needs n >= 1 and unit_bits >= 1");
    }
    return (model.n * model.unit_bits + 7) / 8;
}

} // namespace okmp::wire
