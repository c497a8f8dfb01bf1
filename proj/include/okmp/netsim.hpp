#pragma once

// Server and client harness. ServerCore is a transport-free state machine:
// every input returns the frames to send. Transports (an in-process bus for
// deterministic tests, TCP for live runs) only move bytes and must call into
// the core from one thread at a time.

#include "okmp/ffield.hpp"
#include "okmp/gkm.hpp"
#include "okmp/random.hpp"
#include "okmp/wire.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace okmp::netsim {

/// Salted SHA-256 password roster.
class Roster {
public:
    struct Entry {
        std::string salt_hex;
        std::string digest_hex;
    };

    /// "salt_hex:digest_hex" for a fresh 16-byte salt.
    static std::string make_entry(std::string_view password, RandomSource& rng);
    static std::string digest_hex(std::string_view salt_hex, std::string_view password);

    void add(const MemberId& id, std::string_view password, RandomSource& rng);
    /// Parses "salt_hex:digest_hex"; throws BadConfig.
    void add_entry(const MemberId& id, std::string_view entry);

    bool verify(const MemberId& id, std::string_view password) const;
    bool contains(const MemberId& id) const { return entries_.contains(id); }
    std::size_t size() const noexcept { return entries_.size(); }

private:
    std::map<MemberId, Entry> entries_;
};

struct ServerConfig {
    std::uint64_t prime = kDefaultPrime;
    FieldMode mode = FieldMode::Protocol;
    std::size_t capacity = 8;
    std::size_t dim = 17;
    std::string listen = "127.0.0.1:0";
    /// 0 disables the timer; departures then wait for an explicit flush.
    unsigned batch_window_ms = 250;
    /// Ship the aggregate with each key so members can authenticate.
    bool auth_enabled = false;
    /// Logout-login cycles tolerated per window before the client is closed.
    unsigned churn_limit = 3;
    Roster roster;

    PrimeField field() const { return PrimeField(prime, mode); }
};

/// key = value lines, '#' comments. Keys: prime, mode (protocol|test),
/// capacity, dim, listen, batch_window_ms, auth_enabled, churn_limit and
/// member.<id> = salt_hex:digest_hex. Throws BadConfig.
ServerConfig parse_config(std::string_view text);
ServerConfig load_config(const std::filesystem::path& path);

using ConnId = std::uint64_t;

struct Outbound {
    ConnId to = 0;
    wire::Bytes frame;
    /// Close the connection after delivering this frame.
    bool close = false;
};

struct ServerStatus {
    std::uint64_t epoch = 0;
    std::size_t bound = 0;
    std::size_t free = 0;
    std::size_t connections = 0;
    std::size_t pending_departures = 0;
    std::size_t deferred_joins = 0;
    std::uint64_t broadcasts = 0;
};

class ServerCore {
public:
    ServerCore(ServerConfig config, std::unique_ptr<RandomSource> rng);

    std::vector<Outbound> connect(ConnId conn);
    std::vector<Outbound> receive(ConnId conn, std::span<const std::byte> frame);
    /// A dropped connection counts as a departure of its member.
    std::vector<Outbound> disconnect(ConnId conn);

    /// Closes the batch window: closes churning clients, folds all pending
    /// departures and deferred joins into one refresh and broadcasts once.
    /// Empty windows send nothing.
    std::vector<Outbound> flush();
    /// Fresh secret for everyone; drains a pending window first.
    std::vector<Outbound> rekey();
    /// New scalars for every slot, keys re-issued to connected members;
    /// drains a pending window first.
    std::vector<Outbound> rotate();

    bool has_pending() const noexcept { return !pending_.empty() || !deferred_.empty(); }
    ServerStatus status() const;
    const GroupState& group() const noexcept { return group_; }
    const ServerConfig& config() const noexcept { return config_; }
    /// The most recent REKEY frame, sent even when nobody is connected.
    const wire::Bytes& last_broadcast() const noexcept { return last_broadcast_; }

private:
    void broadcast(const RekeyMessage& msg, std::vector<Outbound>& out);
    void unicast(ConnId conn, const wire::Frame& frame, std::vector<Outbound>& out, bool close = false);
    void on_join(ConnId conn, const wire::JoinRequestBody& req, std::vector<Outbound>& out);
    void on_leave(ConnId conn, const wire::LeaveNoticeBody& req, std::vector<Outbound>& out);
    void queue_departure(const MemberId& id);
    void drop_connection(ConnId conn);

    ServerConfig config_;
    PrimeField field_;
    std::unique_ptr<RandomSource> rng_;
    GroupState group_;
    std::set<ConnId> connections_;
    std::map<ConnId, MemberId> sessions_;
    std::vector<MemberId> pending_;
    struct Deferred {
        MemberId id;
        ConnId conn;
    };
    std::vector<Deferred> deferred_;
    std::map<MemberId, unsigned> cycles_;
    std::map<MemberId, ConnId> churn_conn_;
    std::uint64_t broadcasts_ = 0;
    wire::Bytes last_broadcast_;
};

/// Member-side state machine; consumes frames, tracks the latest secret.
class ClientNode {
public:
    ClientNode(MemberId id, std::string credential, const PrimeField& field);

    wire::Bytes join_request() const;
    wire::Bytes leave_request() const;
    void receive(std::span<const std::byte> frame);
    void mark_closed() noexcept { closed_ = true; }

    const MemberId& id() const noexcept { return id_; }
    const std::optional<MemberKey>& key() const noexcept { return key_; }
    std::optional<Fe> last_secret() const noexcept { return last_secret_; }
    const std::optional<RekeyMessage>& last_broadcast() const noexcept { return last_broadcast_; }
    std::uint64_t epoch_seen() const noexcept { return epoch_seen_; }
    std::optional<ErrorCode> last_error() const noexcept { return last_error_; }
    /// The server acknowledged our leave; the key is kept only for study.
    bool departed() const noexcept { return departed_; }
    bool closed() const noexcept { return closed_; }
    std::size_t keys_received() const noexcept { return keys_received_; }
    std::size_t broadcasts_seen() const noexcept { return broadcasts_seen_; }

private:
    MemberId id_;
    std::string credential_;
    PrimeField field_;
    std::optional<MemberKey> key_;
    std::optional<Fe> last_secret_;
    std::optional<RekeyMessage> last_broadcast_;
    std::uint64_t epoch_seen_ = 0;
    std::optional<ErrorCode> last_error_;
    bool departed_ = false;
    bool closed_ = false;
    std::size_t keys_received_ = 0;
    std::size_t broadcasts_seen_ = 0;
};

/// Synchronous in-process transport: every send is fully processed before
/// it returns. Deterministic given the server's rng.
class InProcessBus {
public:
    explicit InProcessBus(ServerCore& server) : server_(server) {}

    ConnId attach(ClientNode& client);
    void detach(ConnId conn);
    void send(ConnId conn, std::span<const std::byte> frame);

    void flush() { deliver(server_.flush()); }
    void rekey() { deliver(server_.rekey()); }
    void rotate() { deliver(server_.rotate()); }

    bool is_open(ConnId conn) const { return clients_.contains(conn); }
    /// Observes every frame the server emits, e.g. to write a capture.
    void set_tap(std::function<void(ConnId, std::span<const std::byte>)> tap) { tap_ = std::move(tap); }

private:
    void deliver(const std::vector<Outbound>& out);

    ServerCore& server_;
    std::map<ConnId, ClientNode*> clients_;
    ConnId next_ = 1;
    std::function<void(ConnId, std::span<const std::byte>)> tap_;
};

// --- TCP ------------------------------------------------------------------------
// Frames travel as u32 LE length + frame bytes, as in capture files.

/// Listens, owns a worker thread that performs every ServerCore call.
class TcpServer {
public:
    /// Throws BindFailure, BadConfig.
    TcpServer(ServerConfig config, std::unique_ptr<RandomSource> rng);
    ~TcpServer();
    TcpServer(const TcpServer&) = delete;
    TcpServer& operator=(const TcpServer&) = delete;

    std::string host() const { return host_; }
    std::uint16_t port() const noexcept { return port_; }

    void flush();
    void rekey();
    void rotate();
    ServerStatus status();
    /// Equality query against the current group secret, for agreement checks.
    bool secret_matches(Fe candidate);
    /// Idempotent; joins the worker.
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::string host_;
    std::uint16_t port_ = 0;
};

/// Blocking client socket speaking the length-prefixed frame stream.
class TcpClient {
public:
    /// Throws ConnectionClosed when the server cannot be reached.
    TcpClient(const std::string& host, std::uint16_t port);
    ~TcpClient();
    TcpClient(const TcpClient&) = delete;
    TcpClient& operator=(const TcpClient&) = delete;

    void send(std::span<const std::byte> frame);
    /// nullopt on timeout; throws ConnectionClosed once the peer is gone.
    std::optional<wire::Bytes> receive(std::chrono::milliseconds timeout);
    void close();

private:
    int fd_ = -1;
    wire::Bytes buffer_;
};

/// Parses "host:port"; throws BadConfig.
std::pair<std::string, std::uint16_t> split_endpoint(std::string_view endpoint);

} // namespace okmp::netsim
