#include "okmp/netsim.hpp"

#include "okmp/error.hpp"

#include <boost/algorithm/hex.hpp>
#include <openssl/crypto.h>
#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace okmp::netsim {

namespace {

std::string sha256_hex(std::span<const unsigned char> data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorCode::BadConfig, "SHA-256 unavailable");
    }
    std::string out;
    boost::algorithm::hex_lower(md.begin(), md.begin() + len, std::back_inserter(out));
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
        s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
        s.remove_suffix(1);
    }
    return s;
}

std::uint64_t parse_uint(std::string_view key, std::string_view v) {
    std::uint64_t out = 0;
    int base = 10;
    if (v.starts_with("0x") || v.starts_with("0X")) {
        v.remove_prefix(2);
        base = 16;
    }
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out, base);
    if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) {
        throw Error(ErrorCode::BadConfig, std::string(key) + ": not an unsigned integer");
    }
    return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no" || v == "off") {
        return false;
    }
    throw Error(ErrorCode::BadConfig, std::string(key) + ": expected true or false");
}

} // namespace

// --- roster --------------------------------------------------------------------

std::string Roster::digest_hex(std::string_view salt_hex, std::string_view password) {
    std::vector<unsigned char> data;
    try {
        boost::algorithm::unhex(salt_hex.begin(), salt_hex.end(), std::back_inserter(data));
    } catch (const boost::algorithm::hex_decode_error&) {
        throw Error(ErrorCode::BadConfig, "salt is not hex");
    }
    data.insert(data.end(), password.begin(), password.end());
    return sha256_hex(data);
}

std::string Roster::make_entry(std::string_view password, RandomSource& rng) {
    std::array<unsigned char, 16> salt{};
    for (std::size_t i = 0; i < salt.size(); i += 8) {
        const std::uint64_t r = rng.next_u64();
        for (std::size_t k = 0; k < 8; ++k) {
            salt[i + k] = static_cast<unsigned char>(r >> (8 * k));
        }
    }
    std::string salt_hex;
    boost::algorithm::hex_lower(salt.begin(), salt.end(), std::back_inserter(salt_hex));
    return salt_hex + ":" + digest_hex(salt_hex, password);
}

void Roster::add(const MemberId& id, std::string_view password, RandomSource& rng) {
    add_entry(id, make_entry(password, rng));
}

void Roster::add_entry(const MemberId& id, std::string_view entry) {
    const auto colon = entry.find(':');
    if (id.empty() || colon == std::string_view::npos) {
        throw Error(ErrorCode::BadConfig, "roster entry for '" + id + "' must be salt:digest");
    }
    Entry e{std::string(entry.substr(0, colon)), std::string(entry.substr(colon + 1))};
    std::transform(e.digest_hex.begin(), e.digest_hex.end(), e.digest_hex.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (e.digest_hex.size() != 64 || e.salt_hex.empty() || e.salt_hex.size() % 2 != 0) {
        throw Error(ErrorCode::BadConfig, "roster entry for '" + id + "' is malformed");
    }
    digest_hex(e.salt_hex, ""); // validates the salt
    entries_[id] = std::move(e);
}

bool Roster::verify(const MemberId& id, std::string_view password) const {
    const auto it = entries_.find(id);
    if (it == entries_.end()) {
        return false;
    }
    const std::string got = digest_hex(it->second.salt_hex, password);
    return got.size() == it->second.digest_hex.size() &&
           CRYPTO_memcmp(got.data(), it->second.digest_hex.data(), got.size()) == 0;
}

// --- config --------------------------------------------------------------------

ServerConfig parse_config(std::string_view text) {
    ServerConfig cfg;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view l = line;
        if (const auto hash = l.find('#'); hash != std::string_view::npos) {
            l = l.substr(0, hash);
        }
        l = trim(l);
        if (l.empty()) {
            continue;
        }
        const auto eq = l.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorCode::BadConfig, "line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string_view key = trim(l.substr(0, eq));
        const std::string_view value = trim(l.substr(eq + 1));
        if (key == "prime") {
            cfg.prime = parse_uint(key, value);
        } else if (key == "mode") {
            if (value == "protocol") {
                cfg.mode = FieldMode::Protocol;
            } else if (value == "test") {
                cfg.mode = FieldMode::Test;
            } else {
                throw Error(ErrorCode::BadConfig, "mode must be protocol or test");
            }
        } else if (key == "capacity") {
            cfg.capacity = parse_uint(key, value);
        } else if (key == "dim") {
            cfg.dim = parse_uint(key, value);
        } else if (key == "listen") {
            split_endpoint(value);
            cfg.listen = std::string(value);
        } else if (key == "batch_window_ms") {
            cfg.batch_window_ms = static_cast<unsigned>(parse_uint(key, value));
        } else if (key == "auth_enabled") {
            cfg.auth_enabled = parse_bool(key, value);
        } else if (key == "churn_limit") {
            cfg.churn_limit = static_cast<unsigned>(parse_uint(key, value));
        } else if (key.starts_with("member.")) {
            cfg.roster.add_entry(std::string(key.substr(7)), value);
        } else {
            throw Error(ErrorCode::BadConfig, "unknown key '" + std::string(key) + "'");
        }
    }
    if (cfg.capacity == 0 || cfg.dim == 0 || cfg.dim < cfg.capacity) {
        throw Error(ErrorCode::BadConfig, "need 1 <= capacity <= dim");
    }
    if (cfg.mode == FieldMode::Protocol && cfg.dim <= 2 * cfg.capacity) {
        throw Error(ErrorCode::BadConfig, "protocol mode needs dim > 2 * capacity");
    }
    try {
        cfg.field();
    } catch (const Error& e) {
        throw Error(ErrorCode::BadConfig, std::string("prime: ") + e.what());
    }
    return cfg;
}

ServerConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::BadConfig, "cannot read " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::pair<std::string, std::uint16_t> split_endpoint(std::string_view endpoint) {
    const auto colon = endpoint.rfind(':');
    if (colon == std::string_view::npos || colon == 0) {
        throw Error(ErrorCode::BadConfig, "endpoint must be host:port");
    }
    const auto port = parse_uint("port", endpoint.substr(colon + 1));
    if (port > 65535) {
        throw Error(ErrorCode::BadConfig, "port out of range");
    }
    return {std::string(endpoint.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

// --- server core ----------------------------------------------------------------

ServerCore::ServerCore(ServerConfig config, std::unique_ptr<RandomSource> rng)
    : config_(std::move(config)), field_(config_.field()), rng_(std::move(rng)),
      group_(GroupState::init(field_, config_.capacity, config_.dim, *rng_)) {
    group_.set_provision_aggregate(config_.auth_enabled);
}

std::vector<Outbound> ServerCore::connect(ConnId conn) {
    connections_.insert(conn);
    return {};
}

void ServerCore::drop_connection(ConnId conn) {
    connections_.erase(conn);
    if (const auto s = sessions_.find(conn); s != sessions_.end()) {
        queue_departure(s->second);
        sessions_.erase(s);
    }
    std::erase_if(deferred_, [&](const Deferred& d) { return d.conn == conn; });
}

std::vector<Outbound> ServerCore::disconnect(ConnId conn) {
    drop_connection(conn);
    return {};
}

void ServerCore::unicast(ConnId conn, const wire::Frame& frame, std::vector<Outbound>& out, bool close) {
    out.push_back(Outbound{conn, wire::encode_frame(frame), close});
}

void ServerCore::broadcast(const RekeyMessage& msg, std::vector<Outbound>& out) {
    last_broadcast_ = wire::encode_frame(wire::rekey_frame(msg));
    for (ConnId conn : connections_) {
        out.push_back(Outbound{conn, last_broadcast_, false});
    }
    ++broadcasts_;
}

void ServerCore::queue_departure(const MemberId& id) {
    if (std::find(pending_.begin(), pending_.end(), id) == pending_.end()) {
        pending_.push_back(id);
    }
}

std::vector<Outbound> ServerCore::receive(ConnId conn, std::span<const std::byte> bytes) {
    std::vector<Outbound> out;
    if (!connections_.contains(conn)) {
        return out;
    }
    wire::Frame frame;
    try {
        frame = wire::decode_frame(bytes, field_);
    } catch (const Error& e) {
        unicast(conn, wire::error_frame(e.code(), e.what()), out);
        return out;
    }
    if (const auto* join = std::get_if<wire::JoinRequestBody>(&frame.body)) {
        on_join(conn, *join, out);
    } else if (const auto* leave = std::get_if<wire::LeaveNoticeBody>(&frame.body)) {
        on_leave(conn, *leave, out);
    } else {
        unicast(conn, wire::error_frame(ErrorCode::BadKind, "server accepts JOIN_REQ and LEAVE_NOTICE"), out);
    }
    return out;
}

void ServerCore::on_join(ConnId conn, const wire::JoinRequestBody& req, std::vector<Outbound>& out) {
    const MemberId& id = req.member_id;
    auto refuse = [&](ErrorCode code, std::string why) { unicast(conn, wire::error_frame(code, std::move(why)), out); };
    if (sessions_.contains(conn)) {
        return refuse(ErrorCode::DuplicateMember, "connection already holds a membership");
    }
    if (!config_.roster.verify(id, req.credential)) {
        return refuse(ErrorCode::AuthFailed, "unknown member or wrong credential");
    }
    if (std::any_of(deferred_.begin(), deferred_.end(), [&](const Deferred& d) { return d.id == id; })) {
        return refuse(ErrorCode::DuplicateMember, "'" + id + "' already waiting to rejoin");
    }
    if (std::find(pending_.begin(), pending_.end(), id) != pending_.end()) {
        // Rejoin inside the window that is still processing this id's leave.
        deferred_.push_back({id, conn});
        ++cycles_[id];
        churn_conn_[id] = conn;
        return;
    }
    if (group_.slot_of(id)) {
        return refuse(ErrorCode::DuplicateMember, "'" + id + "' is already a member");
    }
    try {
        auto joined = group_.join(id, field_.rand_nonzero(*rng_));
        sessions_[conn] = id;
        unicast(conn, wire::key_issue_frame(joined.key), out);
        broadcast(joined.message, out);
    } catch (const Error& e) {
        refuse(e.code(), e.what());
    }
}

void ServerCore::on_leave(ConnId conn, const wire::LeaveNoticeBody& req, std::vector<Outbound>& out) {
    const auto d = std::find_if(deferred_.begin(), deferred_.end(),
                                [&](const Deferred& x) { return x.id == req.member_id && x.conn == conn; });
    if (d != deferred_.end()) {
        deferred_.erase(d);
    } else {
        const auto s = sessions_.find(conn);
        if (s == sessions_.end() || s->second != req.member_id) {
            unicast(conn, wire::error_frame(ErrorCode::UnknownMember, "'" + req.member_id +
                                                                          "' is not a member on this connection"),
                    out);
            return;
        }
        sessions_.erase(s);
        queue_departure(req.member_id);
    }
    unicast(conn, wire::leave_notice_frame(req.member_id, group_.epoch()), out);
}

std::vector<Outbound> ServerCore::flush() {
    std::vector<Outbound> out;
    if (!has_pending()) {
        return out;
    }
    for (const auto& [id, cycles] : cycles_) {
        if (cycles > config_.churn_limit && connections_.contains(churn_conn_[id])) {
            const ConnId conn = churn_conn_[id];
            unicast(conn, wire::error_frame(ErrorCode::ChurnLimit, "too many logout-login cycles"), out, true);
            drop_connection(conn);
        }
    }
    std::vector<Deferred> admitted;
    std::size_t room = group_.free_count() + pending_.size();
    for (const auto& d : deferred_) {
        if (!connections_.contains(d.conn)) {
            continue;
        }
        if (admitted.size() < room) {
            admitted.push_back(d);
        } else {
            unicast(d.conn, wire::error_frame(ErrorCode::GroupFull, "no free slot"), out);
        }
    }
    std::vector<MemberId> arrivals;
    for (const auto& d : admitted) {
        arrivals.push_back(d.id);
    }
    auto batch = group_.apply_batch(pending_, arrivals, field_.rand_nonzero(*rng_), *rng_);
    for (std::size_t i = 0; i < admitted.size(); ++i) {
        sessions_[admitted[i].conn] = admitted[i].id;
        unicast(admitted[i].conn, wire::key_issue_frame(batch.keys[i]), out);
    }
    broadcast(batch.message, out);
    pending_.clear();
    deferred_.clear();
    cycles_.clear();
    churn_conn_.clear();
    return out;
}

std::vector<Outbound> ServerCore::rekey() {
    if (has_pending()) {
        return flush();
    }
    std::vector<Outbound> out;
    broadcast(group_.rekey(*rng_), out);
    return out;
}

std::vector<Outbound> ServerCore::rotate() {
    std::vector<Outbound> out = flush();
    const RekeyMessage msg = group_.rotate_all(field_.rand_nonzero(*rng_), *rng_);
    for (const auto& [conn, id] : sessions_) {
        unicast(conn, wire::key_issue_frame(group_.issue_key(*group_.slot_of(id))), out);
    }
    broadcast(msg, out);
    return out;
}

ServerStatus ServerCore::status() const {
    return ServerStatus{group_.epoch(),      group_.bound_count(), group_.free_count(),
                        connections_.size(), pending_.size(),      deferred_.size(),
                        broadcasts_};
}

// --- client ---------------------------------------------------------------------

ClientNode::ClientNode(MemberId id, std::string credential, const PrimeField& field)
    : id_(std::move(id)), credential_(std::move(credential)), field_(field) {}

wire::Bytes ClientNode::join_request() const {
    return wire::encode_frame(wire::join_request_frame(id_, credential_));
}

wire::Bytes ClientNode::leave_request() const {
    return wire::encode_frame(wire::leave_notice_frame(id_));
}

void ClientNode::receive(std::span<const std::byte> bytes) {
    wire::Frame frame;
    try {
        frame = wire::decode_frame(bytes, field_);
    } catch (const Error& e) {
        last_error_ = e.code();
        return;
    }
    switch (frame.kind) {
    case wire::FrameKind::KeyIssue:
        key_ = wire::to_member_key(frame, field_);
        departed_ = false;
        ++keys_received_;
        break;
    case wire::FrameKind::Rekey: {
        RekeyMessage msg = wire::to_rekey(frame, field_);
        ++broadcasts_seen_;
        epoch_seen_ = msg.epoch;
        if (key_ && msg.epoch >= key_->epoch_issued) {
            last_secret_ = recover_secret(*key_, msg);
        }
        last_broadcast_ = std::move(msg);
        break;
    }
    case wire::FrameKind::Error:
        last_error_ = std::get<wire::ErrorBody>(frame.body).code;
        break;
    case wire::FrameKind::LeaveNotice:
        departed_ = true;
        break;
    default:
        break;
    }
}

// --- in-process bus ---------------------------------------------------------------

ConnId InProcessBus::attach(ClientNode& client) {
    const ConnId conn = next_++;
    clients_[conn] = &client;
    deliver(server_.connect(conn));
    return conn;
}

void InProcessBus::detach(ConnId conn) {
    clients_.erase(conn);
    deliver(server_.disconnect(conn));
}

void InProcessBus::send(ConnId conn, std::span<const std::byte> frame) {
    if (!clients_.contains(conn)) {
        throw Error(ErrorCode::ConnectionClosed, "connection " + std::to_string(conn) + " is closed");
    }
    deliver(server_.receive(conn, frame));
}

void InProcessBus::deliver(const std::vector<Outbound>& out) {
    for (const auto& o : out) {
        if (tap_) {
            tap_(o.to, o.frame);
        }
        const auto it = clients_.find(o.to);
        if (it == clients_.end()) {
            continue;
        }
        it->second->receive(o.frame);
        if (o.close) {
            it->second->mark_closed();
            clients_.erase(it);
        }
    }
}

} // namespace okmp::netsim
