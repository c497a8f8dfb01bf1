#include "okmp/adversary.hpp"
#include "okmp/bench.hpp"
#include "okmp/demo.hpp"
#include "okmp/error.hpp"
#include "okmp/netsim.hpp"
#include "okmp/wire.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <thread>

using namespace okmp;

namespace {

struct Globals {
    std::uint64_t prime = kDefaultPrime;
    std::size_t dim = 17;
    std::size_t capacity = 8;
    std::optional<std::uint64_t> seed;
    std::string mode = "protocol";

    FieldMode field_mode() const { return mode == "demo" ? FieldMode::Test : FieldMode::Protocol; }
    PrimeField field() const { return PrimeField(prime, field_mode()); }
    std::optional<std::uint64_t> effective_seed() const { return seed ? seed : seed_from_env(); }
    std::unique_ptr<RandomSource> rng(std::uint64_t salt = 0) const {
        const auto s = effective_seed();
        return make_random(s ? std::optional<std::uint64_t>(*s + salt) : std::nullopt);
    }
};

std::string hex_prefix(std::span<const std::byte> bytes, std::size_t max = 16) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    for (std::size_t i = 0; i < std::min(max, bytes.size()); ++i) {
        const auto b = std::to_integer<unsigned>(bytes[i]);
        out += kDigits[b >> 4];
        out += kDigits[b & 15];
    }
    return bytes.size() > max ? out + "..." : out;
}

// --- in-process group drivers --------------------------------------------------

/// A server with k logged-in members on the in-process bus.
struct LocalGroup {
    netsim::ServerCore server;
    netsim::InProcessBus bus{server};
    std::vector<std::unique_ptr<netsim::ClientNode>> members;
    std::vector<netsim::ConnId> conns;
    std::optional<wire::CaptureWriter> capture;
    std::uint64_t broadcasts = 0;

    static netsim::ServerConfig config(const Globals& g, std::size_t k, RandomSource& rng) {
        netsim::ServerConfig cfg;
        cfg.prime = g.prime;
        cfg.mode = g.field_mode();
        cfg.capacity = g.capacity;
        cfg.dim = g.dim;
        cfg.batch_window_ms = 0;
        for (std::size_t i = 0; i < k; ++i) {
            cfg.roster.add(name(i), name(i), rng);
        }
        return cfg;
    }
    static std::string name(std::size_t i) { return "m" + std::to_string(i); }

    LocalGroup(const Globals& g, std::size_t k, const std::string& capture_path)
        : server([&] {
              auto rng = g.rng(1);
              return config(g, k, *rng);
          }(),
                 g.rng()) {
        if (!capture_path.empty()) {
            capture.emplace(capture_path);
        }
        for (std::size_t i = 0; i < k; ++i) {
            members.push_back(std::make_unique<netsim::ClientNode>(name(i), name(i), server.group().field()));
            conns.push_back(bus.attach(*members.back()));
            bus.send(conns.back(), members.back()->join_request());
            sync();
            if (const auto err = members.back()->last_error()) {
                throw Error(*err, "member " + name(i) + " could not join");
            }
        }
    }

    /// Records broadcasts made since the last call.
    void sync() {
        const auto now = server.status().broadcasts;
        if (now != broadcasts && capture) {
            capture->append(server.last_broadcast());
        }
        broadcasts = now;
    }

    /// Prints the agreement check; returns false if any member disagrees
    /// with its expected outcome.
    bool report(std::ostream& os, const std::vector<bool>& departed) const {
        const Fe s = server.group().current_secret();
        std::size_t agree = 0, active = 0, leaked = 0;
        for (std::size_t i = 0; i < members.size(); ++i) {
            const auto got = members[i]->last_secret();
            const bool matches = got && *got == s;
            if (departed[i]) {
                leaked += matches ? 1 : 0;
            } else {
                ++active;
                agree += matches ? 1 : 0;
            }
        }
        os << "epoch " << server.group().epoch() << ": " << active << " receivers, " << agree
           << " recovered the secret";
        const std::size_t gone = members.size() - active;
        if (gone > 0) {
            os << "; " << gone << " departed, " << leaked << " of them recovered it";
        }
        os << '\n';
        return agree == active && leaked == 0;
    }
};

int cmd_worked_example() {
    const auto trace = demo::run_worked_example();
    for (const auto& line : trace.lines) {
        std::cout << line << '\n';
    }
    return trace.ok ? 0 : 1;
}

int cmd_rekey(const Globals& g, std::size_t members, const std::string& capture) {
    LocalGroup group(g, members, capture);
    const auto before = group.broadcasts;
    group.bus.rekey();
    group.sync();
    const auto& bytes = group.server.last_broadcast();
    std::cout << "REKEY broadcast emitted (" << group.broadcasts - before << " frame, " << bytes.size()
              << " bytes, " << hex_prefix(bytes) << ")\n";
    return group.report(std::cout, std::vector<bool>(members, false)) ? 0 : 1;
}

int cmd_leave(const Globals& g, std::size_t members, std::size_t count, const std::string& capture) {
    if (count > members) {
        throw Error(ErrorCode::BadConfig, "cannot remove more members than joined");
    }
    LocalGroup group(g, members, capture);
    std::vector<bool> departed(members, false);
    for (std::size_t i = 0; i < count; ++i) {
        group.bus.send(group.conns[i], group.members[i]->leave_request());
        departed[i] = true;
    }
    const auto before = group.broadcasts;
    group.bus.flush();
    group.sync();
    std::cout << count << " departures folded into " << group.broadcasts - before << " broadcast(s)\n";
    return group.report(std::cout, departed) ? 0 : 1;
}

int cmd_rotate(const Globals& g, std::size_t members, const std::string& capture) {
    LocalGroup group(g, members, capture);
    std::vector<std::size_t> keys_before;
    for (const auto& m : group.members) {
        keys_before.push_back(m->keys_received());
    }
    group.bus.rotate();
    group.sync();
    std::size_t reissued = 0;
    for (std::size_t i = 0; i < members; ++i) {
        reissued += group.members[i]->keys_received() > keys_before[i] ? 1 : 0;
    }
    std::cout << "all scalars rotated; " << reissued << " keys re-issued\n";
    return group.report(std::cout, std::vector<bool>(members, false)) ? 0 : 1;
}

// --- live TCP ------------------------------------------------------------------

int cmd_serve(const Globals& g, const std::string& config_path, const std::string& listen,
              std::optional<unsigned> window_ms, bool auth, const std::vector<std::string>& logins,
              std::optional<unsigned> run_for_ms) {
    netsim::ServerConfig cfg;
    if (!config_path.empty()) {
        cfg = netsim::load_config(config_path);
    } else {
        cfg.prime = g.prime;
        cfg.mode = g.field_mode();
        cfg.capacity = g.capacity;
        cfg.dim = g.dim;
    }
    if (!listen.empty()) {
        netsim::split_endpoint(listen);
        cfg.listen = listen;
    }
    if (window_ms) {
        cfg.batch_window_ms = *window_ms;
    }
    cfg.auth_enabled = cfg.auth_enabled || auth;
    auto salt_rng = g.rng(1);
    for (const auto& login : logins) {
        const auto colon = login.find(':');
        if (colon == std::string::npos || colon == 0) {
            throw Error(ErrorCode::BadConfig, "--member expects id:password");
        }
        cfg.roster.add(login.substr(0, colon), login.substr(colon + 1), *salt_rng);
    }
    netsim::TcpServer server(cfg, g.rng());
    std::cout << "listening on " << server.host() << ':' << server.port() << " (capacity " << cfg.capacity
              << ", dim " << cfg.dim << ", p = " << cfg.prime << ", " << cfg.roster.size() << " roster entries)"
              << std::endl;

    auto print_status = [&] {
        const auto st = server.status();
        std::cout << "epoch " << st.epoch << ", members " << st.bound << ", free " << st.free << ", connections "
                  << st.connections << ", broadcasts " << st.broadcasts << std::endl;
    };
    if (run_for_ms) {
        std::this_thread::sleep_for(std::chrono::milliseconds(*run_for_ms));
    } else {
        std::string line;
        while (std::getline(std::cin, line)) {
            if (line == "rekey") {
                server.rekey();
            } else if (line == "rotate") {
                server.rotate();
            } else if (line == "flush") {
                server.flush();
            } else if (line == "quit") {
                break;
            } else if (line != "status" && !line.empty()) {
                std::cout << "commands: rekey, rotate, flush, status, quit" << std::endl;
                continue;
            }
            if (!line.empty()) {
                print_status();
            }
        }
    }
    print_status();
    server.stop();
    return 0;
}

int cmd_client(const Globals& g, const std::string& endpoint, const std::string& id, const std::string& password,
               unsigned listen_ms, bool leave) {
    const auto [host, port] = netsim::split_endpoint(endpoint);
    netsim::TcpClient sock(host, port);
    netsim::ClientNode node(id, password, g.field());
    sock.send(node.join_request());

    using Clock = std::chrono::steady_clock;
    auto pump_until = [&](Clock::time_point deadline, auto done) {
        while (!done() && Clock::now() < deadline) {
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
            const auto frame = sock.receive(std::max(std::chrono::milliseconds(1), left));
            if (!frame) {
                continue;
            }
            const auto epoch_before = node.epoch_seen();
            const auto keys_before = node.keys_received();
            node.receive(*frame);
            if (node.last_error()) {
                throw Error(*node.last_error(), "server refused the request");
            }
            if (node.keys_received() > keys_before) {
                std::cout << "key issued: slot " << node.key()->slot << ", valid from epoch "
                          << node.key()->epoch_issued << std::endl;
            }
            if (node.epoch_seen() != epoch_before && node.last_secret()) {
                std::cout << "epoch " << node.epoch_seen() << ": secret " << node.last_secret()->value()
                          << std::endl;
            }
        }
        return done();
    };

    if (!pump_until(Clock::now() + std::chrono::seconds(5), [&] { return node.last_secret().has_value(); })) {
        throw Error(ErrorCode::ConnectionClosed, "no key from server");
    }
    pump_until(Clock::now() + std::chrono::milliseconds(listen_ms), [] { return false; });
    if (leave) {
        sock.send(node.leave_request());
        if (pump_until(Clock::now() + std::chrono::seconds(5), [&] { return node.departed(); })) {
            std::cout << "left the group" << std::endl;
        }
    }
    return 0;
}

// --- attacks --------------------------------------------------------------------

int cmd_attack(const Globals& g, const std::string& name, bool canonical, unsigned trials, std::size_t users,
               bool prime_set) {
    auto rng = g.rng();
    if (name == "old-member") {
        const PrimeField f = g.field();
        unsigned wins = 0;
        for (unsigned t = 0; t < trials; ++t) {
            auto group = GroupState::init(f, g.capacity, g.dim, *rng);
            const auto key = group.join("victim", f.rand_nonzero(*rng)).key;
            group.join("witness", f.rand_nonzero(*rng));
            const auto msg = group.leave("victim", f.rand_nonzero(*rng), *rng);
            wins += attack_old_member(key, msg, SealedSecret::of(group)).succeeded ? 1 : 0;
        }
        std::cout << "old-member: " << wins << "/" << trials << " decodes hit the new secret: "
                  << (wins == 0 ? "FAILED (protocol holds)" : "SUCCEEDED") << '\n';
        return 0;
    }
    if (name == "difference") {
        const PrimeField f(prime_set ? g.prime : 101, FieldMode::Test);
        auto group = GroupState::init(f, 2, 5, *rng);
        const auto key = group.join("victim", f.rand_nonzero(*rng)).key;
        group.join("witness", f.rand_nonzero(*rng));
        const auto before = group.rekey(*rng);
        const auto after = group.leave("victim", f.rand_nonzero(*rng), *rng);
        const auto v = attack_difference(key, before, after, SealedSecret::of(group));
        std::cout << "difference: " << v.explainable << "/" << v.candidates
                  << " candidate secrets consistent with the observation";
        if (!v.unexplained.empty()) {
            std::cout << " (excluded: " << v.unexplained.front().value() << ", the stale-key decode)";
        }
        std::cout << ": " << (v.explainable + 1 >= v.candidates ? "FAILED (protocol holds)" : "SUCCEEDED") << '\n';
        return 0;
    }
    if (name == "basis-recovery") {
        const PrimeField f(prime_set ? g.prime : 10007, FieldMode::Test);
        auto group = canonical ? GroupState::with_system(OrthogonalSystem::canonical(f, users, users), *rng)
                               : GroupState::init(f, users, users, *rng);
        const auto transcript = observe_churn(group, *rng);
        const auto v = attack_basis_recovery(transcript, std::nullopt, SealedScalars::of(group));
        std::cout << "basis-recovery (" << (canonical ? "canonical" : "hidden") << " basis, n = m = " << users
                  << ", p = " << f.modulus() << "): transcript rank " << v.rank << ": "
                  << (v.succeeded ? (canonical ? "SUCCEEDED (misconfiguration broken)" : "SUCCEEDED") : "FAILED")
                  << '\n';
        return 0;
    }
    if (name == "brute-force") {
        const auto b = brute_force_bound_check(g.field(), g.capacity);
        std::cout << "brute-force: log2 work " << b.log2_work << " for n = " << g.capacity << ": "
                  << (b.infeasible ? "infeasible" : "FEASIBLE") << '\n';
        return 0;
    }
    throw Error(ErrorCode::BadConfig, "unknown attack '" + name + "'");
}

int cmd_bench(const Globals& g, bench::Options opts, const std::string& backend, const std::string& out_path) {
    opts.backend = backend == "serial" ? kernels::Backend::Serial : kernels::Backend::Parallel;
    if (const auto s = g.effective_seed()) {
        opts.seed = *s;
    }
    const auto csv = bench::to_csv(bench::run(opts));
    if (out_path.empty()) {
        std::cout << csv;
    } else {
        std::ofstream(out_path) << csv;
    }
    return 0;
}

int cmd_estimate(std::uint64_t users, std::uint64_t bits, const std::string& scheme) {
    wire::CostModel model;
    model.n = users;
    model.unit_bits = bits;
    model.scheme = scheme == "euclides"      ? wire::Scheme::Euclides
                   : scheme == "secure_lock" ? wire::Scheme::SecureLock
                                             : wire::Scheme::Orthogonal;
    const auto payload = wire::rekey_length_bytes(model);
    std::cout << scheme << ": n = " << users << ", " << bits << "-bit units: " << payload << " payload bytes";
    if (model.scheme == wire::Scheme::Orthogonal) {
        std::cout << ", " << payload + wire::kHeaderBytes << " framed";
    }
    std::cout << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Orthogonal-system multicast key management"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    auto* prime_opt = app.add_option("--prime", g.prime, "Field modulus")->capture_default_str();
    app.add_option("--dim", g.dim, "Vector dimension m")->capture_default_str();
    app.add_option("--capacity", g.capacity, "Group capacity n")->capture_default_str();
    app.add_option("--seed", g.seed, "Deterministic seed (overrides OKMP_SEED)");
    app.add_option("--mode", g.mode, "protocol, or demo for toy fields")
        ->check(CLI::IsMember({"protocol", "demo"}))
        ->capture_default_str();

    std::function<int()> action;

    app.add_subcommand("demo-paper", "Replay the three-member integer example")->callback([&] {
        action = cmd_worked_example;
    });

    std::string config_path, listen;
    std::optional<unsigned> window_ms, run_for_ms;
    bool auth = false;
    std::vector<std::string> logins;
    auto* serve = app.add_subcommand("serve", "Run a TCP group server; reads rekey/rotate/flush/status/quit on stdin");
    serve->add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
    serve->add_option("--listen", listen, "host:port (port 0 picks one)");
    serve->add_option("--window-ms", window_ms, "Batch window for departures");
    serve->add_flag("--auth", auth, "Provision aggregates for member authentication");
    serve->add_option("--member", logins, "Roster login id:password (repeatable)");
    serve->add_option("--run-for-ms", run_for_ms, "Serve for a fixed time instead of reading stdin");
    serve->callback([&] {
        action = [&] { return cmd_serve(g, config_path, listen, window_ms, auth, logins, run_for_ms); };
    });

    std::string endpoint, id, password;
    unsigned listen_ms = 0;
    bool join = false, leave_after = false;
    auto* client = app.add_subcommand("client", "Log in to a TCP server and follow its broadcasts");
    client->add_option("--connect", endpoint, "host:port")->required();
    client->add_option("--id", id, "Member id")->required();
    client->add_option("--password", password, "Login password")->required();
    client->add_flag("--join", join, "Send JOIN_REQ (the default action)");
    client->add_option("--listen-ms", listen_ms, "Keep following broadcasts this long after login");
    client->add_flag("--leave", leave_after, "Send LEAVE_NOTICE before exiting");
    client->callback([&] { action = [&] { return cmd_client(g, endpoint, id, password, listen_ms, leave_after); }; });

    std::size_t rekey_members = 0, leave_members = 4, rotate_members = 4, count = 1;
    std::string capture;
    auto* rekey = app.add_subcommand("rekey", "Rekey an in-process group of --members logged-in clients");
    rekey->add_option("--members", rekey_members, "Clients to log in first")->capture_default_str();
    rekey->add_option("--capture", capture, "Write broadcast frames to a capture file");
    rekey->callback([&] { action = [&] { return cmd_rekey(g, rekey_members, capture); }; });

    auto* leave = app.add_subcommand("leave", "Remove --count members from an in-process group in one window");
    leave->add_option("--members", leave_members, "Clients to log in first")->capture_default_str();
    leave->add_option("--count", count, "Members leaving")->capture_default_str();
    leave->add_option("--capture", capture, "Write broadcast frames to a capture file");
    leave->callback([&] { action = [&] { return cmd_leave(g, leave_members, count, capture); }; });

    auto* rotate = app.add_subcommand("rotate", "Rotate every scalar of an in-process group");
    rotate->add_option("--members", rotate_members, "Clients to log in first")->capture_default_str();
    rotate->add_option("--capture", capture, "Write broadcast frames to a capture file");
    rotate->callback([&] { action = [&] { return cmd_rotate(g, rotate_members, capture); }; });

    std::string attack_name;
    bool canonical = false, hidden = false;
    unsigned trials = 100;
    std::size_t users = 5;
    auto* attack = app.add_subcommand("attack", "Run an attack oracle and print its verdict");
    attack->add_option("name", attack_name, "old-member | difference | basis-recovery | brute-force")
        ->required()
        ->check(CLI::IsMember({"old-member", "difference", "basis-recovery", "brute-force"}));
    auto* canon_flag = attack->add_flag("--canonical", canonical, "Basis recovery against a canonical basis");
    attack->add_flag("--hidden", hidden, "Basis recovery against a secret basis (default)")->excludes(canon_flag);
    attack->add_option("--trials", trials, "Trials for old-member")->capture_default_str();
    attack->add_option("--users", users, "n = m for basis recovery")->capture_default_str();
    attack->callback([&] {
        action = [&] { return cmd_attack(g, attack_name, canonical, trials, users, prime_opt->count() > 0); };
    });

    bench::Options bench_opts;
    std::string backend = "parallel", out_path;
    auto* bench_cmd = app.add_subcommand("bench", "Time each server stage; CSV stage,m,n,median_ns");
    bench_cmd->add_option("--dims", bench_opts.dims, "Dimensions m")->delimiter(',')->capture_default_str();
    bench_cmd->add_option("--users", bench_opts.users, "Group sizes n")->delimiter(',')->capture_default_str();
    bench_cmd->add_option("--reps", bench_opts.reps, "Samples per stage")->capture_default_str();
    bench_cmd->add_option("--inner", bench_opts.inner, "Calls per sample for fast stages")->capture_default_str();
    bench_cmd->add_option("--backend", backend, "serial or parallel kernels")
        ->check(CLI::IsMember({"serial", "parallel"}))
        ->capture_default_str();
    bench_cmd->add_option("--out", out_path, "Write the CSV here instead of stdout");
    bench_cmd->callback([&] { action = [&] { return cmd_bench(g, bench_opts, backend, out_path); }; });

    std::uint64_t est_users = 10000, est_bits = 64;
    std::string scheme = "orthogonal";
    auto* estimate = app.add_subcommand("estimate", "Rekey message length for a scheme");
    estimate->add_option("--users", est_users, "Group size n")->capture_default_str();
    estimate->add_option("--bits", est_bits, "Bits per unit: C, or the prime/moduli size")->capture_default_str();
    estimate->add_option("--scheme", scheme, "orthogonal | euclides | secure_lock")
        ->check(CLI::IsMember({"orthogonal", "euclides", "secure_lock"}))
        ->capture_default_str();
    estimate->callback([&] { action = [&] { return cmd_estimate(est_users, est_bits, scheme); }; });

    std::string roster_id = "member";
    std::string roster_password;
    auto* roster = app.add_subcommand("roster-entry", "Print a salted roster line for a config file");
    roster->add_option("--id", roster_id, "Member id")->capture_default_str();
    roster->add_option("--password", roster_password, "Password")->required();
    roster->callback([&] {
        action = [&] {
            auto rng = g.rng();
            std::cout << "member." << roster_id << " = " << netsim::Roster::make_entry(roster_password, *rng) << '\n';
            return 0;
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    try {
        return action();
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
