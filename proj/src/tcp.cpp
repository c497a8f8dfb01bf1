#include "okmp/error.hpp"
#include "okmp/netsim.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <deque>
#include <future>
#include <mutex>
#include <thread>

namespace okmp::netsim {

namespace {

using Clock = std::chrono::steady_clock;

std::string errno_text(const char* what) {
    return std::string(what) + ": " + std::strerror(errno);
}

/// Owning file descriptor.
class Fd {
public:
    Fd() = default;
    explicit Fd(int fd) : fd_(fd) {}
    Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
    Fd& operator=(Fd&& o) noexcept {
        if (this != &o) {
            reset();
            fd_ = std::exchange(o.fd_, -1);
        }
        return *this;
    }
    ~Fd() { reset(); }
    int get() const noexcept { return fd_; }
    void reset() noexcept {
        if (fd_ >= 0) {
            ::close(fd_);
            fd_ = -1;
        }
    }

private:
    int fd_ = -1;
};

struct AddrInfoDeleter {
    void operator()(addrinfo* ai) const { freeaddrinfo(ai); }
};

std::unique_ptr<addrinfo, AddrInfoDeleter> resolve(const std::string& host, std::uint16_t port, bool passive,
                                                    ErrorCode failure) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = passive ? AI_PASSIVE : 0;
    addrinfo* res = nullptr;
    const std::string service = std::to_string(port);
    if (const int rc = getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
        throw Error(failure, "cannot resolve " + host + ": " + gai_strerror(rc));
    }
    return std::unique_ptr<addrinfo, AddrInfoDeleter>(res);
}

void send_all(int fd, std::span<const std::byte> bytes) {
    std::size_t off = 0;
    while (off < bytes.size()) {
        const ssize_t n = ::send(fd, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw Error(ErrorCode::ConnectionClosed, errno_text("send"));
        }
        off += static_cast<std::size_t>(n);
    }
}

void send_framed(int fd, std::span<const std::byte> frame) {
    send_all(fd, wire::to_capture(std::vector<wire::Bytes>{wire::Bytes(frame.begin(), frame.end())}));
}

/// Pops one complete length-prefixed frame off the front of buf.
std::optional<wire::Bytes> take_frame(wire::Bytes& buf) {
    if (buf.size() < 4) {
        return std::nullopt;
    }
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) {
        len |= static_cast<std::uint32_t>(std::to_integer<unsigned>(buf[static_cast<std::size_t>(i)])) << (8 * i);
    }
    if (len > wire::kMaxFrameBytes) {
        throw Error(ErrorCode::LengthMismatch, "frame length " + std::to_string(len));
    }
    if (buf.size() < 4 + std::size_t{len}) {
        return std::nullopt;
    }
    wire::Bytes frame(buf.begin() + 4, buf.begin() + 4 + len);
    buf.erase(buf.begin(), buf.begin() + 4 + len);
    return frame;
}

} // namespace

struct TcpServer::Impl {
    ServerCore core;
    Fd listener;
    Fd wake_read;
    Fd wake_write;
    std::map<ConnId, Fd> sockets;
    std::map<ConnId, wire::Bytes> inbox;
    ConnId next_conn = 1;
    std::optional<Clock::time_point> window_deadline;

    std::mutex mu;
    std::deque<std::function<void()>> commands;
    std::atomic<bool> stopping{false};
    std::thread worker;

    Impl(ServerConfig config, std::unique_ptr<RandomSource> rng) : core(std::move(config), std::move(rng)) {}

    void wake() {
        const char c = 0;
        [[maybe_unused]] const auto n = ::write(wake_write.get(), &c, 1);
    }

    template <class Fn>
    auto call(Fn fn) -> decltype(fn()) {
        using R = decltype(fn());
        auto task = std::make_shared<std::packaged_task<R()>>(std::move(fn));
        auto fut = task->get_future();
        {
            std::lock_guard lock(mu);
            if (stopping) {
                throw Error(ErrorCode::ConnectionClosed, "server stopped");
            }
            commands.emplace_back([task] { (*task)(); });
        }
        wake();
        return fut.get();
    }

    void close_conn(ConnId conn) {
        sockets.erase(conn);
        inbox.erase(conn);
        core.disconnect(conn);
    }

    void deliver(const std::vector<Outbound>& out) {
        std::vector<ConnId> to_close;
        for (const auto& o : out) {
            const auto it = sockets.find(o.to);
            if (it == sockets.end()) {
                continue;
            }
            try {
                send_framed(it->second.get(), o.frame);
            } catch (const Error&) {
                to_close.push_back(o.to);
                continue;
            }
            if (o.close) {
                to_close.push_back(o.to);
            }
        }
        for (ConnId c : to_close) {
            if (sockets.contains(c)) {
                close_conn(c);
            }
        }
        arm_window();
    }

    void arm_window() {
        const unsigned ms = core.config().batch_window_ms;
        if (ms == 0 || !core.has_pending()) {
            if (!core.has_pending()) {
                window_deadline.reset();
            }
            return;
        }
        if (!window_deadline) {
            window_deadline = Clock::now() + std::chrono::milliseconds(ms);
        }
    }

    void accept_one() {
        const int fd = ::accept(listener.get(), nullptr, nullptr);
        if (fd < 0) {
            return;
        }
        const int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        timeval tv{5, 0};
        ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
        const ConnId conn = next_conn++;
        sockets.emplace(conn, Fd(fd));
        deliver(core.connect(conn));
    }

    void read_from(ConnId conn) {
        std::array<std::byte, 65536> chunk{};
        const ssize_t n = ::recv(sockets.at(conn).get(), chunk.data(), chunk.size(), 0);
        if (n <= 0) {
            if (n < 0 && (errno == EINTR || errno == EAGAIN)) {
                return;
            }
            close_conn(conn);
            arm_window();
            return;
        }
        auto& buf = inbox[conn];
        buf.insert(buf.end(), chunk.begin(), chunk.begin() + n);
        try {
            while (auto frame = take_frame(buf)) {
                deliver(core.receive(conn, *frame));
                if (!sockets.contains(conn)) {
                    return;
                }
            }
        } catch (const Error& e) {
            deliver({Outbound{conn, wire::encode_frame(wire::error_frame(e.code(), e.what())), true}});
        }
    }

    void run() {
        while (!stopping) {
            std::vector<pollfd> fds;
            fds.push_back({listener.get(), POLLIN, 0});
            fds.push_back({wake_read.get(), POLLIN, 0});
            std::vector<ConnId> order;
            for (const auto& [conn, fd] : sockets) {
                fds.push_back({fd.get(), POLLIN, 0});
                order.push_back(conn);
            }
            int timeout = -1;
            if (window_deadline) {
                const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(*window_deadline - Clock::now());
                timeout = static_cast<int>(std::max<std::int64_t>(0, left.count()));
            }
            const int rc = ::poll(fds.data(), fds.size(), timeout);
            if (rc < 0 && errno != EINTR) {
                break;
            }
            if (window_deadline && Clock::now() >= *window_deadline) {
                window_deadline.reset();
                deliver(core.flush());
            }
            if (rc <= 0) {
                continue;
            }
            if (fds[1].revents & POLLIN) {
                std::array<char, 64> drain{};
                [[maybe_unused]] const auto n = ::read(wake_read.get(), drain.data(), drain.size());
                std::deque<std::function<void()>> batch;
                {
                    std::lock_guard lock(mu);
                    batch.swap(commands);
                }
                for (auto& cmd : batch) {
                    cmd();
                }
            }
            if (fds[0].revents & POLLIN) {
                accept_one();
            }
            for (std::size_t i = 0; i < order.size(); ++i) {
                if ((fds[i + 2].revents & (POLLIN | POLLHUP | POLLERR)) && sockets.contains(order[i])) {
                    read_from(order[i]);
                }
            }
        }
        std::deque<std::function<void()>> rest;
        {
            std::lock_guard lock(mu);
            rest.swap(commands);
        }
        for (auto& cmd : rest) {
            cmd(); // fulfils the futures of callers racing stop()
        }
        sockets.clear();
    }
};

TcpServer::TcpServer(ServerConfig config, std::unique_ptr<RandomSource> rng) {
    const auto [host, port] = split_endpoint(config.listen);
    impl_ = std::make_unique<Impl>(std::move(config), std::move(rng));

    const auto addrs = resolve(host, port, true, ErrorCode::BindFailure);
    std::string last_error = "no address";
    for (const addrinfo* ai = addrs.get(); ai != nullptr; ai = ai->ai_next) {
        Fd fd(::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol));
        if (fd.get() < 0) {
            last_error = errno_text("socket");
            continue;
        }
        const int one = 1;
        ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        if (::bind(fd.get(), ai->ai_addr, ai->ai_addrlen) != 0 || ::listen(fd.get(), 64) != 0) {
            last_error = errno_text("bind");
            continue;
        }
        impl_->listener = std::move(fd);
        break;
    }
    if (impl_->listener.get() < 0) {
        throw Error(ErrorCode::BindFailure, config.listen + ": " + last_error);
    }

    sockaddr_storage bound{};
    socklen_t len = sizeof bound;
    ::getsockname(impl_->listener.get(), reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = bound.ss_family == AF_INET6 ? ntohs(reinterpret_cast<sockaddr_in6*>(&bound)->sin6_port)
                                        : ntohs(reinterpret_cast<sockaddr_in*>(&bound)->sin_port);
    host_ = host;

    int pipefd[2];
    if (::pipe2(pipefd, O_CLOEXEC | O_NONBLOCK) != 0) {
        throw Error(ErrorCode::BindFailure, errno_text("pipe"));
    }
    impl_->wake_read = Fd(pipefd[0]);
    impl_->wake_write = Fd(pipefd[1]);
    impl_->worker = std::thread([impl = impl_.get()] { impl->run(); });
}

TcpServer::~TcpServer() { stop(); }

void TcpServer::stop() {
    if (!impl_ || !impl_->worker.joinable()) {
        return;
    }
    {
        std::lock_guard lock(impl_->mu);
        impl_->stopping = true;
    }
    impl_->wake();
    impl_->worker.join();
}

void TcpServer::flush() {
    impl_->call([this] { impl_->deliver(impl_->core.flush()); });
}

void TcpServer::rekey() {
    impl_->call([this] { impl_->deliver(impl_->core.rekey()); });
}

void TcpServer::rotate() {
    impl_->call([this] { impl_->deliver(impl_->core.rotate()); });
}

ServerStatus TcpServer::status() {
    return impl_->call([this] { return impl_->core.status(); });
}

bool TcpServer::secret_matches(Fe candidate) {
    return impl_->call([this, candidate] { return impl_->core.group().current_secret() == candidate; });
}

// --- client ---------------------------------------------------------------------

TcpClient::TcpClient(const std::string& host, std::uint16_t port) {
    const auto addrs = resolve(host, port, false, ErrorCode::ConnectionClosed);
    for (const addrinfo* ai = addrs.get(); ai != nullptr; ai = ai->ai_next) {
        const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
        if (fd < 0) {
            continue;
        }
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
            fd_ = fd;
            const int one = 1;
            ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
            return;
        }
        ::close(fd);
    }
    throw Error(ErrorCode::ConnectionClosed, "cannot connect to " + host + ":" + std::to_string(port));
}

TcpClient::~TcpClient() { close(); }

void TcpClient::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

void TcpClient::send(std::span<const std::byte> frame) {
    if (fd_ < 0) {
        throw Error(ErrorCode::ConnectionClosed, "client is closed");
    }
    send_framed(fd_, frame);
}

std::optional<wire::Bytes> TcpClient::receive(std::chrono::milliseconds timeout) {
    const auto deadline = Clock::now() + timeout;
    while (true) {
        if (auto frame = take_frame(buffer_)) {
            return frame;
        }
        if (fd_ < 0) {
            throw Error(ErrorCode::ConnectionClosed, "connection closed by server");
        }
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
        if (left.count() <= 0) {
            return std::nullopt;
        }
        pollfd p{fd_, POLLIN, 0};
        const int rc = ::poll(&p, 1, static_cast<int>(left.count()));
        if (rc < 0 && errno != EINTR) {
            throw Error(ErrorCode::ConnectionClosed, errno_text("poll"));
        }
        if (rc <= 0) {
            continue;
        }
        std::array<std::byte, 65536> chunk{};
        const ssize_t n = ::recv(fd_, chunk.data(), chunk.size(), 0);
        if (n < 0 && errno == EINTR) {
            continue;
        }
        if (n <= 0) {
            close();
            continue; // drain what is buffered, then report the close
        }
        buffer_.insert(buffer_.end(), chunk.begin(), chunk.begin() + n);
    }
}

} // namespace okmp::netsim
