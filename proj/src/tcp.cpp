#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <map>
#include <mutex>
#include <thread>

#include "colsim/bytes.hpp"
#include "colsim/transport.hpp"

namespace colsim
{

std::vector<PeerAddress> parse_peers(std::string_view text)
{
    std::vector<PeerAddress> out;
    while (!text.empty())
    {
        const auto comma = text.find(',');
        const std::string_view item = text.substr(0, comma);
        text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
        const auto colon = item.rfind(':');
        if (colon == std::string_view::npos || colon == 0)
        {
            throw std::invalid_argument("peer '" + std::string(item) + "' is not host:port");
        }
        unsigned port = 0;
        const auto digits = item.substr(colon + 1);
        const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
        if (ec != std::errc{} || ptr != digits.data() + digits.size() || port == 0 || port > 0xFFFF)
        {
            throw std::invalid_argument("peer '" + std::string(item) + "' has an invalid port");
        }
        out.push_back({std::string(item.substr(0, colon)), static_cast<std::uint16_t>(port)});
    }
    return out;
}

std::vector<PeerAddress> localhost_peers(std::uint32_t workers, std::uint16_t base_port)
{
    std::vector<PeerAddress> out;
    for (std::uint32_t w = 0; w < workers; ++w)
    {
        out.push_back({"127.0.0.1", static_cast<std::uint16_t>(base_port + w)});
    }
    return out;
}

namespace
{

using Clock = std::chrono::steady_clock;

std::string errno_text(const char *what)
{
    return std::string(what) + ": " + std::strerror(errno);
}

class Fd
{
  public:
    Fd() = default;
    explicit Fd(int fd)
        : fd_(fd)
    {
    }
    Fd(Fd &&other) noexcept
        : fd_(std::exchange(other.fd_, -1))
    {
    }
    Fd &operator=(Fd &&other) noexcept
    {
        if (this != &other)
        {
            reset();
            fd_ = std::exchange(other.fd_, -1);
        }
        return *this;
    }
    ~Fd() { reset(); }

    int get() const { return fd_; }
    explicit operator bool() const { return fd_ >= 0; }
    void reset()
    {
        if (fd_ >= 0)
        {
            ::close(fd_);
            fd_ = -1;
        }
    }

  private:
    int fd_ = -1;
};

sockaddr_in resolve(const PeerAddress &addr)
{
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo *res = nullptr;
    if (const int rc = ::getaddrinfo(addr.host.c_str(), nullptr, &hints, &res); rc != 0 || res == nullptr)
    {
        throw TransportError("cannot resolve '" + addr.host + "': " + ::gai_strerror(rc));
    }
    sockaddr_in sa{};
    std::memcpy(&sa, res->ai_addr, sizeof(sa));
    ::freeaddrinfo(res);
    sa.sin_port = htons(addr.port);
    return sa;
}

int remaining_ms(Clock::time_point deadline)
{
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    return static_cast<int>(std::clamp<long long>(left, 0, 1 << 30));
}

void wait_fd(int fd, short events, Clock::time_point deadline, const std::string &what)
{
    for (;;)
    {
        pollfd p{fd, events, 0};
        const int rc = ::poll(&p, 1, remaining_ms(deadline));
        if (rc > 0)
        {
            return;
        }
        if (rc == 0)
        {
            throw TransportError("timed out " + what);
        }
        if (errno != EINTR)
        {
            throw TransportError(errno_text("poll"));
        }
    }
}

void write_all(int fd, std::span<const std::uint8_t> data)
{
    while (!data.empty())
    {
        const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
        if (n < 0)
        {
            if (errno == EINTR)
            {
                continue;
            }
            throw TransportError(errno_text("send"));
        }
        data = data.subspan(static_cast<std::size_t>(n));
    }
}

void read_exact(int fd, std::span<std::uint8_t> out, Clock::time_point deadline, const std::string &what)
{
    while (!out.empty())
    {
        wait_fd(fd, POLLIN, deadline, what);
        const ssize_t n = ::recv(fd, out.data(), out.size(), 0);
        if (n == 0)
        {
            throw TransportError("connection closed while " + what);
        }
        if (n < 0)
        {
            if (errno == EINTR || errno == EAGAIN)
            {
                continue;
            }
            throw TransportError(errno_text("recv"));
        }
        out = out.subspan(static_cast<std::size_t>(n));
    }
}

void set_nodelay(int fd)
{
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

Fd listen_on(const PeerAddress &addr)
{
    Fd fd(::socket(AF_INET, SOCK_STREAM, 0));
    if (!fd)
    {
        throw TransportError(errno_text("socket"));
    }
    int one = 1;
    ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in sa = resolve(addr);
    if (::bind(fd.get(), reinterpret_cast<sockaddr *>(&sa), sizeof(sa)) != 0)
    {
        throw TransportError(errno_text(("bind " + addr.host + ":" + std::to_string(addr.port)).c_str()));
    }
    if (::listen(fd.get(), 64) != 0)
    {
        throw TransportError(errno_text("listen"));
    }
    return fd;
}

Fd connect_with_retry(const PeerAddress &addr, Clock::time_point deadline)
{
    const sockaddr_in sa = resolve(addr);
    auto backoff = std::chrono::milliseconds(2);
    for (;;)
    {
        Fd fd(::socket(AF_INET, SOCK_STREAM, 0));
        if (!fd)
        {
            throw TransportError(errno_text("socket"));
        }
        if (::connect(fd.get(), reinterpret_cast<const sockaddr *>(&sa), sizeof(sa)) == 0)
        {
            return fd;
        }
        if (Clock::now() + backoff > deadline)
        {
            throw TransportError("timed out connecting to " + addr.host + ":" + std::to_string(addr.port));
        }
        std::this_thread::sleep_for(backoff);
        backoff = std::min(backoff * 2, std::chrono::milliseconds(100));
    }
}

class TcpEndpoint : public Endpoint
{
  public:
    TcpEndpoint(WorkerId self, Timeout timeout)
        : self_(self)
        , timeout_(timeout)
    {
    }

    ~TcpEndpoint() override
    {
        for (auto &[peer, conn] : conns_)
        {
            {
                std::lock_guard lock(conn->mutex);
                conn->closing = true;
            }
            conn->changed.notify_all();
        }
        for (auto &[peer, conn] : conns_)
        {
            if (conn->writer.joinable())
            {
                conn->writer.join();
            }
        }
    }

    WorkerId self() const override { return self_; }

    void add(WorkerId peer, Fd fd)
    {
        set_nodelay(fd.get());
        auto conn = std::make_unique<Conn>();
        conn->fd = std::move(fd);
        Conn *c = conn.get();
        conn->writer = std::thread([c] { writer_loop(*c); });
        conns_.emplace(peer, std::move(conn));
    }

    void send(WorkerId peer, Bytes frame) override
    {
        Conn &c = conn(peer);
        std::unique_lock lock(c.mutex);
        if (!c.changed.wait_for(lock, timeout_, [&] { return c.queue.size() < queue_capacity || !c.error.empty(); }))
        {
            throw TransportError("send to worker " + std::to_string(peer) + " timed out");
        }
        if (!c.error.empty())
        {
            throw TransportError("connection to worker " + std::to_string(peer) + " failed: " + c.error);
        }
        c.queue.push_back(std::move(frame));
        c.changed.notify_all();
    }

    Bytes recv(WorkerId peer) override
    {
        Conn &c = conn(peer);
        const auto deadline = Clock::now() + timeout_;
        const std::string what = "waiting for worker " + std::to_string(peer);
        Bytes frame(frame_header_size);
        read_exact(c.fd.get(), frame, deadline, what);
        const FrameHeader h = decode_header(frame);
        frame.resize(frame_header_size + h.payload_len);
        read_exact(c.fd.get(), std::span(frame).subspan(frame_header_size), deadline, what);
        return frame;
    }

  private:
    static constexpr std::size_t queue_capacity = 64;

    struct Conn
    {
        Fd fd;
        std::mutex mutex;
        std::condition_variable changed;
        std::deque<Bytes> queue;
        bool closing = false;
        std::string error;
        std::thread writer;
    };

    static void writer_loop(Conn &c)
    {
        for (;;)
        {
            Bytes frame;
            {
                std::unique_lock lock(c.mutex);
                c.changed.wait(lock, [&] { return !c.queue.empty() || c.closing; });
                if (c.queue.empty())
                {
                    return;
                }
                frame = std::move(c.queue.front());
                c.queue.pop_front();
            }
            c.changed.notify_all();
            try
            {
                write_all(c.fd.get(), frame);
            }
            catch (const std::exception &e)
            {
                std::lock_guard lock(c.mutex);
                c.error = e.what();
                c.queue.clear();
                c.changed.notify_all();
                return;
            }
        }
    }

    Conn &conn(WorkerId peer)
    {
        auto it = conns_.find(peer);
        if (it == conns_.end())
        {
            throw TransportError("worker " + std::to_string(self_) + " has no route to worker " + std::to_string(peer));
        }
        return *it->second;
    }

    WorkerId self_;
    Timeout timeout_;
    std::map<WorkerId, std::unique_ptr<Conn>> conns_;
};

} // namespace

std::uint16_t find_free_port_range(std::uint32_t workers)
{
    // Probe by binding; a port found free here may still be taken later, in
    // which case the bind in connect_tcp reports it.
    for (std::uint32_t base = 20000 + static_cast<std::uint32_t>(::getpid() % 20000); base + workers < 65000;
         base += workers + 7)
    {
        bool ok = true;
        std::vector<Fd> held;
        for (std::uint32_t w = 0; w < workers && ok; ++w)
        {
            try
            {
                held.push_back(listen_on({"127.0.0.1", static_cast<std::uint16_t>(base + w)}));
            }
            catch (const TransportError &)
            {
                ok = false;
            }
        }
        if (ok)
        {
            return static_cast<std::uint16_t>(base);
        }
    }
    throw TransportError("no free localhost port range found");
}

std::unique_ptr<Endpoint> connect_tcp(WorkerId self, const std::vector<PeerAddress> &peers,
                                      const std::vector<WorkerId> &neighbours, Timeout timeout)
{
    if (self >= peers.size())
    {
        throw TransportError("no address configured for worker " + std::to_string(self));
    }
    for (WorkerId n : neighbours)
    {
        if (n >= peers.size())
        {
            throw TransportError("no address configured for worker " + std::to_string(n));
        }
    }
    const auto deadline = Clock::now() + timeout;
    Fd listener = listen_on(peers[self]);
    auto ep = std::make_unique<TcpEndpoint>(self, timeout);

    std::size_t expected_accepts = 0;
    for (WorkerId n : neighbours)
    {
        if (n > self)
        {
            Fd fd = connect_with_retry(peers[n], deadline);
            Bytes hello;
            ByteWriter(hello).u16(self);
            write_all(fd.get(), hello);
            ep->add(n, std::move(fd));
        }
        else if (n < self)
        {
            ++expected_accepts;
        }
    }
    for (std::size_t i = 0; i < expected_accepts; ++i)
    {
        wait_fd(listener.get(), POLLIN, deadline, "accepting peer connections");
        Fd fd(::accept(listener.get(), nullptr, nullptr));
        if (!fd)
        {
            throw TransportError(errno_text("accept"));
        }
        std::uint8_t hello[2];
        read_exact(fd.get(), hello, deadline, "reading peer hello");
        const auto peer = static_cast<WorkerId>(ByteReader(hello).u16());
        if (peer >= self || std::find(neighbours.begin(), neighbours.end(), peer) == neighbours.end())
        {
            throw TransportError("unexpected hello from worker " + std::to_string(peer));
        }
        ep->add(peer, std::move(fd));
    }
    return ep;
}

} // namespace colsim
