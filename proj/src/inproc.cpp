#include <condition_variable>
#include <deque>
#include <mutex>

#include "colsim/transport.hpp"

namespace colsim
{

std::string_view to_string(TransportKind kind)
{
    return kind == TransportKind::tcp ? "tcp" : "inproc";
}

TransportKind parse_transport(std::string_view text)
{
    if (text == "inproc")
    {
        return TransportKind::inproc;
    }
    if (text == "tcp")
    {
        return TransportKind::tcp;
    }
    throw std::invalid_argument("unknown transport '" + std::string(text) + "' (expected inproc|tcp)");
}

struct InProcFabric::Channel
{
    std::mutex mutex;
    std::condition_variable readable;
    std::condition_variable writable;
    std::deque<Bytes> frames;
};

class InProcFabric::Port : public Endpoint
{
  public:
    Port(InProcFabric &fabric, WorkerId self)
        : fabric_(fabric)
        , self_(self)
    {
    }

    WorkerId self() const override { return self_; }

    void send(WorkerId peer, Bytes frame) override
    {
        Channel &ch = fabric_.channel(self_, peer);
        std::unique_lock lock(ch.mutex);
        if (!ch.writable.wait_for(lock, fabric_.timeout_, [&] { return ch.frames.size() < fabric_.capacity_ || fabric_.aborted_; }))
        {
            throw TransportError("send from worker " + std::to_string(self_) + " to " + std::to_string(peer) +
                                 " timed out on a full channel");
        }
        fabric_.check_aborted();
        ch.frames.push_back(std::move(frame));
        ch.readable.notify_one();
    }

    Bytes recv(WorkerId peer) override
    {
        Channel &ch = fabric_.channel(peer, self_);
        std::unique_lock lock(ch.mutex);
        if (!ch.readable.wait_for(lock, fabric_.timeout_, [&] { return !ch.frames.empty() || fabric_.aborted_; }))
        {
            throw TransportError("worker " + std::to_string(self_) + " timed out waiting for worker " +
                                 std::to_string(peer));
        }
        fabric_.check_aborted();
        Bytes frame = std::move(ch.frames.front());
        ch.frames.pop_front();
        ch.writable.notify_one();
        return frame;
    }

  private:
    InProcFabric &fabric_;
    WorkerId self_;
};

InProcFabric::InProcFabric(std::uint32_t workers, Timeout timeout, std::size_t channel_capacity)
    : workers_(workers)
    , timeout_(timeout)
    , capacity_(channel_capacity)
{
    channels_.resize(std::size_t{workers} * workers);
    for (auto &ch : channels_)
    {
        ch = std::make_unique<Channel>();
    }
}

InProcFabric::~InProcFabric() = default;

InProcFabric::Channel &InProcFabric::channel(WorkerId from, WorkerId to)
{
    if (from >= workers_ || to >= workers_)
    {
        throw TransportError("worker id out of range for this fabric");
    }
    return *channels_[std::size_t{from} * workers_ + to];
}

void InProcFabric::abort()
{
    aborted_ = true;
    for (auto &ch : channels_)
    {
        std::lock_guard lock(ch->mutex);
        ch->readable.notify_all();
        ch->writable.notify_all();
    }
}

void InProcFabric::check_aborted() const
{
    if (aborted_)
    {
        throw TransportError("transport aborted by a failing worker");
    }
}

std::unique_ptr<Endpoint> InProcFabric::endpoint(WorkerId self)
{
    if (self >= workers_)
    {
        throw TransportError("worker id out of range for this fabric");
    }
    return std::make_unique<Port>(*this, self);
}

} // namespace colsim
