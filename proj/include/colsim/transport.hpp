#pragma once

// Spike-batch wire format and the two interchangeable message backends.
//
// Frame layout (little-endian):
//   0  magic "DPSN"
//   4  u8  version (1)
//   5  u8  msg_type (1 = spike batch, 2 = terminate)
//   6  u16 source worker
//   8  u32 epoch
//   12 u32 payload length
//   16 payload; for spike batches: u32 count, then count x (u32 gid, u16 step offset)

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "colsim/partition.hpp"

namespace colsim
{

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint8_t wire_version = 1;
inline constexpr std::size_t frame_header_size = 16;

enum class MsgType : std::uint8_t
{
    spike_batch = 1,
    terminate = 2,
};

struct SpikeRecord
{
    std::uint32_t gid = 0;
    std::uint16_t step_offset = 0;

    friend bool operator==(const SpikeRecord &, const SpikeRecord &) = default;
};

struct SpikeBatch
{
    std::uint32_t epoch = 0;
    WorkerId source_worker = 0;
    std::vector<SpikeRecord> records; // sorted by (step_offset, gid)

    friend bool operator==(const SpikeBatch &, const SpikeBatch &) = default;
};

struct FrameHeader
{
    MsgType type = MsgType::spike_batch;
    WorkerId source_worker = 0;
    std::uint32_t epoch = 0;
    std::uint32_t payload_len = 0;
};

class EncodeError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

class TransportError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

Bytes encode(const SpikeBatch &batch);
Bytes encode_terminate(WorkerId source_worker, std::uint32_t epoch);

/// Validates magic, version and type; throws ParseError with the offset.
FrameHeader decode_header(std::span<const std::uint8_t> bytes);

/// Decodes a full spike-batch frame. Throws ParseError on bad magic, version,
/// type, length mismatch, or truncation.
SpikeBatch decode(std::span<const std::uint8_t> bytes);

/// One worker's view of the message fabric. Delivery is reliable and FIFO per
/// (sender, receiver); recv blocks until a frame from `peer` arrives or the
/// timeout elapses.
class Endpoint
{
  public:
    virtual ~Endpoint() = default;

    virtual WorkerId self() const = 0;
    virtual void send(WorkerId peer, Bytes frame) = 0;
    virtual Bytes recv(WorkerId peer) = 0;
};

enum class TransportKind : std::uint8_t
{
    inproc,
    tcp,
};

std::string_view to_string(TransportKind kind);
TransportKind parse_transport(std::string_view text);

using Timeout = std::chrono::milliseconds;

/// In-process queues, one bounded channel per ordered worker pair.
class InProcFabric
{
  public:
    InProcFabric(std::uint32_t workers, Timeout timeout, std::size_t channel_capacity = 64);
    ~InProcFabric();
    InProcFabric(const InProcFabric &) = delete;
    InProcFabric &operator=(const InProcFabric &) = delete;

    /// The fabric must outlive the returned endpoint.
    std::unique_ptr<Endpoint> endpoint(WorkerId self);

    /// Wakes every blocked send/recv with a TransportError.
    void abort();

  private:
    struct Channel;
    class Port;
    Channel &channel(WorkerId from, WorkerId to);
    void check_aborted() const;

    std::uint32_t workers_;
    Timeout timeout_;
    std::size_t capacity_;
    std::atomic<bool> aborted_{false};
    std::vector<std::unique_ptr<Channel>> channels_;
};

struct PeerAddress
{
    std::string host;
    std::uint16_t port = 0;
};

/// Parses "host:port,host:port,...".
std::vector<PeerAddress> parse_peers(std::string_view text);

/// Localhost addresses on consecutive ports starting at `base_port`.
std::vector<PeerAddress> localhost_peers(std::uint32_t workers, std::uint16_t base_port);

/// Picks a base port with `workers` consecutive free ports on 127.0.0.1.
std::uint16_t find_free_port_range(std::uint32_t workers);

/// Opens the TCP mesh for `self`: listens on its own address, connects to
/// higher-ranked neighbours and accepts the lower-ranked ones. Each new
/// connection starts with a u16 LE hello carrying the connector's id.
/// Outgoing frames are written by one writer thread per connection.
std::unique_ptr<Endpoint> connect_tcp(WorkerId self, const std::vector<PeerAddress> &peers,
                                      const std::vector<WorkerId> &neighbours, Timeout timeout);

} // namespace colsim
