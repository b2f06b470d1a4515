#include <algorithm>

#include "colsim/bytes.hpp"
#include "colsim/transport.hpp"

namespace colsim
{

namespace
{

constexpr std::uint8_t frame_magic[4] = {'D', 'P', 'S', 'N'};
constexpr std::size_t record_size = 6;

void write_header(ByteWriter &w, MsgType type, WorkerId source, std::uint32_t epoch, std::uint32_t payload_len)
{
    w.raw(frame_magic);
    w.u8(wire_version);
    w.u8(static_cast<std::uint8_t>(type));
    w.u16(source);
    w.u32(epoch);
    w.u32(payload_len);
}

} // namespace

Bytes encode(const SpikeBatch &batch)
{
    if (batch.records.size() > (0xFFFFFFFFull - 4) / record_size)
    {
        throw EncodeError("spike batch too large for a 32-bit payload length");
    }
    const auto count = static_cast<std::uint32_t>(batch.records.size());
    const std::uint32_t payload_len = 4 + count * static_cast<std::uint32_t>(record_size);
    Bytes out;
    out.reserve(frame_header_size + payload_len);
    ByteWriter w(out);
    write_header(w, MsgType::spike_batch, batch.source_worker, batch.epoch, payload_len);
    w.u32(count);
    for (const auto &r : batch.records)
    {
        w.u32(r.gid);
        w.u16(r.step_offset);
    }
    return out;
}

Bytes encode_terminate(WorkerId source_worker, std::uint32_t epoch)
{
    Bytes out;
    ByteWriter w(out);
    write_header(w, MsgType::terminate, source_worker, epoch, 0);
    return out;
}

FrameHeader decode_header(std::span<const std::uint8_t> bytes)
{
    ByteReader r(bytes);
    const auto magic = r.raw(4);
    if (!std::equal(magic.begin(), magic.end(), std::begin(frame_magic)))
    {
        throw ParseError("bad frame magic", 0);
    }
    if (const auto version = r.u8(); version != wire_version)
    {
        throw ParseError("unsupported frame version " + std::to_string(version), 4);
    }
    const auto type = r.u8();
    if (type != static_cast<std::uint8_t>(MsgType::spike_batch) && type != static_cast<std::uint8_t>(MsgType::terminate))
    {
        throw ParseError("unknown message type " + std::to_string(type), 5);
    }
    FrameHeader h;
    h.type = static_cast<MsgType>(type);
    h.source_worker = r.u16();
    h.epoch = r.u32();
    h.payload_len = r.u32();
    return h;
}

SpikeBatch decode(std::span<const std::uint8_t> bytes)
{
    const FrameHeader h = decode_header(bytes);
    if (h.type != MsgType::spike_batch)
    {
        throw ParseError("expected a spike batch frame", 5);
    }
    if (bytes.size() - frame_header_size != h.payload_len)
    {
        const std::size_t at = std::min(bytes.size(), frame_header_size + std::size_t{h.payload_len});
        throw ParseError("payload length " + std::to_string(h.payload_len) + " does not match frame size " +
                             std::to_string(bytes.size()),
                         at);
    }
    ByteReader r(bytes.subspan(frame_header_size));
    const std::uint32_t count = r.u32();
    if (std::uint64_t{count} * record_size + 4 != h.payload_len)
    {
        throw ParseError("record count " + std::to_string(count) + " disagrees with payload length",
                         frame_header_size);
    }
    SpikeBatch batch;
    batch.epoch = h.epoch;
    batch.source_worker = h.source_worker;
    batch.records.resize(count);
    for (auto &rec : batch.records)
    {
        rec.gid = r.u32();
        rec.step_offset = r.u16();
    }
    return batch;
}

} // namespace colsim
