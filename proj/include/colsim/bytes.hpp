#pragma once

// Little-endian encode/decode helpers shared by the wire and file formats.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace colsim
{

class ParseError : public std::runtime_error
{
  public:
    ParseError(const std::string &what, std::size_t offset)
        : std::runtime_error(what + " at byte offset " + std::to_string(offset))
        , offset_(offset)
    {
    }
    std::size_t offset() const noexcept { return offset_; }

  private:
    std::size_t offset_;
};

class ByteWriter
{
  public:
    explicit ByteWriter(std::vector<std::uint8_t> &out)
        : out_(out)
    {
    }

    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) { put(v, 2); }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void raw(std::span<const std::uint8_t> bytes) { out_.insert(out_.end(), bytes.begin(), bytes.end()); }

  private:
    void put(std::uint64_t v, int n)
    {
        for (int i = 0; i < n; ++i)
        {
            out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }

    std::vector<std::uint8_t> &out_;
};

class ByteReader
{
  public:
    explicit ByteReader(std::span<const std::uint8_t> in)
        : in_(in)
    {
    }

    std::uint8_t u8() { return static_cast<std::uint8_t>(get(1, "u8")); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(get(2, "u16")); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4, "u32")); }
    std::uint64_t u64() { return get(8, "u64"); }
    float f32() { return std::bit_cast<float>(u32()); }
    std::span<const std::uint8_t> raw(std::size_t n)
    {
        require(n, "raw bytes");
        auto s = in_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t position() const { return pos_; }
    std::size_t remaining() const { return in_.size() - pos_; }

  private:
    void require(std::size_t n, const char *what) const
    {
        if (in_.size() - pos_ < n)
        {
            throw ParseError(std::string("truncated input reading ") + what, pos_);
        }
    }

    std::uint64_t get(int n, const char *what)
    {
        require(static_cast<std::size_t>(n), what);
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i)
        {
            v |= std::uint64_t{in_[pos_ + i]} << (8 * i);
        }
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

} // namespace colsim
