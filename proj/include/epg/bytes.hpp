#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "epg/error.hpp"

namespace epg {

// Little-endian encoder for fixed-width fields.
class ByteWriter {
public:
    template <class T>
    void put(T v)
    {
        static_assert(std::is_arithmetic_v<T>);
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        if constexpr (std::endian::native == std::endian::big)
            for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
        buf_.insert(buf_.end(), b, b + sizeof(T));
    }
    void put_bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
    void put_zeros(std::size_t n) { buf_.insert(buf_.end(), n, 0); }
    std::vector<unsigned char>& buffer() { return buf_; }
    std::size_t size() const { return buf_.size(); }

private:
    std::vector<unsigned char> buf_;
};

// Bounds-checked little-endian decoder. Reads past the end throw the
// exception produced by `on_truncated`.
class ByteReader {
public:
    ByteReader(const unsigned char* data, std::size_t size) : data_(data), size_(size) {}

    bool can_read(std::size_t n) const { return pos_ + n <= size_; }
    std::size_t position() const { return pos_; }
    std::size_t remaining() const { return size_ - pos_; }

    template <class T>
    T get()
    {
        static_assert(std::is_arithmetic_v<T>);
        require(sizeof(T));
        unsigned char b[sizeof(T)];
        std::memcpy(b, data_ + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big)
            for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
        pos_ += sizeof(T);
        T v;
        std::memcpy(&v, b, sizeof(T));
        return v;
    }
    std::string get_string(std::size_t n)
    {
        require(n);
        std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
        pos_ += n;
        return s;
    }
    void skip(std::size_t n)
    {
        require(n);
        pos_ += n;
    }

private:
    void require(std::size_t n) const
    {
        if (!can_read(n)) throw CorruptionError("unexpected end of data at byte " + std::to_string(pos_));
    }

    const unsigned char* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

std::vector<unsigned char> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<unsigned char>& bytes);
void write_text(const std::string& path, std::string_view text);

}  // namespace epg
