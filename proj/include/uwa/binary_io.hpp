#pragma once

// Little-endian readers/writers for the UWAD / UWAT / UWAF file formats.

#include "uwa/error.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace uwa::io {

class ByteWriter {
public:
    void magic(std::string_view tag) { bytes_.insert(bytes_.end(), tag.begin(), tag.end()); }

    void u32(std::uint32_t v) { put(v); }
    void u64(std::uint64_t v) { put(v); }
    void f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }

    const std::vector<char>& bytes() const noexcept { return bytes_; }

private:
    template <typename U>
    void put(U v) {
        for (std::size_t i = 0; i < sizeof(U); ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }

    std::vector<char> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

    void expect_magic(std::string_view tag) {
        need(tag.size(), "magic");
        if (std::memcmp(bytes_.data() + pos_, tag.data(), tag.size()) != 0) {
            throw FormatError("bad magic, expected \"" + std::string(tag) + "\"", pos_);
        }
        pos_ += tag.size();
    }

    std::uint32_t u32(const char* field) { return get<std::uint32_t>(field); }
    std::uint64_t u64(const char* field) { return get<std::uint64_t>(field); }
    double f64(const char* field) { return std::bit_cast<double>(get<std::uint64_t>(field)); }

    std::uint64_t offset() const noexcept { return pos_; }
    std::uint64_t remaining() const noexcept { return bytes_.size() - pos_; }

    void expect_end() const {
        if (pos_ != bytes_.size()) throw FormatError("trailing bytes after payload", pos_);
    }

private:
    void need(std::size_t n, const char* field) const {
        if (bytes_.size() - pos_ < n) throw FormatError(std::string("truncated file reading ") + field, pos_);
    }

    template <typename U>
    U get(const char* field) {
        need(sizeof(U), field);
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i)
            v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += sizeof(U);
        return v;
    }

    std::vector<char> bytes_;
    std::size_t pos_ = 0;
};

std::vector<char> read_file(const std::filesystem::path& path);

// Writes to a sibling temp file, then renames over the target.
void write_file_atomic(const std::filesystem::path& path, const std::vector<char>& bytes);

}  // namespace uwa::io
