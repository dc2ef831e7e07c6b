#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "semgeom/error.hpp"

namespace semgeom {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

// Little-endian writer for the LEMB / SSIM formats.
class BinaryWriter {
public:
    explicit BinaryWriter(const std::filesystem::path& path) : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
        if (!out_) throw Error(ErrorKind::data, "WRITE_FAILED", "cannot write " + path.string());
    }
    void magic(std::string_view m) { out_.write(m.data(), static_cast<std::streamsize>(m.size())); }
    void u8(std::uint8_t v) { raw(&v, 1); }
    void u32(std::uint32_t v) { raw(&v, 4); }
    void f32(float v) { raw(&v, 4); }
    void string(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
    void close() {
        out_.close();
        if (!out_) throw Error(ErrorKind::data, "WRITE_FAILED", "error writing " + path_.string());
    }

private:
    void raw(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    std::ofstream out_;
    std::filesystem::path path_;
};

// Reads a whole file into memory and decodes fields with bounds checks.
class BinaryReader {
public:
    explicit BinaryReader(const std::filesystem::path& path) : path_(path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error(ErrorKind::data, "NOT_FOUND", "cannot open " + path.string());
        bytes_.assign(std::istreambuf_iterator<char>(in), {});
    }
    void expect_magic(std::string_view m) {
        if (bytes_.size() < m.size() || std::string_view(bytes_.data(), m.size()) != m)
            throw Error(ErrorKind::data, "BAD_MAGIC", path_.string() + ": expected magic " + std::string(m));
        pos_ = m.size();
    }
    std::uint8_t u8() { return take<std::uint8_t>(); }
    std::uint32_t u32() { return take<std::uint32_t>(); }
    float f32() { return take<float>(); }
    std::string string() {
        const auto n = u32();
        need(n);
        std::string s(bytes_.data() + pos_, n);
        pos_ += n;
        return s;
    }
    std::uint64_t remaining() const noexcept { return bytes_.size() - pos_; }
    // Bulk read of n float32 values.
    void f32_block(float* dst, std::size_t n) {
        need(n * 4);
        std::memcpy(dst, bytes_.data() + pos_, n * 4);
        pos_ += n * 4;
    }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw Error(ErrorKind::data, "TRUNCATED", path_.string() + ": unexpected end of file");
    }
    template <typename T>
    T take() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::vector<char> bytes_;
    std::size_t pos_ = 0;
    std::filesystem::path path_;
};

}  // namespace semgeom
