#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

namespace ctl {

// All binary artifacts are written little-endian regardless of host order.

inline void append_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void append_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void append_f32(std::string& out, float v) { append_u32(out, std::bit_cast<uint32_t>(v)); }

inline void append_f64(std::string& out, double v) { append_u64(out, std::bit_cast<uint64_t>(v)); }

class ByteReader {
  public:
    explicit ByteReader(const std::string& bytes) : bytes_(bytes) {}

    uint32_t read_u32() {
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(next()) << (8 * i);
        return v;
    }

    uint64_t read_u64() {
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(next()) << (8 * i);
        return v;
    }

    float read_f32() { return std::bit_cast<float>(read_u32()); }
    double read_f64() { return std::bit_cast<double>(read_u64()); }

    std::string read_bytes(size_t n) {
        require(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    size_t remaining() const { return bytes_.size() - pos_; }

  private:
    uint8_t next() {
        require(1);
        return static_cast<uint8_t>(bytes_[pos_++]);
    }
    void require(size_t n) const {
        if (pos_ + n > bytes_.size()) throw std::runtime_error("ByteReader: truncated input");
    }
    const std::string& bytes_;
    size_t pos_ = 0;
};

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

// Write-then-rename so readers never observe a partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace ctl
