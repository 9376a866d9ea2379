#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "crossbid/core/error.hpp"

namespace crossbid {

/// Byte-oriented writer/reader for the binary file formats. All integers are
/// little-endian fixed width; doubles are IEEE-754 bit patterns.
class BinWriter {
public:
    explicit BinWriter(const std::string& path) : os_(path, std::ios::binary) {
        CB_REQUIRE(os_.good(), "cannot open for writing: ", path);
        path_ = path;
    }

    void raw(const void* p, std::size_t n) {
        os_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    }
    void u32(std::uint32_t v) { raw(&v, 4); }
    void u64(std::uint64_t v) { raw(&v, 8); }
    void i64(std::int64_t v) { raw(&v, 8); }
    void f64(double v) { raw(&v, 8); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
    void f64s(const std::vector<double>& v) {
        u64(v.size());
        raw(v.data(), v.size() * sizeof(double));
    }
    void close() {
        os_.close();
        CB_REQUIRE(os_.good(), "write failure on ", path_);
    }

private:
    std::ofstream os_;
    std::string path_;
};

class BinReader {
public:
    explicit BinReader(const std::string& path) : is_(path, std::ios::binary), path_(path) {
        CB_REQUIRE(is_.good(), "cannot open for reading: ", path);
    }

    void raw(void* p, std::size_t n) {
        is_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        CB_REQUIRE(static_cast<std::size_t>(is_.gcount()) == n,
                   "truncated file ", path_, " at byte offset ", pos_);
        pos_ += n;
    }
    std::uint32_t u32() { std::uint32_t v; raw(&v, 4); return v; }
    std::uint64_t u64() { std::uint64_t v; raw(&v, 8); return v; }
    std::int64_t i64() { std::int64_t v; raw(&v, 8); return v; }
    double f64() { double v; raw(&v, 8); return v; }
    std::string str() {
        std::uint32_t n = u32();
        CB_REQUIRE(n < (1u << 28), "corrupt string length in ", path_, " at byte offset ", pos_ - 4);
        std::string s(n, '\0');
        raw(s.data(), n);
        return s;
    }
    std::vector<double> f64s() {
        std::uint64_t n = u64();
        CB_REQUIRE(n < (1ull << 32), "corrupt array length in ", path_, " at byte offset ", pos_ - 8);
        std::vector<double> v(n);
        raw(v.data(), n * sizeof(double));
        return v;
    }
    std::size_t offset() const { return pos_; }
    bool at_eof() { return is_.peek() == std::ifstream::traits_type::eof(); }

private:
    std::ifstream is_;
    std::string path_;
    std::size_t pos_ = 0;
};

inline std::string slurp_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    CB_REQUIRE(is.good(), "cannot open: ", path);
    return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

} // namespace crossbid
