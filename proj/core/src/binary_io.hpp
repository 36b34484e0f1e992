// Little-endian binary helpers shared by the dataset and checkpoint codecs.
#ifndef EDP_SRC_BINARY_IO_HPP_
#define EDP_SRC_BINARY_IO_HPP_

#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "edp/errors.hpp"

namespace edp::detail {

class ByteWriter {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  template <typename T>
  void uint(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      buf_.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
    }
  }
  void f32(double v) { uint(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void str16(const std::string& s) {
    uint(static_cast<std::uint16_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void str32(const std::string& s) {
    uint(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  const std::vector<unsigned char>& data() const { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<unsigned char>& buf, std::string what)
      : buf_(buf), what_(std::move(what)) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return buf_.size() - pos_; }

  void need(std::size_t n, const char* field) const {
    if (remaining() < n) {
      throw FormatError(what_ + ": truncated while reading " + field, pos_);
    }
  }
  template <typename T>
  T uint(const char* field) {
    need(sizeof(T), field);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<T>(buf_[pos_ + i]) << (8 * i));
    }
    pos_ += sizeof(T);
    return v;
  }
  double f32(const char* field) {
    return static_cast<double>(std::bit_cast<float>(uint<std::uint32_t>(field)));
  }
  std::string raw(std::size_t n, const char* field) {
    need(n, field);
    std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::string str16(const char* field) {
    return raw(uint<std::uint16_t>(field), field);
  }
  std::string str32(const char* field) {
    return raw(uint<std::uint32_t>(field), field);
  }
  [[noreturn]] void fail(const std::string& msg, std::size_t at) const {
    throw FormatError(what_ + ": " + msg, at);
  }

 private:
  const std::vector<unsigned char>& buf_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::vector<unsigned char> read_file(const std::string& path);
// Writes to path.tmp then renames, so a failed write leaves the old file.
void write_file_atomic(const std::string& path,
                       const std::vector<unsigned char>& data);

}  // namespace edp::detail

#endif  // EDP_SRC_BINARY_IO_HPP_
