// Copyright 2026 The FusionPool Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Little-endian byte streams shared by the pool and head file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <zlib.h>

#include "fusionpool/error.hpp"

namespace fusionpool::detail {

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

inline std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks to stay below 4 GiB per call.
  std::size_t offset = 0;
  while (offset < bytes.size()) {
    const auto chunk = static_cast<uInt>(
        std::min<std::size_t>(bytes.size() - offset, 1u << 30));
    crc = ::crc32(crc, bytes.data() + offset, chunk);
    offset += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

// 64-bit FNV-1a.
class Fnv1a64 {
 public:
  static constexpr std::uint64_t kOffset = 0xcbf29ce484222325ull;
  static constexpr std::uint64_t kPrime = 0x100000001b3ull;

  Fnv1a64& update(std::span<const std::uint8_t> bytes) {
    for (std::uint8_t b : bytes) {
      state_ ^= b;
      state_ *= kPrime;
    }
    return *this;
  }
  Fnv1a64& update(std::string_view text) {
    return update({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
  }
  template <typename T>
  Fnv1a64& update_pod(const T& value) {
    return update({reinterpret_cast<const std::uint8_t*>(&value), sizeof(T)});
  }
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = kOffset;
};

class ByteWriter {
 public:
  void bytes(std::span<const std::uint8_t> data) {
    buffer_.insert(buffer_.end(), data.begin(), data.end());
  }
  template <typename T>
  void pod(T value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    buffer_.insert(buffer_.end(), p, p + sizeof(T));
  }
  void u8(std::uint8_t v) { pod(v); }
  void u16(std::uint16_t v) { pod(v); }
  void u32(std::uint32_t v) { pod(v); }
  void u64(std::uint64_t v) { pod(v); }
  void f32(float v) { pod(v); }
  void f64(double v) { pod(v); }

  // u16 length prefix followed by UTF-8 bytes.
  void short_string(std::string_view s) {
    if (s.size() > 0xffff) {
      fail(ErrorCode::kInvalidArgument, "string too long for u16 length prefix");
    }
    u16(static_cast<std::uint16_t>(s.size()));
    bytes({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
  }
  void f32_array(std::span<const float> values) {
    bytes({reinterpret_cast<const std::uint8_t*>(values.data()), values.size_bytes()});
  }
  void f64_array(std::span<const double> values) {
    bytes({reinterpret_cast<const std::uint8_t*>(values.data()), values.size_bytes()});
  }

  const std::vector<std::uint8_t>& buffer() const { return buffer_; }
  std::vector<std::uint8_t>& buffer() { return buffer_; }

 private:
  std::vector<std::uint8_t> buffer_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::span<const std::uint8_t> take(std::size_t n) {
    if (n > remaining()) {
      fail(ErrorCode::kTruncated, "unexpected end of data");
    }
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  template <typename T>
  T pod() {
    T value;
    auto raw = take(sizeof(T));
    std::memcpy(&value, raw.data(), sizeof(T));
    return value;
  }
  std::uint8_t u8() { return pod<std::uint8_t>(); }
  std::uint16_t u16() { return pod<std::uint16_t>(); }
  std::uint32_t u32() { return pod<std::uint32_t>(); }
  std::uint64_t u64() { return pod<std::uint64_t>(); }
  float f32() { return pod<float>(); }
  double f64() { return pod<double>(); }

  std::string short_string() {
    const std::uint16_t n = u16();
    auto raw = take(n);
    return std::string(reinterpret_cast<const char*>(raw.data()), raw.size());
  }
  void f32_array(std::span<float> out) {
    auto raw = take(out.size_bytes());
    std::memcpy(out.data(), raw.data(), raw.size());
  }
  void f64_array(std::span<double> out) {
    auto raw = take(out.size_bytes());
    std::memcpy(out.data(), raw.data(), raw.size());
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    fail(ErrorCode::kIo, "cannot open '" + path + "'");
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    fail(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    fail(ErrorCode::kIo, "write to '" + path + "' failed");
  }
}

// Frames a payload as: magic, payload, u32 CRC32(payload).
inline std::vector<std::uint8_t> seal(std::string_view magic,
                                      const std::vector<std::uint8_t>& payload) {
  std::vector<std::uint8_t> out(magic.size() + payload.size() + 4);
  std::memcpy(out.data(), magic.data(), magic.size());
  if (!payload.empty()) std::memcpy(out.data() + magic.size(), payload.data(), payload.size());
  const std::uint32_t crc = crc32(payload);
  std::memcpy(out.data() + magic.size() + payload.size(), &crc, 4);
  return out;
}

// Splits a sealed file into payload and stored CRC after checking the magic.
// Callers parse the payload first (so a short file reads as truncated) and
// then call verify_crc().
struct Sealed {
  std::span<const std::uint8_t> payload;
  std::uint32_t stored_crc = 0;
};

inline Sealed unseal(std::string_view magic, std::span<const std::uint8_t> file) {
  if (file.size() < magic.size() ||
      std::memcmp(file.data(), magic.data(), magic.size()) != 0) {
    fail(ErrorCode::kFormat, "bad magic, expected '" + std::string(magic) + "'");
  }
  if (file.size() < magic.size() + 4) {
    fail(ErrorCode::kTruncated, "file too short for checksum trailer");
  }
  Sealed out;
  out.payload = file.subspan(magic.size(), file.size() - magic.size() - 4);
  std::memcpy(&out.stored_crc, file.data() + file.size() - 4, 4);
  return out;
}

inline void verify_crc(const Sealed& sealed) {
  if (crc32(sealed.payload) != sealed.stored_crc) {
    fail(ErrorCode::kChecksum, "CRC32 mismatch");
  }
}

inline std::string ascii_fold(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

}  // namespace fusionpool::detail
