// ekd/include/ekd/binary_io.h
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

#ifndef EKD_BINARY_IO_H_
#define EKD_BINARY_IO_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ekd/types.h"

namespace ekd {

// Append-only little-endian encoder. Doubles are stored as their IEEE-754
// bit pattern so round-trips are bit-exact.
class ByteWriter {
 public:
  void U8(std::uint8_t v) { bytes_.push_back(v); }
  void U32(std::uint32_t v);
  void U64(std::uint64_t v);
  void I32(std::int32_t v) { U32(static_cast<std::uint32_t>(v)); }
  void I64(std::int64_t v) { U64(static_cast<std::uint64_t>(v)); }
  void F64(double v);
  // u32 length prefix followed by raw bytes.
  void Str(std::string_view s);
  void Raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  void Bytes(std::span<const std::uint8_t> b) { bytes_.insert(bytes_.end(), b.begin(), b.end()); }
  void IntSeq(std::span<const int> seq);
  void F64Seq(std::span<const double> seq);
  // Labelled record: u32 byte length followed by the payload.
  void Record(const ByteWriter &payload);

  const std::vector<std::uint8_t> &bytes() const { return bytes_; }
  std::size_t size() const { return bytes_.size(); }

 private:
  std::vector<std::uint8_t> bytes_;
};

// Bounds-checked decoder; every short read throws FormatError("corrupted record").
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t U8();
  std::uint32_t U32();
  std::uint64_t U64();
  std::int32_t I32() { return static_cast<std::int32_t>(U32()); }
  std::int64_t I64() { return static_cast<std::int64_t>(U64()); }
  double F64();
  std::string Str();
  std::string Raw(std::size_t n);
  std::vector<int> IntSeq();
  std::vector<double> F64Seq();
  // Reads a length-prefixed record and returns a reader over its payload.
  ByteReader Record();
  // Reads a newline-terminated text line (without the newline).
  std::string Line();

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }
  bool done() const { return pos_ == data_.size(); }

 private:
  void Need(std::size_t n) const;

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> ReadFileBytes(const std::string &path);

// Writes to "<path>.tmp" and renames into place.
void WriteFileAtomic(const std::string &path, std::span<const std::uint8_t> bytes);
void WriteFileAtomic(const std::string &path, std::string_view text);

std::string Sha256Hex(std::span<const std::uint8_t> bytes);
std::string Sha256Hex(std::string_view text);

}  // namespace ekd

#endif  // EKD_BINARY_IO_H_
