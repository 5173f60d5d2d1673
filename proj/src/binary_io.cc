// ekd/src/binary_io.cc
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

#include "ekd/binary_io.h"

#include <openssl/evp.h>

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace ekd {

void ByteWriter::U32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::U64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::F64(double v) { U64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::Str(std::string_view s) {
  U32(static_cast<std::uint32_t>(s.size()));
  Raw(s);
}

void ByteWriter::IntSeq(std::span<const int> seq) {
  U32(static_cast<std::uint32_t>(seq.size()));
  for (int v : seq) I32(v);
}

void ByteWriter::F64Seq(std::span<const double> seq) {
  U64(seq.size());
  for (double v : seq) F64(v);
}

void ByteWriter::Record(const ByteWriter &payload) {
  U32(static_cast<std::uint32_t>(payload.size()));
  Bytes(payload.bytes());
}

void ByteReader::Need(std::size_t n) const {
  if (n > data_.size() - pos_) throw FormatError("corrupted record");
}

std::uint8_t ByteReader::U8() {
  Need(1);
  return data_[pos_++];
}

std::uint32_t ByteReader::U32() {
  Need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::U64() {
  Need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return v;
}

double ByteReader::F64() { return std::bit_cast<double>(U64()); }

std::string ByteReader::Raw(std::size_t n) {
  Need(n);
  std::string s(reinterpret_cast<const char *>(data_.data() + pos_), n);
  pos_ += n;
  return s;
}

std::string ByteReader::Str() { return Raw(U32()); }

std::vector<int> ByteReader::IntSeq() {
  const std::uint32_t n = U32();
  Need(static_cast<std::size_t>(n) * 4);
  std::vector<int> out(n);
  for (auto &v : out) v = I32();
  return out;
}

std::vector<double> ByteReader::F64Seq() {
  const std::uint64_t n = U64();
  if (n > remaining() / 8) throw FormatError("corrupted record");
  std::vector<double> out(n);
  for (auto &v : out) v = F64();
  return out;
}

ByteReader ByteReader::Record() {
  const std::uint32_t n = U32();
  Need(n);
  ByteReader sub(data_.subspan(pos_, n));
  pos_ += n;
  return sub;
}

std::string ByteReader::Line() {
  std::string out;
  while (true) {
    if (pos_ >= data_.size()) throw FormatError("corrupted record");
    const char c = static_cast<char>(data_[pos_++]);
    if (c == '\n') return out;
    out.push_back(c);
  }
}

std::vector<std::uint8_t> ReadFileBytes(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void WriteFileAtomic(const std::string &path, std::span<const std::uint8_t> bytes) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp);
    out.write(reinterpret_cast<const char *>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for " + tmp);
  }
  fs::rename(tmp, target);
}

void WriteFileAtomic(const std::string &path, std::string_view text) {
  WriteFileAtomic(path, std::span(reinterpret_cast<const std::uint8_t *>(text.data()), text.size()));
}

std::string Sha256Hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i)
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return os.str();
}

std::string Sha256Hex(std::string_view text) {
  return Sha256Hex(std::span(reinterpret_cast<const std::uint8_t *>(text.data()), text.size()));
}

}  // namespace ekd
