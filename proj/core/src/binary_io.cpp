#include "scbm/binary_io.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include <zlib.h>

namespace scbm::io {

std::uint32_t crc32(const std::uint8_t* data, std::size_t size) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in chunks.
  while (size > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    crc = ::crc32(crc, data, chunk);
    data += chunk;
    size -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

void ByteWriter::write_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
  if (!out) throw IoError("failed writing '" + path + "'");
}

ByteReader ByteReader::from_file(const std::string& path, std::string what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + what + " '" + path + "'");
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return ByteReader(std::move(data), std::move(what));
}

void ByteReader::verify_checksum() const {
  if (data_.size() < sizeof(std::uint32_t)) throw IoError("truncated " + what_ + ": no checksum");
  const std::size_t body = data_.size() - sizeof(std::uint32_t);
  std::uint32_t stored = 0;
  std::memcpy(&stored, data_.data() + body, sizeof(stored));
  const std::uint32_t actual = crc32(data_.data(), body);
  if (stored != actual) {
    std::ostringstream msg;
    msg << what_ << " checksum mismatch: stored 0x" << std::hex << stored << ", computed 0x" << actual;
    throw ChecksumError(msg.str());
  }
}

void ByteReader::expect_end() const {
  if (pos_ + sizeof(std::uint32_t) != data_.size())
    throw IoError(what_ + ": " + std::to_string(data_.size() - pos_) + " unexpected trailing bytes");
}

}  // namespace scbm::io
