#include "neurodb/binary.hpp"

#include <fstream>
#include <iterator>

namespace neurodb::binary {

namespace {
constexpr std::size_t kMagicSize = 8;
constexpr std::size_t kHeaderSize = kMagicSize + 4 + 8;
}  // namespace

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(LoadError::Kind::Io, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
  if (!out) throw InputError("short write to " + path);
}

std::vector<std::uint8_t> seal(const char (&magic)[9], std::uint32_t version,
                               std::span<const std::uint8_t> payload) {
  Writer w;
  w.raw({reinterpret_cast<const std::uint8_t*>(magic), kMagicSize});
  w.u32(version);
  w.u64(payload.size());
  w.raw(payload);
  w.u64(fnv1a(w.bytes()));
  return std::move(w.bytes());
}

std::span<const std::uint8_t> unseal(const char (&magic)[9], std::uint32_t version,
                                     std::span<const std::uint8_t> file) {
  if (file.size() < kMagicSize ||
      std::memcmp(file.data(), magic, kMagicSize) != 0) {
    throw LoadError(LoadError::Kind::BadMagic, "not a recognized file (bad magic)");
  }
  Reader r(file.subspan(kMagicSize));
  const auto found = r.u32();
  if (found != version) {
    throw LoadError(LoadError::Kind::Version,
                    "unsupported format version " + std::to_string(found) +
                        " (expected " + std::to_string(version) + ")");
  }
  const auto size = r.u64();
  if (file.size() - kHeaderSize < 8 || file.size() - kHeaderSize - 8 < size) {
    throw LoadError(LoadError::Kind::Truncated, "file is truncated");
  }
  if (file.size() != kHeaderSize + size + 8) {
    throw LoadError(LoadError::Kind::Malformed, "trailing bytes after payload");
  }
  const auto body = file.first(kHeaderSize + size);
  Reader tail(file.subspan(kHeaderSize + size));
  if (tail.u64() != fnv1a(body)) {
    throw LoadError(LoadError::Kind::Checksum, "checksum mismatch");
  }
  return file.subspan(kHeaderSize, size);
}

}  // namespace neurodb::binary
