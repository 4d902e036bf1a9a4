#include "cbert/numkernel/checkpoint.h"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "cbert/common/errors.h"

namespace cbert::nk {
namespace {

constexpr std::string_view kMagic{"CBCKPT\0\0", 8};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
  }
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    std::uint64_t value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      value |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(value);
  }

  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    auto view = bytes_.substr(pos_, n);
    pos_ += n;
    return view;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError(std::string("truncated checkpoint while reading ") + what + " at byte " +
                            std::to_string(pos_));
    }
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const std::vector<NamedTensor>& entries) {
  std::string out(kMagic);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, entries.size());
  for (const NamedTensor& e : entries) {
    if (shape_numel(e.shape) != e.values.size()) {
      throw CheckpointError("entry '" + e.name + "' has shape " + shape_str(e.shape) + " but " +
                            std::to_string(e.values.size()) + " values");
    }
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out += e.name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.shape.size()));
    for (std::size_t d : e.shape) put<std::uint64_t>(out, d);
    for (double v : e.values) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  put<std::uint64_t>(out, fnv1a(out));
  return out;
}

std::vector<NamedTensor> decode_checkpoint(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(kMagic.size(), "magic") != kMagic) throw CheckpointError("not a checkpoint file (bad magic)");
  const auto version = in.get<std::uint32_t>("version");
  if (version != kVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                          std::to_string(kVersion) + ")");
  }
  const auto count = in.get<std::uint64_t>("entry count");
  std::vector<NamedTensor> entries;
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensor e;
    const auto name_len = in.get<std::uint32_t>("name length");
    e.name = std::string(in.take(name_len, "name"));
    const auto rank = in.get<std::uint32_t>("rank");
    if (rank > 8) throw CheckpointError("entry '" + e.name + "' has implausible rank " + std::to_string(rank));
    std::uint64_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const auto extent = in.get<std::uint64_t>("extent");
      if (extent == 0 || extent > (1ULL << 32)) {
        throw CheckpointError("entry '" + e.name + "' has invalid extent " + std::to_string(extent));
      }
      e.shape.push_back(static_cast<std::size_t>(extent));
      numel *= extent;
      if (numel > in.remaining() / 8) {
        throw CheckpointError("truncated checkpoint: entry '" + e.name + "' is larger than the file");
      }
    }
    if (numel > in.remaining() / 8) {
      throw CheckpointError("truncated checkpoint: entry '" + e.name + "' needs " + std::to_string(numel) +
                            " values");
    }
    e.values.resize(static_cast<std::size_t>(numel));
    for (double& v : e.values) v = std::bit_cast<double>(in.get<std::uint64_t>("value"));
    entries.push_back(std::move(e));
  }
  const std::size_t payload_end = in.pos();
  const auto checksum = in.get<std::uint64_t>("checksum");
  if (checksum != fnv1a(bytes.substr(0, payload_end))) throw CheckpointError("checkpoint checksum mismatch");
  if (in.remaining() != 0) throw CheckpointError("trailing bytes after checkpoint payload");
  return entries;
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& entries) {
  write_file_bytes(path, encode_checkpoint(entries));
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file_bytes(path));
}

}  // namespace cbert::nk
