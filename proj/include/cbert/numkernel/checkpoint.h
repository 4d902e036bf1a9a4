#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cbert/numkernel/tensor.h"

namespace cbert::nk {

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<double> values;

  bool operator==(const NamedTensor&) const = default;
};

// Binary container, little-endian:
//   "CBCKPT\0\0"  u32 version(=1)  u64 count
//   per entry: u32 name_len, name, u32 rank, u64 extents[rank],
//              u64 value bit patterns[product(extents)]
//   u64 FNV-1a checksum over every preceding byte
// Values are stored as raw IEEE-754 bits, so a round trip is exact.
std::string encode_checkpoint(const std::vector<NamedTensor>& entries);
std::vector<NamedTensor> decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& entries);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

std::string read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::string_view bytes);

}  // namespace cbert::nk
