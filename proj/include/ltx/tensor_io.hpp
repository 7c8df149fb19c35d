// "LTB1" tensor container.
//
// Layout (little-endian): magic "LTB1"; u32 tensor count; per tensor: u16 name
// length, UTF-8 name, u8 dtype (0 = f32), u8 rank, rank x u64 dims, then the
// row-major payload.
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ltx {

struct Tensor {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::vector<float> values;

  std::uint64_t element_count() const;
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

std::string encode_tensors(std::span<const Tensor> tensors);
std::vector<Tensor> decode_tensors(std::string_view bytes);

void write_tensors(const std::filesystem::path& path, std::span<const Tensor> tensors);
std::vector<Tensor> read_tensors(const std::filesystem::path& path);

}  // namespace ltx
