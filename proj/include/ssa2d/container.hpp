#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssa2d {

// "STC1" tensor container: u32 tensor count, then per tensor
// u16 name length + name bytes, u8 dtype, u8 rank, rank x u64 dims,
// row-major payload. All integers little-endian.
struct FormatError : std::runtime_error {
  std::size_t offset;
  FormatError(const std::string& what, std::size_t off)
      : std::runtime_error(what + " (at byte offset " + std::to_string(off) + ")"), offset(off) {}
};

struct ContainerTensor {
  enum class DType : std::uint8_t { F32 = 0, I32 = 1, U8 = 2 };

  std::string name;
  DType dtype = DType::F32;
  std::vector<std::int64_t> dims;
  std::vector<float> f32;
  std::vector<std::int32_t> i32;
  std::vector<std::uint8_t> u8;

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }

  static ContainerTensor make_f32(std::string name, std::vector<std::int64_t> dims,
                                  std::vector<float> data);
  static ContainerTensor make_i32(std::string name, std::vector<std::int64_t> dims,
                                  std::vector<std::int32_t> data);
  static ContainerTensor make_u8(std::string name, std::vector<std::int64_t> dims,
                                 std::vector<std::uint8_t> data);
};

void write_container(const std::string& path, const std::vector<ContainerTensor>& tensors);
std::vector<ContainerTensor> read_container(const std::string& path);

const ContainerTensor& find_tensor(const std::vector<ContainerTensor>& tensors,
                                   const std::string& name);

}  // namespace ssa2d
