#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "drcn/core/tensor.hpp"

namespace drcn {

// Binary tensor container, little-endian:
//   "DRCN" | version u32 | count u32 |
//   per tensor: name_len u32 | utf-8 name | rank u32 | dims u64 x rank |
//               dtype u8 (0 = f64, 1 = f32) | raw data
inline constexpr std::uint32_t kTensorFormatVersion = 1;

enum class DType : std::uint8_t { kFloat64 = 0, kFloat32 = 1 };

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

void write_tensors(std::ostream& out, const std::vector<NamedTensor>& tensors,
                   DType dtype = DType::kFloat64);
std::vector<NamedTensor> read_tensors(std::istream& in);

}  // namespace drcn
