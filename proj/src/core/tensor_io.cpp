#include "drcn/core/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

#include "drcn/core/errors.hpp"

namespace drcn {

namespace {

constexpr char kMagic[4] = {'D', 'R', 'C', 'N'};

template <typename T>
void put(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw FormatError("tensor stream truncated");
  }
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void write_tensors(std::ostream& out, const std::vector<NamedTensor>& tensors, DType dtype) {
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kTensorFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rank()));
    for (auto d : tensor.shape()) put<std::uint64_t>(out, d);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(dtype));
    for (double v : tensor.values()) {
      if (dtype == DType::kFloat64) {
        put<double>(out, v);
      } else {
        put<float>(out, static_cast<float>(v));
      }
    }
  }
  if (!out) throw IoError("failed writing tensor stream");
}

std::vector<NamedTensor> read_tensors(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("missing DRCN magic");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kTensorFormatVersion) {
    throw FormatError("unsupported tensor format version " + std::to_string(version));
  }
  const auto count = get<std::uint32_t>(in);
  std::vector<NamedTensor> tensors;
  tensors.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto name_len = get<std::uint32_t>(in);
    std::string name(name_len, '\0');
    if (name_len && !in.read(name.data(), name_len)) throw FormatError("tensor name truncated");
    const auto rank = get<std::uint32_t>(in);
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(get<std::uint64_t>(in));
    const auto tag = get<std::uint8_t>(in);
    if (tag > 1) throw FormatError("unknown dtype tag " + std::to_string(tag) + " for " + name);
    std::vector<double> data(shape_size(shape));
    for (auto& v : data) {
      v = tag == 0 ? get<double>(in) : static_cast<double>(get<float>(in));
    }
    tensors.push_back({std::move(name), Tensor(std::move(shape), std::move(data))});
  }
  return tensors;
}

}  // namespace drcn
