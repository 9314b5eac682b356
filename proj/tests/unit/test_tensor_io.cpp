#include <gtest/gtest.h>

#include <sstream>

#include "drcn/core/errors.hpp"
#include "drcn/core/tensor_io.hpp"
#include "test_util.hpp"

namespace drcn {
namespace {

TEST(TensorIoTest, RoundTripIsBitExact) {
  Rng rng(3);
  std::vector<NamedTensor> tensors{{"w", test::random_tensor({3, 4}, rng)},
                                   {"b", test::random_tensor({4}, rng)},
                                   {"s", Tensor::scalar(2.5)}};
  std::stringstream buffer;
  write_tensors(buffer, tensors);
  const auto back = read_tensors(buffer);
  ASSERT_EQ(back.size(), tensors.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].name, tensors[i].name);
    EXPECT_EQ(back[i].tensor, tensors[i].tensor);
  }
}

TEST(TensorIoTest, HeaderLayout) {
  std::stringstream buffer;
  write_tensors(buffer, {{"ab", Tensor::vector({1.0})}});
  const std::string bytes = buffer.str();
  // magic, version, count, name_len, name, rank, dim, dtype, data
  ASSERT_EQ(bytes.size(), 4u + 4 + 4 + 4 + 2 + 4 + 8 + 1 + 8);
  EXPECT_EQ(bytes.substr(0, 4), "DRCN");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[8], 1);
  EXPECT_EQ(bytes[12], 2);
  EXPECT_EQ(bytes.substr(16, 2), "ab");
  EXPECT_EQ(bytes[18], 1);
  EXPECT_EQ(bytes[22], 1);
  EXPECT_EQ(bytes[30], 0);
}

TEST(TensorIoTest, Float32Storage) {
  std::stringstream buffer;
  write_tensors(buffer, {{"x", Tensor::vector({0.5, -1.25})}}, DType::kFloat32);
  const auto back = read_tensors(buffer);
  EXPECT_EQ(back[0].tensor, Tensor::vector({0.5, -1.25}));
}

TEST(TensorIoTest, RejectsBadMagicAndTruncation) {
  std::stringstream bad("NOPE");
  EXPECT_THROW(read_tensors(bad), FormatError);
  std::stringstream buffer;
  write_tensors(buffer, {{"x", Tensor::vector({1, 2, 3})}});
  std::string bytes = buffer.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() - 5));
  EXPECT_THROW(read_tensors(truncated), FormatError);
}

}  // namespace
}  // namespace drcn
