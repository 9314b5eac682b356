#pragma once

#include <Eigen/Core>

#include "drcn/core/tensor.hpp"

namespace drcn::detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixView = Eigen::Map<RowMatrix>;
using ConstMatrixView = Eigen::Map<const RowMatrix>;

inline ConstMatrixView view(const Tensor& t) {
  return ConstMatrixView(t.data(), static_cast<Eigen::Index>(t.rows()),
                         static_cast<Eigen::Index>(t.cols()));
}

inline MatrixView view(Tensor& t) {
  return MatrixView(t.data(), static_cast<Eigen::Index>(t.rows()),
                    static_cast<Eigen::Index>(t.cols()));
}

inline ConstMatrixView view(const double* data, std::size_t rows, std::size_t cols) {
  return ConstMatrixView(data, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

inline MatrixView view(double* data, std::size_t rows, std::size_t cols) {
  return MatrixView(data, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

}  // namespace drcn::detail
