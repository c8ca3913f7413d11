#pragma once

#include <Eigen/Dense>

namespace roughflow {

// Field vectors and matrices live on the stack: spatial dimension is capped.
inline constexpr int kMaxDim = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

// Largest singular value.
double op_norm(const Mat& m);

Vec make_vec(std::initializer_list<double> values);

}  // namespace roughflow
