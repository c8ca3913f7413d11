#include "roughflow/linalg.hpp"

#include <Eigen/SVD>
#include <cmath>

namespace roughflow {

double op_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() == 1 && m.cols() == 1) return std::abs(m(0, 0));
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues()(0);
}

Vec make_vec(std::initializer_list<double> values) {
  Vec v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

}  // namespace roughflow
