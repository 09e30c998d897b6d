// types.hpp — shared numeric aliases for the two-qubit open-system engine

#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace tsb {

using cplx = std::complex<double>;

inline constexpr cplx I{0.0, 1.0};
inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kEulerGamma = 0.577215664901532860606512090082402431;

using Mat4 = Eigen::Matrix4cd;
using Vec4 = Eigen::Vector4cd;
using Mat16 = Eigen::Matrix<cplx, 16, 16>;
using Vec16 = Eigen::Matrix<cplx, 16, 1>;
using VecX = Eigen::VectorXcd;
using MatX = Eigen::MatrixXcd;

}  // namespace tsb
