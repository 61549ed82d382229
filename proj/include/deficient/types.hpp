#pragma once

#include <Eigen/Core>

#include <cstdint>

namespace deficient {

using Index = Eigen::Index;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using ConstVectorRef = Eigen::Ref<const VectorX<Scalar>>;

using VectorXd = VectorX<double>;
using MatrixXd = MatrixX<double>;

enum class Status : std::uint8_t { Alive = 0, Escaped = 1 };

} // namespace deficient
