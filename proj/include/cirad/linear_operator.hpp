// SPDX-License-Identifier: Apache-2.0
//
// cirad: compressive illumination radar simulation and sparse recovery
// Copyright (C) 2026 The cirad authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef CIRAD_LINEAR_OPERATOR_HPP
#define CIRAD_LINEAR_OPERATOR_HPP

#include <Eigen/Dense>

#include <concepts>

namespace cirad
{

using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;
using Index = Eigen::Index;

// Anything the solvers can multiply with: forward map and its adjoint.
// Implementations must be safe to call concurrently on a const instance.
template <class Op>
concept LinearOperator = requires(const Op& op, const Vec& v) {
    { op.rows() } -> std::convertible_to<Index>;
    { op.cols() } -> std::convertible_to<Index>;
    { op.apply(v) } -> std::convertible_to<Vec>;
    { op.adjoint_apply(v) } -> std::convertible_to<Vec>;
};

// Non-owning view of a dense matrix.
class DenseOperator
{
public:
    explicit DenseOperator(const Mat& m) : m_(&m) {}

    Index rows() const noexcept { return m_->rows(); }
    Index cols() const noexcept { return m_->cols(); }
    Vec apply(const Vec& x) const { return (*m_) * x; }
    Vec adjoint_apply(const Vec& y) const { return m_->adjoint() * y; }
    const Mat& matrix() const noexcept { return *m_; }

private:
    const Mat* m_;
};

inline DenseOperator as_operator(const Mat& m) { return DenseOperator(m); }

} // namespace cirad

#endif // CIRAD_LINEAR_OPERATOR_HPP
