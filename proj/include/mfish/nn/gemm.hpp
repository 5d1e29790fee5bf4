#pragma once

#include <Eigen/Core>

namespace mfish::nn {

/// C = alpha * op(A) * op(B) + beta * C on row-major buffers.
/// op(A) is M x K, op(B) is K x N, C is M x N.
template <class T>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, T alpha, const T* a, int lda, const T* b, int ldb,
          T beta, T* c, int ldc)
{
    using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using ConstMap = Eigen::Map<const RowMat, Eigen::Unaligned, Eigen::OuterStride<>>;
    using Map = Eigen::Map<RowMat, Eigen::Unaligned, Eigen::OuterStride<>>;

    Map cm(c, m, n, Eigen::OuterStride<>(ldc));
    if (beta == T(0))
        cm.setZero();
    else if (beta != T(1))
        cm *= beta;

    const ConstMap am(a, trans_a ? k : m, trans_a ? m : k, Eigen::OuterStride<>(lda));
    const ConstMap bm(b, trans_b ? n : k, trans_b ? k : n, Eigen::OuterStride<>(ldb));
    if (!trans_a && !trans_b)
        cm.noalias() += alpha * am * bm;
    else if (trans_a && !trans_b)
        cm.noalias() += alpha * am.transpose() * bm;
    else if (!trans_a && trans_b)
        cm.noalias() += alpha * am * bm.transpose();
    else
        cm.noalias() += alpha * am.transpose() * bm.transpose();
}

} // namespace mfish::nn
