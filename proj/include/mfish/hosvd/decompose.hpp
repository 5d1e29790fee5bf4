#pragma once

#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "mfish/hosvd/dense_tensor.hpp"

namespace mfish::hosvd {

struct Decomposition {
    DenseTensor core;
    std::vector<Matrix> factors; ///< factors[n] is dims[n] x ranks[n], orthonormal columns
    double relative_error = 0.0; ///< ||X - reconstruction|| / ||X||
};

/// Leading `rank` left singular vectors of the mode-n unfolding, obtained from
/// the eigenvectors of its Gram matrix. Each column is signed so that its
/// largest-magnitude entry is positive.
inline Matrix mode_factor(const DenseTensor& x, int mode, int rank)
{
    Eigen::SelfAdjointEigenSolver<Matrix> eig(x.mode_gram(mode));
    if (eig.info() != Eigen::Success)
        throw Error("hosvd: eigendecomposition failed");
    const Matrix& vecs = eig.eigenvectors(); // ascending eigenvalues
    const int d = x.dim(mode);
    Matrix u(d, rank);
    for (int j = 0; j < rank; ++j) {
        u.col(j) = vecs.col(d - 1 - j);
        Eigen::Index arg;
        u.col(j).cwiseAbs().maxCoeff(&arg);
        if (u(arg, j) < 0)
            u.col(j) = -u.col(j);
    }
    return u;
}

/// Multiplies `core` by each factor along its mode.
inline DenseTensor reconstruct(const DenseTensor& core, const std::vector<Matrix>& factors)
{
    DenseTensor x = core;
    for (int n = 0; n < core.order(); ++n)
        x = x.mode_product(factors[n], n);
    return x;
}

/// Truncated higher-order SVD with the given per-mode ranks.
inline Decomposition hosvd_decompose(const DenseTensor& x, const std::vector<int>& ranks)
{
    if (static_cast<int>(ranks.size()) != x.order())
        throw ValidationError("hosvd: need one rank per mode");
    Decomposition d;
    for (int n = 0; n < x.order(); ++n) {
        if (ranks[n] < 1 || ranks[n] > x.dim(n))
            throw ValidationError("hosvd: rank " + std::to_string(ranks[n]) + " for mode " + std::to_string(n) +
                                  " exceeds its extent " + std::to_string(x.dim(n)));
        d.factors.push_back(mode_factor(x, n, ranks[n]));
    }
    d.core = x;
    for (int n = 0; n < x.order(); ++n)
        d.core = d.core.mode_product(d.factors[n].transpose(), n);
    const DenseTensor back = reconstruct(d.core, d.factors);
    double err = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        err += (x[i] - back[i]) * (x[i] - back[i]);
    const double norm = x.squared_norm();
    d.relative_error = norm > 0 ? std::sqrt(err / norm) : std::sqrt(err);
    return d;
}

} // namespace mfish::hosvd
