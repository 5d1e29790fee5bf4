#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfish/core/error.hpp"

namespace mfish::hosvd {

using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense N-mode array, row-major (the last index varies fastest).
class DenseTensor {
public:
    DenseTensor() = default;
    explicit DenseTensor(std::vector<int> dims, double fill = 0.0) : dims_(std::move(dims))
    {
        for (int d : dims_)
            if (d <= 0)
                throw ValidationError("DenseTensor: dimensions must be positive");
        data_.assign(count(dims_), fill);
    }

    const std::vector<int>& dims() const { return dims_; }
    int order() const { return static_cast<int>(dims_.size()); }
    int dim(int mode) const { return dims_.at(mode); }
    std::size_t size() const { return data_.size(); }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    const std::vector<double>& values() const { return data_; }

    double& at(std::initializer_list<int> idx) { return data_[flat(idx)]; }
    double at(std::initializer_list<int> idx) const { return data_[flat(idx)]; }

    double squared_norm() const { return std::inner_product(data_.begin(), data_.end(), data_.begin(), 0.0); }
    double norm() const { return std::sqrt(squared_norm()); }

    /// Product of the extents before / after `mode`.
    std::size_t left(int mode) const { return count(dims_, 0, mode); }
    std::size_t right(int mode) const { return count(dims_, mode + 1, order()); }

    /// Mode-n Gram matrix X_(n) X_(n)^T without materialising the unfolding.
    Matrix mode_gram(int mode) const
    {
        const int d = dims_.at(mode);
        const auto L = left(mode), R = right(mode);
        Matrix g = Matrix::Zero(d, d);
        for (std::size_t l = 0; l < L; ++l) {
            Eigen::Map<const RowMatrix> block(data_.data() + l * d * R, d, static_cast<Eigen::Index>(R));
            g.noalias() += block * block.transpose();
        }
        return g;
    }

    /// Mode-n product: replaces extent `dims[mode]` by m.rows().
    DenseTensor mode_product(const Matrix& m, int mode) const
    {
        const int d = dims_.at(mode);
        if (m.cols() != d)
            throw ValidationError("mode_product: matrix has " + std::to_string(m.cols()) + " columns, mode " +
                                  std::to_string(mode) + " has extent " + std::to_string(d));
        auto out_dims = dims_;
        out_dims[mode] = static_cast<int>(m.rows());
        DenseTensor out(out_dims);
        const auto L = left(mode), R = right(mode);
        const RowMatrix mr = m;
        for (std::size_t l = 0; l < L; ++l) {
            Eigen::Map<const RowMatrix> in(data_.data() + l * d * R, d, static_cast<Eigen::Index>(R));
            Eigen::Map<RowMatrix> o(out.data() + l * m.rows() * R, m.rows(), static_cast<Eigen::Index>(R));
            o.noalias() = mr * in;
        }
        return out;
    }

private:
    static std::size_t count(const std::vector<int>& d, int from = 0, int to = -1)
    {
        if (to < 0)
            to = static_cast<int>(d.size());
        std::size_t n = 1;
        for (int i = from; i < to; ++i)
            n *= static_cast<std::size_t>(d[i]);
        return n;
    }

    std::size_t flat(std::initializer_list<int> idx) const
    {
        if (idx.size() != dims_.size())
            throw ValidationError("DenseTensor: index has the wrong order");
        std::size_t f = 0;
        int k = 0;
        for (int i : idx)
            f = f * dims_[k++] + i;
        return f;
    }

    std::vector<int> dims_;
    std::vector<double> data_;
};

} // namespace mfish::hosvd
