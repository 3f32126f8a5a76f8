#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "epg/error.hpp"

namespace epg::ad {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline Index numel(const Shape& s)
{
    return std::accumulate(s.begin(), s.end(), Index{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s)
{
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

template <class Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Dense row-major tensor. Signals use the layout [batch, channels, length];
// dense activations use [batch, features].
template <class Scalar_>
class Tensor {
public:
    using Scalar = Scalar_;
    using MatrixMap = Eigen::Map<RowMatrix<Scalar>>;
    using ConstMatrixMap = Eigen::Map<const RowMatrix<Scalar>>;

    Tensor() = default;
    explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(Vector<Scalar>::Zero(numel(shape_))) {}
    Tensor(Shape shape, Vector<Scalar> data) : shape_(std::move(shape)), data_(std::move(data))
    {
        if (data_.size() != numel(shape_))
            throw DimensionError("tensor data size " + std::to_string(data_.size()) +
                                 " does not match shape " + shape_str(shape_));
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor constant(Shape shape, Scalar v)
    {
        Tensor t(std::move(shape));
        t.data_.setConstant(v);
        return t;
    }

    const Shape& shape() const { return shape_; }
    Index rank() const { return static_cast<Index>(shape_.size()); }
    Index dim(Index i) const { return shape_.at(static_cast<std::size_t>(i)); }
    Index size() const { return data_.size(); }
    bool empty() const { return shape_.empty(); }

    Vector<Scalar>& data() { return data_; }
    const Vector<Scalar>& data() const { return data_; }
    Scalar* ptr() { return data_.data(); }
    const Scalar* ptr() const { return data_.data(); }

    Scalar& operator[](Index i) { return data_[i]; }
    Scalar operator[](Index i) const { return data_[i]; }

    // Element of a rank-3 tensor.
    Scalar& operator()(Index b, Index c, Index l) { return data_[(b * shape_[1] + c) * shape_[2] + l]; }
    Scalar operator()(Index b, Index c, Index l) const { return data_[(b * shape_[1] + c) * shape_[2] + l]; }
    // Element of a rank-2 tensor.
    Scalar& operator()(Index r, Index c) { return data_[r * shape_[1] + c]; }
    Scalar operator()(Index r, Index c) const { return data_[r * shape_[1] + c]; }

    // Row-major matrix view over the whole buffer.
    MatrixMap matrix(Index rows, Index cols) { return MatrixMap(data_.data(), rows, cols); }
    ConstMatrixMap matrix(Index rows, Index cols) const { return ConstMatrixMap(data_.data(), rows, cols); }

    // [channels, length] view of batch item b of a rank-3 tensor.
    MatrixMap item(Index b) { return MatrixMap(data_.data() + b * shape_[1] * shape_[2], shape_[1], shape_[2]); }
    ConstMatrixMap item(Index b) const
    {
        return ConstMatrixMap(data_.data() + b * shape_[1] * shape_[2], shape_[1], shape_[2]);
    }

    Tensor reshaped(Shape s) const { return Tensor(std::move(s), data_); }

    template <class Other>
    Tensor<Other> cast() const
    {
        return Tensor<Other>(shape_, data_.template cast<Other>());
    }

    void set_zero() { data_.setZero(); }

private:
    Shape shape_;
    Vector<Scalar> data_;
};

}  // namespace epg::ad
