#pragma once

// Complex dense tensor-algebra primitives: Kronecker, row-wise Khatri-Rao,
// Hadamard product/division and the vec/ten pair.
//
// Index convention used everywhere in cpdfl:
//   * vec() stacks mode 1 fastest: i = i1 + i2*I1 + i3*I1*I2 + ...
//   * kron(a, b): the left factor indexes the slower axis, so
//     kron(a, b)(ia*b.rows() + ib, ja*b.cols() + jb) = a(ia, ja) * b(ib, jb).
// With these two rules vec(W) of an I x R column-major matrix is W.reshaped(),
// and row n of khatri_rao_rows(Z, Psi) pairs with vec(W) column blocks r*I + i.

#include <complex>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cpdfl {

using Index = Eigen::Index;
using cplx = std::complex<double>;
using cmat = Eigen::MatrixXcd;
using cvec = Eigen::VectorXcd;
using rmat = Eigen::MatrixXd;
using rvec = Eigen::VectorXd;

/// Divisor magnitude below which hadamard_div refuses to divide.
inline constexpr double kDivisionGuard = 1e-12;

/// D-way complex tensor stored in vec order (mode 1 fastest).
class DenseTensor {
public:
    DenseTensor() = default;

    explicit DenseTensor(std::vector<Index> shape)
        : shape_(std::move(shape)), data_(cvec::Zero(count(shape_))) {}

    DenseTensor(std::vector<Index> shape, cvec data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != count(shape_)) {
            throw std::invalid_argument("DenseTensor: entry count " + std::to_string(data_.size()) +
                                        " does not match shape product " + std::to_string(count(shape_)));
        }
    }

    const std::vector<Index>& shape() const noexcept { return shape_; }
    Index order() const noexcept { return static_cast<Index>(shape_.size()); }
    Index size() const noexcept { return data_.size(); }
    const cvec& data() const noexcept { return data_; }

    /// Linear position of a multi-index under the vec convention.
    Index linear(const std::vector<Index>& idx) const {
        if (idx.size() != shape_.size()) {
            throw std::invalid_argument("DenseTensor: index arity mismatch");
        }
        Index pos = 0;
        Index stride = 1;
        for (std::size_t d = 0; d < shape_.size(); ++d) {
            if (idx[d] < 0 || idx[d] >= shape_[d]) {
                throw std::out_of_range("DenseTensor: index out of range");
            }
            pos += idx[d] * stride;
            stride *= shape_[d];
        }
        return pos;
    }

    cplx& operator()(const std::vector<Index>& idx) { return data_(linear(idx)); }
    const cplx& operator()(const std::vector<Index>& idx) const { return data_(linear(idx)); }

    bool operator==(const DenseTensor& other) const {
        return shape_ == other.shape_ && data_ == other.data_;
    }

    static Index count(const std::vector<Index>& shape) {
        return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
    }

private:
    std::vector<Index> shape_;
    cvec data_;
};

inline cvec vec(const DenseTensor& t) { return t.data(); }

inline DenseTensor ten(const cvec& v, std::vector<Index> shape) {
    if (v.size() != DenseTensor::count(shape)) {
        throw std::invalid_argument("ten: vector length " + std::to_string(v.size()) +
                                    " does not match shape product " +
                                    std::to_string(DenseTensor::count(shape)));
    }
    return DenseTensor(std::move(shape), v);
}

inline cmat kron(const cmat& a, const cmat& b) {
    cmat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index ja = 0; ja < a.cols(); ++ja) {
        for (Index ia = 0; ia < a.rows(); ++ia) {
            out.block(ia * b.rows(), ja * b.cols(), b.rows(), b.cols()) = a(ia, ja) * b;
        }
    }
    return out;
}

/// Kronecker product of column vectors; same convention as kron().
inline cvec kron(const cvec& a, const cvec& b) {
    cvec out(a.size() * b.size());
    for (Index ia = 0; ia < a.size(); ++ia) {
        out.segment(ia * b.size(), b.size()) = a(ia) * b;
    }
    return out;
}

/// Row n of the result is kron(a.row(n), b.row(n)).
inline cmat khatri_rao_rows(const cmat& a, const cmat& b) {
    if (a.rows() != b.rows()) {
        throw std::invalid_argument("khatri_rao_rows: row count mismatch (" + std::to_string(a.rows()) +
                                    " vs " + std::to_string(b.rows()) + ")");
    }
    cmat out(a.rows(), a.cols() * b.cols());
    for (Index ja = 0; ja < a.cols(); ++ja) {
        for (Index jb = 0; jb < b.cols(); ++jb) {
            out.col(ja * b.cols() + jb) = a.col(ja).cwiseProduct(b.col(jb));
        }
    }
    return out;
}

inline void require_same_shape(const cmat& a, const cmat& b, const char* who) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument(std::string(who) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                                    std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                    std::to_string(b.cols()) + ")");
    }
}

inline cmat hadamard(const cmat& a, const cmat& b) {
    require_same_shape(a, b, "hadamard");
    return a.cwiseProduct(b);
}

/// True when every entry of `divisor` clears the division guard.
inline bool safe_divisor(const cmat& divisor, double guard = kDivisionGuard) {
    return divisor.size() == 0 || divisor.cwiseAbs().minCoeff() >= guard;
}

/// Element-wise quotient, or nullopt when a divisor entry is below the guard.
/// Callers rebuild the quantity from its definition on nullopt.
inline std::optional<cmat> hadamard_div(const cmat& a, const cmat& b, double guard = kDivisionGuard) {
    require_same_shape(a, b, "hadamard_div");
    if (!safe_divisor(b, guard)) {
        return std::nullopt;
    }
    return cmat(a.cwiseQuotient(b));
}

}  // namespace cpdfl
