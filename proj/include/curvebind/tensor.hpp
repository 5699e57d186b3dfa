#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "curvebind/errors.hpp"
#include "curvebind/geom.hpp"

namespace curvebind {

// Dense row-major matrix of doubles. Column vectors are n x 1, row vectors
// 1 x n, scalars 1 x 1. All model math runs in f64.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Tensor scalar(double v) {
        Tensor t(1, 1);
        t[0] = v;
        return t;
    }

    static Tensor from_vec3_rows(const std::vector<Vec3>& pts) {
        Tensor t(pts.size(), 3);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            t(i, 0) = pts[i].x;
            t(i, 1) = pts[i].y;
            t(i, 2) = pts[i].z;
        }
        return t;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    double& operator[](std::size_t k) { return data_[k]; }
    double operator[](std::size_t k) const { return data_[k]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    Vec3 row_vec3(std::size_t i) const { return {(*this)(i, 0), (*this)(i, 1), (*this)(i, 2)}; }

    bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    std::string shape_str() const {
        return "[" + std::to_string(rows_) + " x " + std::to_string(cols_) + "]";
    }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
}

// y += alpha * x
inline void axpy(Tensor& y, const Tensor& x, double alpha = 1.0) {
    check_same_shape(y, x, "axpy");
    for (std::size_t k = 0; k < y.size(); ++k) y[k] += alpha * x[k];
}

double max_abs_diff(const Tensor& a, const Tensor& b);

Tensor mat_mul(const Tensor& a, const Tensor& b);     // a * b
Tensor mat_mul_nt(const Tensor& a, const Tensor& b);  // a * b^T
Tensor mat_mul_tn(const Tensor& a, const Tensor& b);  // a^T * b

} // namespace curvebind
