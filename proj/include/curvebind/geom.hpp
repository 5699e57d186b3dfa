#pragma once

#include <array>
#include <cmath>

namespace curvebind {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm2() const { return dot(*this); }
    double norm() const { return std::sqrt(norm2()); }
    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline double distance2(const Vec3& a, const Vec3& b) { return (a - b).norm2(); }
inline double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

// Rigid (orthogonal + translation) motion. R is row-major; orthogonality is
// the caller's responsibility. Used heavily by the equivariance tests.
struct RigidMotion {
    std::array<double, 9> rot = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    Vec3 shift;

    Vec3 apply(const Vec3& p) const {
        return {rot[0] * p.x + rot[1] * p.y + rot[2] * p.z + shift.x,
                rot[3] * p.x + rot[4] * p.y + rot[5] * p.z + shift.y,
                rot[6] * p.x + rot[7] * p.y + rot[8] * p.z + shift.z};
    }
};

} // namespace curvebind
