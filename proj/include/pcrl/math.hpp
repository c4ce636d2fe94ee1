#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace pcrl {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec3i = Eigen::Vector3i;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kSpeedOfLight = 299'792'458.0;

constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Angle between two (not necessarily unit) vectors in radians, robust near 0 and pi.
inline double angle_between(const Vec3& a, const Vec3& b)
{
    return std::atan2(a.cross(b).norm(), a.dot(b));
}

inline bool is_finite(const Vec3& v)
{
    return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

/// Right-handed orthonormal tangent pair {u, v} with u x v = n (Duff et al. 2017).
inline void orthonormal_basis(const Vec3& n, Vec3& u, Vec3& v)
{
    const double sign = std::copysign(1.0, n.z());
    const double a = -1.0 / (sign + n.z());
    const double b = n.x() * n.y() * a;
    u = Vec3(1.0 + sign * n.x() * n.x() * a, sign * b, -sign * n.x());
    v = Vec3(b, sign + n.y() * n.y() * a, -n.y());
}

struct Aabb {
    Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

    bool empty() const { return (max.array() < min.array()).any(); }
    void expand(const Vec3& p)
    {
        min = min.cwiseMin(p);
        max = max.cwiseMax(p);
    }
    void expand(const Aabb& b)
    {
        min = min.cwiseMin(b.min);
        max = max.cwiseMax(b.max);
    }
    bool contains(const Vec3& p, double tol = 0.0) const
    {
        return (p.array() >= min.array() - tol).all() && (p.array() <= max.array() + tol).all();
    }
    Vec3 center() const { return 0.5 * (min + max); }
    Vec3 extent() const { return max - min; }
    double diagonal() const { return empty() ? 0.0 : (max - min).norm(); }
};

/// Slab test. On hit, [t_enter, t_exit] is clipped to [t_min, t_max].
inline bool ray_aabb(const Vec3& origin, const Vec3& dir, const Aabb& box, double t_min, double t_max,
                     double& t_enter, double& t_exit)
{
    double lo = t_min;
    double hi = t_max;
    for (int axis = 0; axis < 3; ++axis) {
        const double d = dir[axis];
        const double o = origin[axis];
        if (std::abs(d) < 1e-300) {
            if (o < box.min[axis] || o > box.max[axis])
                return false;
            continue;
        }
        const double inv = 1.0 / d;
        double t0 = (box.min[axis] - o) * inv;
        double t1 = (box.max[axis] - o) * inv;
        if (t0 > t1)
            std::swap(t0, t1);
        lo = std::max(lo, t0);
        hi = std::min(hi, t1);
        if (lo > hi)
            return false;
    }
    t_enter = lo;
    t_exit = hi;
    return true;
}

} // namespace pcrl
