#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

namespace relearn {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

inline Vec3 rot_z(double yaw, const Vec3& v) {
    double c = std::cos(yaw), s = std::sin(yaw);
    return {c * v.x - s * v.y, s * v.x + c * v.y, v.z};
}

inline double normalize_yaw(double yaw) {
    yaw = std::fmod(yaw, 2.0 * M_PI);
    if (yaw <= -M_PI) yaw += 2.0 * M_PI;
    if (yaw > M_PI) yaw -= 2.0 * M_PI;
    return yaw;
}

// Axis-aligned box, world frame.
struct Aabb {
    Vec3 lo, hi;

    double extent(int axis) const {
        return axis == 0 ? hi.x - lo.x : axis == 1 ? hi.y - lo.y : hi.z - lo.z;
    }
    Vec3 center() const { return {(lo.x + hi.x) / 2, (lo.y + hi.y) / 2, (lo.z + hi.z) / 2}; }
    double volume() const { return extent(0) * extent(1) * extent(2); }

    // Positive when separated along the axis, negative overlap depth otherwise.
    double gap(const Aabb& o, int axis) const {
        double alo = axis == 0 ? lo.x : axis == 1 ? lo.y : lo.z;
        double ahi = axis == 0 ? hi.x : axis == 1 ? hi.y : hi.z;
        double blo = axis == 0 ? o.lo.x : axis == 1 ? o.lo.y : o.lo.z;
        double bhi = axis == 0 ? o.hi.x : axis == 1 ? o.hi.y : o.hi.z;
        return std::max(alo - bhi, blo - ahi);
    }

    // Closed comparisons with a settling-round-off tolerance.
    bool contains(const Aabb& o, double eps = 1e-9) const {
        return o.lo.x >= lo.x - eps && o.hi.x <= hi.x + eps && o.lo.y >= lo.y - eps &&
               o.hi.y <= hi.y + eps && o.lo.z >= lo.z - eps && o.hi.z <= hi.z + eps;
    }

    bool contains_xy(double px, double py) const {
        return px >= lo.x && px <= hi.x && py >= lo.y && py <= hi.y;
    }

    bool overlaps(const Aabb& o) const {
        return gap(o, 0) < 0 && gap(o, 1) < 0 && gap(o, 2) < 0;
    }

    Aabb united(const Aabb& o) const {
        return {{std::min(lo.x, o.lo.x), std::min(lo.y, o.lo.y), std::min(lo.z, o.lo.z)},
                {std::max(hi.x, o.hi.x), std::max(hi.y, o.hi.y), std::max(hi.z, o.hi.z)}};
    }
};

// Box centered at `center` with half-extents `half`, yawed about its own
// vertical axis. Used for object slabs before conversion to world AABBs.
struct Slab {
    Vec3 center;  // local offset from object center
    Vec3 half;
};

inline Aabb slab_world_aabb(const Slab& s, const Vec3& obj_pos, double yaw) {
    Vec3 c = obj_pos + rot_z(yaw, s.center);
    double cy = std::cos(yaw), sy = std::sin(yaw);
    double ex = std::abs(cy) * s.half.x + std::abs(sy) * s.half.y;
    double ey = std::abs(sy) * s.half.x + std::abs(cy) * s.half.y;
    return {{c.x - ex, c.y - ey, c.z - s.half.z}, {c.x + ex, c.y + ey, c.z + s.half.z}};
}

// |signed distance| from a point (local slab frame) to the slab surface.
inline double slab_surface_distance(const Slab& s, const Vec3& local) {
    double qx = std::abs(local.x - s.center.x) - s.half.x;
    double qy = std::abs(local.y - s.center.y) - s.half.y;
    double qz = std::abs(local.z - s.center.z) - s.half.z;
    double ox = std::max(qx, 0.0), oy = std::max(qy, 0.0), oz = std::max(qz, 0.0);
    double outside = std::sqrt(ox * ox + oy * oy + oz * oz);
    double inside = std::min(std::max(qx, std::max(qy, qz)), 0.0);
    return std::abs(outside + inside);
}

}  // namespace relearn
