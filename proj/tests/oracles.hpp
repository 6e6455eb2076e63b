#pragma once

// Independent reference implementations used as test oracles. These
// deliberately recompute geometry through different code paths than the
// library (corner enumeration instead of closed-form extents, explicit
// branch logic for relations) so agreement is meaningful.

#include <algorithm>
#include <cmath>
#include <vector>

#include "relearn/scene.hpp"

namespace oracle {

using namespace relearn;

struct Box {
    double lo[3], hi[3];
};

inline Box bbox_by_corners(const SceneObject& obj) {
    Box out{{1e30, 1e30, 1e30}, {-1e30, -1e30, -1e30}};
    double c = std::cos(obj.pose.yaw), s = std::sin(obj.pose.yaw);
    for (const auto& slab : object_slabs(obj.spec)) {
        for (int dx = -1; dx <= 1; dx += 2)
            for (int dy = -1; dy <= 1; dy += 2)
                for (int dz = -1; dz <= 1; dz += 2) {
                    double lx = slab.center.x + dx * slab.half.x;
                    double ly = slab.center.y + dy * slab.half.y;
                    double lz = slab.center.z + dz * slab.half.z;
                    double wx = obj.pose.position.x + c * lx - s * ly;
                    double wy = obj.pose.position.y + s * lx + c * ly;
                    double wz = obj.pose.position.z + lz;
                    out.lo[0] = std::min(out.lo[0], wx);
                    out.lo[1] = std::min(out.lo[1], wy);
                    out.lo[2] = std::min(out.lo[2], wz);
                    out.hi[0] = std::max(out.hi[0], wx);
                    out.hi[1] = std::max(out.hi[1], wy);
                    out.hi[2] = std::max(out.hi[2], wz);
                }
    }
    return out;
}

inline double seg_dist_2d(double px, double py, double ax, double ay, double bx, double by) {
    double vx = bx - ax, vy = by - ay;
    double wx = px - ax, wy = py - ay;
    double vv = vx * vx + vy * vy;
    double t = vv > 0 ? std::clamp((wx * vx + wy * vy) / vv, 0.0, 1.0) : 0.0;
    double dx = wx - t * vx, dy = wy - t * vy;
    return std::sqrt(dx * dx + dy * dy);
}

inline RelationSet reference_relations(const SceneState& scene) {
    RelationSet out;
    size_t n = scene.objects.size();
    std::vector<Box> boxes(n);
    for (size_t i = 0; i < n; ++i) boxes[i] = bbox_by_corners(scene.objects[i]);

    for (size_t i = 0; i < n; ++i) {
        const auto& sp = scene.objects[i].spec;
        out.set(sp.id, UnaryRel::movable, sp.movable);
        bool drawer = sp.semantic_class == SemanticClass::drawer_unit;
        out.set(sp.id, UnaryRel::is_drawer, drawer);
        bool open = false;
        if (drawer && sp.joint_pos * 2.0 > sp.dims.x) open = true;
        out.set(sp.id, UnaryRel::open, open);
    }

    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            int a = scene.objects[i].spec.id, b = scene.objects[j].spec.id;
            const Box &ba = boxes[i], &bb = boxes[j];
            for (int r = 0; r < kNumBinary; ++r) out.set(a, b, static_cast<BinaryRel>(r), false);

            double ca[3], cb[3], diff[3], mag[3];
            for (int k = 0; k < 3; ++k) {
                ca[k] = (ba.lo[k] + ba.hi[k]) / 2;
                cb[k] = (bb.lo[k] + bb.hi[k]) / 2;
                diff[k] = ca[k] - cb[k];
                mag[k] = std::fabs(diff[k]);
            }
            int dominant = 0;
            for (int k = 1; k < 3; ++k)
                if (mag[k] > mag[dominant]) dominant = k;
            if (dominant == 0) {
                if (diff[0] < 0) out.set(a, b, BinaryRel::left, true);
                else out.set(a, b, BinaryRel::right, true);
            } else if (dominant == 1) {
                if (diff[1] < 0) out.set(a, b, BinaryRel::front, true);
                else out.set(a, b, BinaryRel::behind, true);
            } else {
                if (diff[2] > 0) out.set(a, b, BinaryRel::above, true);
                else out.set(a, b, BinaryRel::below, true);
            }

            double overlap[3], gap[3];
            for (int k = 0; k < 3; ++k) {
                overlap[k] = std::min(ba.hi[k], bb.hi[k]) - std::max(ba.lo[k], bb.lo[k]);
                gap[k] = -overlap[k];
            }
            if (overlap[2] <= kVerticalOverlapEps && overlap[0] > 0 && overlap[1] > 0) {
                if (diff[2] > 0) out.set(a, b, BinaryRel::above, true);
                else out.set(a, b, BinaryRel::below, true);
            }

            bool contact = false;
            for (int k = 0; k < 3 && !contact; ++k) {
                if (std::fabs(gap[k]) > kContactTolerance) continue;
                bool others = true;
                for (int m = 0; m < 3; ++m)
                    if (m != k && gap[m] >= 0) others = false;
                contact = others;
            }
            out.set(a, b, BinaryRel::in_contact, contact);

            bool a_in_b = true, b_in_a = true;
            for (int k = 0; k < 3; ++k) {
                if (ba.lo[k] < bb.lo[k] - 1e-9 || ba.hi[k] > bb.hi[k] + 1e-9) a_in_b = false;
                if (bb.lo[k] < ba.lo[k] - 1e-9 || bb.hi[k] > ba.hi[k] + 1e-9) b_in_a = false;
            }
            out.set(a, b, BinaryRel::inside, a_in_b && !b_in_a);

            if (out.get(a, b, BinaryRel::above) && bb.hi[0] - bb.lo[0] > kBottomEps &&
                bb.hi[1] - bb.lo[1] > kBottomEps) {
                double d = 1e30;
                double x0 = bb.lo[0], x1 = bb.hi[0], y0 = bb.lo[1], y1 = bb.hi[1];
                d = std::min(d, seg_dist_2d(ca[0], ca[1], x0, y0, x1, y0));
                d = std::min(d, seg_dist_2d(ca[0], ca[1], x1, y0, x1, y1));
                d = std::min(d, seg_dist_2d(ca[0], ca[1], x1, y1, x0, y1));
                d = std::min(d, seg_dist_2d(ca[0], ca[1], x0, y1, x0, y0));
                if (d < kBoundaryEps) out.set(a, b, BinaryRel::boundary, true);
            }
        }
    return out;
}

inline bool relations_equal(const RelationSet& x, const RelationSet& y) {
    return x.unary == y.unary && x.binary == y.binary;
}

// 1-D push chain: returns per-object displacement for boxes lying on a line,
// given near-face offsets from the pusher start and box lengths along the
// push direction (sorted by near face).
inline std::vector<double> push_chain_displacements(const std::vector<double>& near_face,
                                                    const std::vector<double>& length,
                                                    double distance) {
    std::vector<double> disp(near_face.size(), 0.0);
    double front = distance;  // pusher front relative to start
    for (size_t i = 0; i < near_face.size(); ++i) {
        if (near_face[i] < front) {
            disp[i] = front - near_face[i];
            front = near_face[i] + disp[i] + length[i];
        } else {
            break;
        }
    }
    return disp;
}

}  // namespace oracle
