#include "relearn/real2sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace relearn {

namespace {

// Horizontal footprint area of the axis-aligned box enclosing the points
// rotated by -yaw.
double footprint_area(const std::vector<Vec3>& pts, double yaw, double* out_cx = nullptr,
                      double* out_cy = nullptr, double* out_dx = nullptr,
                      double* out_dy = nullptr) {
    double c = std::cos(-yaw), s = std::sin(-yaw);
    double lox = 1e30, hix = -1e30, loy = 1e30, hiy = -1e30;
    for (const auto& p : pts) {
        double x = c * p.x - s * p.y;
        double y = s * p.x + c * p.y;
        lox = std::min(lox, x);
        hix = std::max(hix, x);
        loy = std::min(loy, y);
        hiy = std::max(hiy, y);
    }
    if (out_cx) {
        // rotate the local center back to world coordinates
        double cx = (lox + hix) / 2, cy = (loy + hiy) / 2;
        double cw = std::cos(yaw), sw = std::sin(yaw);
        *out_cx = cw * cx - sw * cy;
        *out_cy = sw * cx + cw * cy;
        *out_dx = hix - lox;
        *out_dy = hiy - loy;
    }
    return (hix - lox) * (hiy - loy);
}

}  // namespace

SceneState fit_scene_from_cloud(const SegmentedCloud& cloud) {
    SceneState scene;
    for (const auto& seg : cloud.segments) {
        if (seg.points.size() < 8) throw std::runtime_error("degenerate-segment");
        // coarse 36-angle scan over [0, pi/2), then local refinement
        double best_yaw = 0.0, best_area = std::numeric_limits<double>::infinity();
        for (int k = 0; k < 36; ++k) {
            double yaw = k * (M_PI / 2) / 36;
            double a = footprint_area(seg.points, yaw);
            if (a < best_area) {
                best_area = a;
                best_yaw = yaw;
            }
        }
        double window = (M_PI / 2) / 36;
        for (int round = 0; round < 5; ++round) {
            double lo = best_yaw - window, hi = best_yaw + window;
            for (int k = 0; k <= 8; ++k) {
                double yaw = lo + (hi - lo) * k / 8.0;
                double a = footprint_area(seg.points, yaw);
                if (a < best_area) {
                    best_area = a;
                    best_yaw = yaw;
                }
            }
            window /= 4.0;
        }

        double cx, cy, dx, dy;
        footprint_area(seg.points, best_yaw, &cx, &cy, &dx, &dy);
        double loz = 1e30, hiz = -1e30;
        for (const auto& p : seg.points) {
            loz = std::min(loz, p.z);
            hiz = std::max(hiz, p.z);
        }

        SceneObject obj;
        obj.spec.id = seg.segment_id;
        obj.spec.semantic_class = seg.semantic_class;
        obj.spec.dims = {dx, dy, hiz - loz};
        obj.spec.movable = seg.semantic_class != SemanticClass::table &&
                           seg.semantic_class != SemanticClass::shelf;
        obj.pose.position = {cx, cy, (loz + hiz) / 2};
        obj.pose.yaw = normalize_yaw(best_yaw);
        scene.objects.push_back(obj);
    }
    for (const auto& o : scene.objects)
        scene.support_of[o.spec.id] = o.spec.movable ? derive_support(scene, o.spec.id) : kGround;
    return settle(scene);
}

SynthesisResult synthesize_dataset(const StateInference& states, const ParticleSet& actions,
                                   const FailureEvent& failure, const RenderConfig& render) {
    if (states.set.m != actions.m)
        throw std::runtime_error("synthesize_dataset: particle sets not paired");
    SceneState base = failure.reference_scene.objects.empty()
                          ? fit_scene_from_cloud(failure.pre_cloud)
                          : failure.reference_scene;
    SynthesisResult out;
    Rng rng(render.seed);
    for (int i = 0; i < states.set.m; ++i) {
        SceneState scene = base;
        const double* x = states.set.row(i);
        for (size_t k = 0; k < states.movable_ids.size(); ++k) {
            SceneObject* obj = scene.find(states.movable_ids[k]);
            obj->pose.position.x = x[k * 3];
            obj->pose.position.y = x[k * 3 + 1];
            obj->pose.yaw = normalize_yaw(x[k * 3 + 2]);
        }
        for (size_t k = 0; k < states.movable_ids.size(); ++k)
            scene.support_of[states.movable_ids[k]] =
                derive_support(scene, states.movable_ids[k]);
        scene = settle(scene);

        SkillInstance skill = failure.skill;
        skill.params.assign(actions.row(i), actions.row(i) + actions.dim);
        ExecResult ex = execute_skill(scene, skill);

        Rng rec_rng = rng.split(i);
        TransitionRecord rec;
        rec.pre_state = scene;
        rec.post_state = ex.state;
        rec.skill = skill;
        rec.collision = ex.collision;
        rec.pre_cloud =
            render_cloud(scene, render.n_points_per_segment, render.noise_sigma, rec_rng.split(0));
        rec.post_cloud = render_cloud(ex.state, render.n_points_per_segment, render.noise_sigma,
                                      rec_rng.split(1));
        rec.pre_relations = detect_relations_geometric(scene);
        rec.post_relations = detect_relations_geometric(ex.state);
        out.records.push_back(std::move(rec));
        out.particle_index.push_back(i);
        out.state_satisfied.push_back(i < static_cast<int>(states.set.satisfied.size())
                                          ? states.set.satisfied[i]
                                          : 0);
        out.collision.push_back(ex.collision ? 1 : 0);
    }
    return out;
}

}  // namespace relearn
