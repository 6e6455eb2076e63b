#include "relearn/stein.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>

#include "relearn/parallel.hpp"
#include "relearn/rng.hpp"

namespace relearn {

double median_bandwidth(const std::vector<double>& particles, int m, int dim, double floor) {
    if (m < 2) return floor;
    std::vector<double> dists;
    dists.reserve(static_cast<size_t>(m) * (m - 1) / 2);
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j) {
            double acc = 0.0;
            const double* a = particles.data() + static_cast<size_t>(i) * dim;
            const double* b = particles.data() + static_cast<size_t>(j) * dim;
            for (int d = 0; d < dim; ++d) acc += (a[d] - b[d]) * (a[d] - b[d]);
            dists.push_back(std::sqrt(acc));
        }
    std::sort(dists.begin(), dists.end());
    size_t n = dists.size();
    double med = n % 2 == 1 ? dists[n / 2] : 0.5 * (dists[n / 2 - 1] + dists[n / 2]);
    return std::max(floor, med * med / std::log(static_cast<double>(m)));
}

SvgdRun::SvgdRun(ParticleSet init, const SteinConfig& cfg) : set_(std::move(init)), cfg_(cfg) {
    size_t n = set_.particles.size();
    m_.assign(n, 0.0);
    v_.assign(n, 0.0);
    if (set_.m < 1) throw std::runtime_error("svgd: need at least one particle");
}

void SvgdRun::step(const GradLogP& grad_logp) {
    int m = set_.m, dim = set_.dim;
    std::vector<std::vector<double>> grads(m);
    auto eval = [&](int i) {
        grads[i] = grad_logp(i, set_.row(i));
        for (double g : grads[i])
            if (!std::isfinite(g))
                throw std::runtime_error("svgd: non-finite gradient at particle " +
                                         std::to_string(i));
    };
    if (cfg_.sequential) {
        for (int i = 0; i < m; ++i) eval(i);
    } else {
        parallel_for(m, cfg_.threads, eval);
    }

    std::vector<double> phi(static_cast<size_t>(m) * dim, 0.0);
    if (cfg_.kernel_enabled && m > 1) {
        double h = median_bandwidth(set_.particles, m, dim, cfg_.bandwidth_floor);
        for (int i = 0; i < m; ++i) {
            double* phi_i = phi.data() + static_cast<size_t>(i) * dim;
            const double* xi = set_.row(i);
            for (int j = 0; j < m; ++j) {
                const double* xj = set_.row(j);
                double sq = 0.0;
                for (int d = 0; d < dim; ++d) sq += (xj[d] - xi[d]) * (xj[d] - xi[d]);
                double k = std::exp(-sq / h);
                for (int d = 0; d < dim; ++d)
                    phi_i[d] += k * cfg_.beta * grads[j][d] - (2.0 / h) * (xj[d] - xi[d]) * k;
            }
            for (int d = 0; d < dim; ++d) phi_i[d] /= m;
        }
    } else {
        for (int i = 0; i < m; ++i)
            for (int d = 0; d < dim; ++d)
                phi[static_cast<size_t>(i) * dim + d] = cfg_.beta * grads[i][d];
    }

    ++t_;
    double bc1 = 1.0 - std::pow(0.9, t_), bc2 = 1.0 - std::pow(0.999, t_);
    for (size_t i = 0; i < phi.size(); ++i) {
        m_[i] = 0.9 * m_[i] + 0.1 * phi[i];
        v_[i] = 0.999 * v_[i] + 0.001 * phi[i] * phi[i];
        set_.particles[i] += cfg_.lr * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + 1e-8);
    }
    for (int i = 0; i < m; ++i) {
        double* x = set_.row(i);
        for (int d = 0; d < dim; ++d) x[d] = std::clamp(x[d], set_.lo[d], set_.hi[d]);
    }
}

void SvgdRun::run(int iters, const GradLogP& grad_logp,
                  const std::function<void(int, const ParticleSet&)>& monitor) {
    for (int it = 0; it < iters; ++it) {
        step(grad_logp);
        if (monitor) monitor(it, set_);
    }
}

std::vector<Pose> particle_poses(const SceneState& reference, const std::vector<int>& movable_ids,
                                 const double* particle) {
    std::vector<Pose> poses;
    poses.reserve(reference.objects.size());
    for (const auto& obj : reference.objects) {
        Pose p = obj.pose;
        auto it = std::find(movable_ids.begin(), movable_ids.end(), obj.spec.id);
        if (it != movable_ids.end()) {
            size_t k = it - movable_ids.begin();
            p.position.x = particle[k * 3];
            p.position.y = particle[k * 3 + 1];
            p.yaw = particle[k * 3 + 2];
        }
        poses.push_back(p);
    }
    return poses;
}

StateInference infer_states(const FailureEvent& failure, const SkillEffectModel& model,
                            const SteinConfig& cfg) {
    StateInference out;
    const SceneState& ref = failure.reference_scene;
    for (const auto& seg : failure.pre_cloud.segments) {
        const SceneObject* obj = ref.find(seg.segment_id);
        if (obj == nullptr)
            throw std::runtime_error("infer_states: reference scene misses a segment");
        if (obj->spec.movable) {
            out.movable_ids.push_back(seg.segment_id);
            out.reference_poses.push_back(obj->pose);
        }
    }
    int n_mov = static_cast<int>(out.movable_ids.size());
    if (n_mov == 0) throw std::runtime_error("infer_states: no movable segments");

    ParticleSet set;
    set.m = cfg.particles;
    set.dim = n_mov * 3;
    set.stage = ParticleStage::state;
    set.lo.resize(set.dim);
    set.hi.resize(set.dim);
    for (int k = 0; k < n_mov; ++k) {
        set.lo[k * 3] = cfg.workspace_lo.x;
        set.hi[k * 3] = cfg.workspace_hi.x;
        set.lo[k * 3 + 1] = cfg.workspace_lo.y;
        set.hi[k * 3 + 1] = cfg.workspace_hi.y;
        set.lo[k * 3 + 2] = -M_PI;
        set.hi[k * 3 + 2] = M_PI;
    }
    set.particles.resize(static_cast<size_t>(set.m) * set.dim);
    Rng rng = Rng(cfg.seed).split(17);
    for (int i = 0; i < set.m; ++i) {
        Rng pr = rng.split(i);
        double* x = set.row(i);
        for (int k = 0; k < n_mov; ++k) {
            const Pose& p = out.reference_poses[k];
            x[k * 3] = std::clamp(p.position.x + pr.uniform(-cfg.init_jitter_pos, cfg.init_jitter_pos),
                                  set.lo[k * 3], set.hi[k * 3]);
            x[k * 3 + 1] =
                std::clamp(p.position.y + pr.uniform(-cfg.init_jitter_pos, cfg.init_jitter_pos),
                           set.lo[k * 3 + 1], set.hi[k * 3 + 1]);
            x[k * 3 + 2] =
                std::clamp(p.yaw + pr.uniform(-cfg.init_jitter_yaw, cfg.init_jitter_yaw),
                           set.lo[k * 3 + 2], set.hi[k * 3 + 2]);
        }
    }

    std::vector<RelSlot> slots = slots_with_values(failure.tracked, failure.pre_relations);
    auto grad = [&](int, const double* x) {
        std::vector<double> params(x, x + set.dim);
        InputGradients ig = model.pose_log_prob_gradients(
            failure.pre_cloud, out.movable_ids, out.reference_poses, params, slots);
        return ig.pose_grad;
    };
    SvgdRun run(std::move(set), cfg);
    run.run(cfg.iters_state, grad);
    out.set = run.take();

    out.set.satisfied.assign(out.set.m, 0);
    int sat = 0;
    for (int i = 0; i < out.set.m; ++i) {
        std::vector<double> params(out.set.row(i), out.set.row(i) + out.set.dim);
        InputGradients ig = model.pose_log_prob_gradients(
            failure.pre_cloud, out.movable_ids, out.reference_poses, params, slots);
        out.set.satisfied[i] = ig.satisfied ? 1 : 0;
        sat += ig.satisfied ? 1 : 0;
    }
    out.satisfaction_rate = out.set.m > 0 ? static_cast<double>(sat) / out.set.m : 0.0;
    out.low_satisfaction_warning = out.satisfaction_rate < 0.5;
    return out;
}

void action_bounds(const SkillInstance& skill, const SceneState& reference,
                   const SteinConfig& cfg, std::vector<double>& lo, std::vector<double>& hi) {
    lo.clear();
    hi.clear();
    const SceneObject* target = reference.find(skill.target_object);
    switch (skill.primitive) {
        case Primitive::pick_place: {
            double tx = target ? target->pose.position.x : 0.0;
            double ty = target ? target->pose.position.y : 0.0;
            double m = cfg.placement_margin;
            lo = {cfg.workspace_lo.x + m - tx, cfg.workspace_lo.y + m - ty, 0.0, -M_PI / 2};
            hi = {cfg.workspace_hi.x - m - tx, cfg.workspace_hi.y - m - ty, 0.0, M_PI / 2};
            break;
        }
        case Primitive::push:
            lo = {-1.0, -1.0, 0.0};
            hi = {1.0, 1.0, 0.3};
            break;
        case Primitive::open_drawer:
        case Primitive::close_drawer: {
            double depth = target ? target->spec.dims.x : 0.4;
            lo = {-depth};
            hi = {depth};
            break;
        }
    }
}

ParticleSet infer_actions(const StateInference& states, const FailureEvent& failure,
                          const SkillEffectModel& model, const SteinConfig& cfg) {
    const ParticleSet& s = states.set;
    ParticleSet set;
    set.m = s.m;
    set.stage = ParticleStage::action;
    action_bounds(failure.skill, failure.reference_scene, cfg, set.lo, set.hi);
    set.dim = static_cast<int>(set.lo.size());
    set.particles.resize(static_cast<size_t>(set.m) * set.dim);
    Rng rng = Rng(cfg.seed).split(29);
    for (int i = 0; i < set.m; ++i) {
        Rng pr = rng.split(i);
        double* a = set.row(i);
        for (int d = 0; d < set.dim; ++d) a[d] = pr.uniform(set.lo[d], set.hi[d]);
    }

    // States are fixed: transform the failure cloud once per particle.
    std::vector<SegmentedCloud> clouds(s.m);
    for (int i = 0; i < s.m; ++i) {
        auto poses = particle_poses(failure.reference_scene, states.movable_ids, s.row(i));
        clouds[i] = transform_cloud(failure.pre_cloud, failure.reference_scene, poses);
    }

    auto grad = [&](int i, const double* a) {
        std::vector<double> params(a, a + set.dim);
        SkillInstance skill = failure.skill;
        skill.params = params;
        InputGradients ig =
            model.action_entropy_gradients(clouds[i], skill, params, failure.tracked);
        std::vector<double> g(set.dim, 0.0);
        if (ig.objective >= 1e-12) {
            for (int d = 0; d < set.dim; ++d) g[d] = ig.action_grad[d] / ig.objective;
        }
        return g;  // gradient of ln(entropy objective); zero on the plateau
    };
    SvgdRun run(std::move(set), cfg);
    run.run(cfg.iters_action, grad);
    ParticleSet out = run.take();
    out.satisfied = s.satisfied;
    return out;
}

}  // namespace relearn
