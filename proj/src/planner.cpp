#include "relearn/planner.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "relearn/real2sim.hpp"
#include "relearn/rng.hpp"

namespace relearn {

namespace {

Vec3 segment_bbox_center(const Segment& seg) {
    Vec3 lo{1e30, 1e30, 1e30}, hi{-1e30, -1e30, -1e30};
    for (const auto& p : seg.points) {
        lo.x = std::min(lo.x, p.x);
        lo.y = std::min(lo.y, p.y);
        lo.z = std::min(lo.z, p.z);
        hi.x = std::max(hi.x, p.x);
        hi.y = std::max(hi.y, p.y);
        hi.z = std::max(hi.z, p.z);
    }
    return {(lo.x + hi.x) / 2, (lo.y + hi.y) / 2, (lo.z + hi.z) / 2};
}

void step_param_bounds(const SkeletonStep& step, const SegmentedCloud& cloud,
                       const PlannerConfig& cfg, std::vector<double>& lo,
                       std::vector<double>& hi) {
    switch (step.primitive) {
        case Primitive::pick_place: {
            const Segment* seg = cloud.find(step.target);
            Vec3 c = seg ? segment_bbox_center(*seg) : Vec3{0, 0, 0};
            double m = cfg.placement_margin;
            lo = {cfg.workspace_lo.x + m - c.x, cfg.workspace_lo.y + m - c.y, 0.0, -M_PI / 2};
            hi = {cfg.workspace_hi.x - m - c.x, cfg.workspace_hi.y - m - c.y, 0.0, M_PI / 2};
            break;
        }
        case Primitive::push:
            lo = {-1.0, -1.0, 0.0};
            hi = {1.0, 1.0, cfg.push_max_distance};
            break;
        case Primitive::open_drawer:
        case Primitive::close_drawer:
            lo = {-0.4};
            hi = {0.4};
            break;
    }
}

SkillInstance make_skill(const SkeletonStep& step, const std::vector<double>& params) {
    SkillInstance s;
    s.primitive = step.primitive;
    s.target_object = step.target;
    s.params = params;
    if (step.primitive == Primitive::push) {
        double n = std::sqrt(s.params[0] * s.params[0] + s.params[1] * s.params[1]);
        if (n < 1e-9) {
            s.params[0] = 1.0;
            s.params[1] = 0.0;
        } else {
            s.params[0] /= n;
            s.params[1] /= n;
        }
    }
    return s;
}

}  // namespace

bool goal_satisfied(const Goal& goal, const RelationSet& rels) {
    for (const auto& g : goal.conjuncts) {
        bool truth = g.is_unary ? rels.get(g.a, static_cast<UnaryRel>(g.rel))
                                : rels.get(g.a, g.b, static_cast<BinaryRel>(g.rel));
        if (truth != g.value) return false;
    }
    return true;
}

std::vector<RelSlot> tracked_slots(const Goal& goal, const std::vector<int>& segment_ids,
                                   int target) {
    std::vector<RelSlot> out = goal.conjuncts;
    auto push_unique = [&](const RelSlot& slot) {
        if (std::find(out.begin(), out.end(), slot) == out.end()) out.push_back(slot);
    };
    for (int r = 0; r < kNumUnary; ++r)
        push_unique(RelSlot::unary(target, static_cast<UnaryRel>(r), false));
    for (int id : segment_ids) {
        if (id == target) continue;
        for (int r = 0; r < kNumBinary; ++r) {
            push_unique(RelSlot::binary(target, id, static_cast<BinaryRel>(r), false));
            push_unique(RelSlot::binary(id, target, static_cast<BinaryRel>(r), false));
        }
    }
    return out;
}

ShootingResult shooting_plan(const SkillEffectModel& model, const SegmentedCloud& cloud,
                             const std::vector<SkeletonStep>& skeleton, const Goal& goal,
                             const PlannerConfig& cfg) {
    if (skeleton.empty()) throw std::runtime_error("shooting_plan: empty skeleton");
    if (cfg.ka < 1) throw std::runtime_error("shooting_plan: ka must be >= 1");

    std::vector<int> ids;
    for (const auto& seg : cloud.segments) ids.push_back(seg.segment_id);
    std::vector<double> latent = model.encode(cloud);

    std::vector<std::vector<double>> lo(skeleton.size()), hi(skeleton.size());
    for (size_t s = 0; s < skeleton.size(); ++s)
        step_param_bounds(skeleton[s], cloud, cfg, lo[s], hi[s]);

    Rng rng(cfg.seed);
    ShootingResult best;
    best.goal_probability = -1.0;
    for (int j = 0; j < cfg.ka; ++j) {
        std::vector<std::vector<double>> params(skeleton.size());
        std::vector<SkillInstance> skills;
        for (size_t s = 0; s < skeleton.size(); ++s) {
            params[s].resize(lo[s].size());
            for (size_t d = 0; d < lo[s].size(); ++d)
                params[s][d] = rng.uniform(lo[s][d], hi[s][d]);
            skills.push_back(make_skill(skeleton[s], params[s]));
        }
        Prediction pred = model.predict_from_latent(latent, ids, skills);
        double prob = 1.0;
        int last = static_cast<int>(skeleton.size()) - 1;
        for (const auto& g : goal.conjuncts) {
            double p = pred.prob_of(last, g);
            prob *= g.value ? p : 1.0 - p;
        }
        if (prob > best.goal_probability) {
            best.goal_probability = prob;
            best.params = params;
            best.prediction = std::move(pred);
        }
    }
    return best;
}

EpisodeResult run_episode(const SkillEffectModel& model, const SceneState& world,
                          const std::vector<SkeletonStep>& skeleton, const Goal& goal,
                          const EpisodeConfig& cfg) {
    EpisodeResult result;
    SceneState state = settle(world);
    Rng rng(cfg.seed);
    int budget = cfg.replanning ? cfg.replan_budget : 0;
    int plan_round = 0;

    bool done = false;
    while (!done) {
        SegmentedCloud cloud =
            render_cloud(state, cfg.n_points, cfg.noise_sigma, rng.split(100 + plan_round));
        if (skeleton.empty()) break;
        PlannerConfig pc = cfg.planner;
        pc.seed = Rng(cfg.seed).split(500 + plan_round).next_u64();
        ShootingResult plan = shooting_plan(model, cloud, skeleton, goal, pc);
        ++plan_round;

        bool mismatch_hit = false;
        for (size_t s = 0; s < skeleton.size(); ++s) {
            SkillInstance skill = make_skill(skeleton[s], plan.params[s]);
            SegmentedCloud pre_cloud = cloud;
            Prediction pre_detect = model.predict(pre_cloud, {});
            RelationSet pre_detected = pre_detect.step_relations(-1);

            ExecResult ex = execute_skill(state, skill);
            state = ex.state;
            ++result.steps_executed;

            cloud = render_cloud(state, cfg.n_points, cfg.noise_sigma,
                                 rng.split(1000 + result.steps_executed));
            Prediction post_detect = model.predict(cloud, {});
            RelationSet detected = post_detect.step_relations(-1);
            RelationSet predicted = plan.prediction.step_relations(static_cast<int>(s));

            std::vector<int> ids;
            for (const auto& seg : cloud.segments) ids.push_back(seg.segment_id);
            std::vector<RelSlot> tracked = tracked_slots(goal, ids, skill.target_object);
            std::vector<RelSlot> mismatch = detect_failure(predicted, detected, tracked);

            EpisodeStepTrace tr;
            tr.step = result.steps_executed - 1;
            tr.skill = skill;
            tr.predicted = slots_with_values(tracked, predicted);
            tr.observed = slots_with_values(tracked, detected);
            tr.mismatches = static_cast<int>(mismatch.size());
            tr.replanned = !mismatch.empty() && budget > 0;
            result.trace.push_back(tr);

            if (!mismatch.empty()) {
                if (budget > 0) {
                    --budget;
                    ++result.replans;
                    mismatch_hit = true;
                    break;  // replan from the current observation
                }
                result.failure_emitted = true;
                result.failure.pre_cloud = pre_cloud;
                result.failure.pre_relations = pre_detected;
                result.failure.skill = skill;
                result.failure.post_relations_observed = detected;
                result.failure.predicted_relations = predicted;
                result.failure.tracked = tracked;
                result.failure.reference_scene = fit_scene_from_cloud(pre_cloud);
                result.failure.step_index = result.steps_executed - 1;
                result.failure.seed = cfg.seed;
                result.final_state = state;
                return result;
            }
        }
        if (!mismatch_hit) done = true;
    }
    result.final_state = state;
    result.success = goal_satisfied(goal, detect_relations_geometric(state));
    return result;
}

}  // namespace relearn
