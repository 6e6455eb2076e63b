#pragma once

#include <vector>

#include "relearn/failure.hpp"
#include "relearn/model.hpp"
#include "relearn/scene.hpp"
#include "relearn/simkin.hpp"

namespace relearn {

struct Goal {
    std::vector<RelSlot> conjuncts;  // desired truth in RelSlot::value
};

struct SkeletonStep {
    Primitive primitive = Primitive::pick_place;
    int target = 0;
};

struct PlannerConfig {
    int ka = 128;  // shooting sample count
    // feasible placement region: the bounding box of the table footprints,
    // shrunk by a margin so a carried object stays inside it
    Vec3 workspace_lo = {-1.0, -0.45, 0.0};
    Vec3 workspace_hi = {1.0, 0.45, 1.5};
    double placement_margin = 0.18;
    double push_max_distance = 0.3;
    uint64_t seed = 0;
};

struct ShootingResult {
    std::vector<std::vector<double>> params;  // winning sample, one vector per step
    double goal_probability = 0.0;
    Prediction prediction;  // rollout of the winning sample
};

ShootingResult shooting_plan(const SkillEffectModel& model, const SegmentedCloud& cloud,
                             const std::vector<SkeletonStep>& skeleton, const Goal& goal,
                             const PlannerConfig& cfg);

struct EpisodeConfig {
    PlannerConfig planner;
    bool replanning = false;
    int replan_budget = 3;
    int n_points = 64;
    double noise_sigma = 0.0;
    uint64_t seed = 0;
};

struct EpisodeStepTrace {
    int step = 0;
    SkillInstance skill;
    std::vector<RelSlot> predicted;  // tracked subset, values = predicted truth
    std::vector<RelSlot> observed;
    int mismatches = 0;
    bool replanned = false;
};

struct EpisodeResult {
    bool success = false;
    bool failure_emitted = false;
    FailureEvent failure;  // populated when a failure is emitted
    int steps_executed = 0;
    int replans = 0;
    SceneState final_state;
    std::vector<EpisodeStepTrace> trace;
};

// Closed loop: plan with shooting, execute one skill in the kinematic world,
// detect relations with the model head, compare against the plan's prediction
// on the tracked subset (goal conjuncts plus relations touching the step's
// target). On mismatch, either emit a FailureEvent or replan up to the budget.
// Success verdicts always come from the geometric oracle on the final state.
EpisodeResult run_episode(const SkillEffectModel& model, const SceneState& world,
                          const std::vector<SkeletonStep>& skeleton, const Goal& goal,
                          const EpisodeConfig& cfg);

// Tracked slot keys for one skill step: goal conjuncts plus every relation
// touching the target object, over the given segment ids.
std::vector<RelSlot> tracked_slots(const Goal& goal, const std::vector<int>& segment_ids,
                                   int target);

bool goal_satisfied(const Goal& goal, const RelationSet& rels);

}  // namespace relearn
