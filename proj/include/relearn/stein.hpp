#pragma once

#include <functional>
#include <vector>

#include "relearn/failure.hpp"
#include "relearn/model.hpp"

namespace relearn {

enum class ParticleStage { state, action };

struct ParticleSet {
    int m = 0, dim = 0;
    std::vector<double> particles;  // m × dim, row-major
    std::vector<double> lo, hi;     // per-dimension support of the uniform prior
    ParticleStage stage = ParticleStage::state;
    std::vector<char> satisfied;    // per-particle detection-head flags

    double* row(int i) { return particles.data() + static_cast<size_t>(i) * dim; }
    const double* row(int i) const { return particles.data() + static_cast<size_t>(i) * dim; }
};

struct SteinConfig {
    int particles = 20;
    int iters_state = 200;
    int iters_action = 150;
    double lr = 0.01;
    double beta = 1.0;  // GBI temperature
    double bandwidth_floor = 1e-6;
    uint64_t seed = 0;
    int threads = 2;
    double init_jitter_pos = 0.10;  // m, state-particle warm start
    double init_jitter_yaw = 0.3;   // rad
    // uniform-prior support for object poses: the table-footprint span
    Vec3 workspace_lo = {-1.0, -0.45, 0.0};
    Vec3 workspace_hi = {1.0, 0.45, 1.5};
    double placement_margin = 0.18;  // pick_place destination margin
    bool kernel_enabled = true;  // false: independent per-particle ascent
    bool sequential = false;     // evaluate particles one at a time
};

// max(floor, med^2 / ln M) over pairwise Euclidean distances; floor for M < 2.
double median_bandwidth(const std::vector<double>& particles, int m, int dim, double floor);

// Per-particle gradient of log p at the particle's current position.
using GradLogP = std::function<std::vector<double>(int index, const double* x)>;

// Persistent-state SVGD driver (Adam moments survive across steps).
class SvgdRun {
public:
    SvgdRun(ParticleSet init, const SteinConfig& cfg);

    // One update: kernel-weighted attraction plus repulsion, Adam step, clamp.
    void step(const GradLogP& grad_logp);
    void run(int iters, const GradLogP& grad_logp,
             const std::function<void(int, const ParticleSet&)>& monitor = nullptr);

    const ParticleSet& set() const { return set_; }
    ParticleSet take() { return std::move(set_); }

private:
    ParticleSet set_;
    SteinConfig cfg_;
    std::vector<double> m_, v_;
    long t_ = 0;
};

struct StateInference {
    ParticleSet set;
    std::vector<int> movable_ids;      // cloud-order movable segment ids
    std::vector<Pose> reference_poses; // fitted poses at capture time
    double satisfaction_rate = 0.0;
    bool low_satisfaction_warning = false;
};

// Stage 1: particles over movable-object poses (x, y, yaw each) matching the
// failure relations through the detection head on the transformed cloud.
StateInference infer_states(const FailureEvent& failure, const SkillEffectModel& model,
                            const SteinConfig& cfg);

// Stage 2: action particles paired one-to-one with the state particles,
// ascending the gradient of ln(entropy objective); states stay fixed.
ParticleSet infer_actions(const StateInference& states, const FailureEvent& failure,
                          const SkillEffectModel& model, const SteinConfig& cfg);

// Support of the uniform action prior for a skill (same convention the
// sampling baseline draws from).
void action_bounds(const SkillInstance& skill, const SceneState& reference,
                   const SteinConfig& cfg, std::vector<double>& lo, std::vector<double>& hi);

// Poses for every segment of the reference scene with the movable ones
// overridden by a state particle (x, y, yaw; z kept from the reference).
std::vector<Pose> particle_poses(const SceneState& reference, const std::vector<int>& movable_ids,
                                 const double* particle);

}  // namespace relearn
