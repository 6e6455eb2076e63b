#pragma once

#include <vector>

#include "relearn/failure.hpp"
#include "relearn/scene.hpp"
#include "relearn/simkin.hpp"
#include "relearn/stein.hpp"

namespace relearn {

// Shape-prior reconstruction: per segment, a minimum-footprint bounding box
// searched over 36 coarse yaw angles in [0, pi/2) and then locally refined;
// dims from box extents, class from the segment semantics. The scene is
// settled and support/containment derived.
SceneState fit_scene_from_cloud(const SegmentedCloud& cloud);

struct SynthesisResult {
    std::vector<TransitionRecord> records;  // D+
    std::vector<int> particle_index;
    std::vector<char> state_satisfied;      // detection-head flag per record
    std::vector<char> collision;            // skill collision flags
};

struct RenderConfig {
    int n_points_per_segment = 64;
    double noise_sigma = 0.0;
    uint64_t seed = 0;
};

// Builds one transition per particle pair: reference scene with poses
// overridden by the state particle, settled, rendered, the failure skill
// executed with the action particle, rendered again.
SynthesisResult synthesize_dataset(const StateInference& states, const ParticleSet& actions,
                                   const FailureEvent& failure, const RenderConfig& render);

}  // namespace relearn
