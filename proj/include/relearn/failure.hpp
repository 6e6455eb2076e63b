#pragma once

#include <vector>

#include "relearn/model.hpp"
#include "relearn/scene.hpp"
#include "relearn/simkin.hpp"

namespace relearn {

enum class FailureClass { incorrect_symbolic_prediction, sim2real_gap };

const char* failure_class_name(FailureClass c);

struct FailureEvent {
    SegmentedCloud pre_cloud;              // O^F, observation before the failed skill
    RelationSet pre_relations;             // R^F, detected symbolic state before
    SkillInstance skill;                   // phi^F with the executed parameters
    RelationSet post_relations_observed;   // R^F', detected after execution
    RelationSet predicted_relations;       // the plan's predicted post relations
    std::vector<RelSlot> tracked;          // slot keys compared for this step
    SceneState reference_scene;            // scene fitted from O^F
    int step_index = 0;
    uint64_t seed = 0;
};

// Tracked relations whose predicted and observed truth values differ.
// Probabilities are assumed already thresholded into the RelationSets.
std::vector<RelSlot> detect_failure(const RelationSet& predicted, const RelationSet& observed,
                                    const std::vector<RelSlot>& tracked);

// Copies slot keys and fills each value from the relation set.
std::vector<RelSlot> slots_with_values(const std::vector<RelSlot>& tracked,
                                       const RelationSet& rels);

// Replays the failure in the kinematic world reconstructed from O^F and
// compares the replay's relations against the observed ones. Matching uses
// the goal-relevant subset: the observed mismatch slots plus containment-type
// relations (inside, above, below, in_contact) touching the skill target;
// far-field directional relations are excluded as brittle.
FailureClass classify_failure(const FailureEvent& event);

}  // namespace relearn
