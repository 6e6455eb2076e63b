#include "relearn/failure.hpp"

#include <stdexcept>

#include "relearn/real2sim.hpp"

namespace relearn {

const char* failure_class_name(FailureClass c) {
    return c == FailureClass::incorrect_symbolic_prediction ? "incorrect_symbolic_prediction"
                                                            : "sim2real_gap";
}

static bool slot_truth(const RelSlot& slot, const RelationSet& rels) {
    if (slot.is_unary) return rels.get(slot.a, static_cast<UnaryRel>(slot.rel));
    return rels.get(slot.a, slot.b, static_cast<BinaryRel>(slot.rel));
}

static bool slot_known(const RelSlot& slot, const RelationSet& rels) {
    if (slot.is_unary) return rels.has(slot.a, static_cast<UnaryRel>(slot.rel));
    return rels.has(slot.a, slot.b, static_cast<BinaryRel>(slot.rel));
}

std::vector<RelSlot> detect_failure(const RelationSet& predicted, const RelationSet& observed,
                                    const std::vector<RelSlot>& tracked) {
    std::vector<RelSlot> mismatches;
    for (const auto& slot : tracked) {
        if (!slot_known(slot, predicted) || !slot_known(slot, observed))
            throw std::runtime_error("detect_failure: tracked slot missing from a relation set");
        bool p = slot_truth(slot, predicted);
        bool o = slot_truth(slot, observed);
        if (p != o) {
            RelSlot m = slot;
            m.value = o;
            mismatches.push_back(m);
        }
    }
    return mismatches;
}

std::vector<RelSlot> slots_with_values(const std::vector<RelSlot>& tracked,
                                       const RelationSet& rels) {
    std::vector<RelSlot> out = tracked;
    for (auto& slot : out) slot.value = slot_truth(slot, rels);
    return out;
}

FailureClass classify_failure(const FailureEvent& event) {
    SceneState scene = fit_scene_from_cloud(event.pre_cloud);
    if (scene.objects.empty()) throw std::runtime_error("unreconstructable");
    ExecResult replay = execute_skill(scene, event.skill);
    RelationSet replay_rels = detect_relations_geometric(replay.state);

    // Matching subset: stable relation kinds only (unary, inside, above,
    // below, in_contact), taken from the observed mismatch slots and from
    // tracked slots touching the manipulated object. Directional spatial
    // relations and boundary flip on thresholds far from the manipulation
    // and make the verdict brittle.
    auto stable = [](const RelSlot& slot) {
        return slot.is_unary || slot.rel == static_cast<int>(BinaryRel::inside) ||
               slot.rel == static_cast<int>(BinaryRel::above) ||
               slot.rel == static_cast<int>(BinaryRel::below) ||
               slot.rel == static_cast<int>(BinaryRel::in_contact);
    };
    std::vector<RelSlot> match;
    for (const auto& slot :
         detect_failure(event.predicted_relations, event.post_relations_observed, event.tracked))
        if (stable(slot)) match.push_back(slot);
    for (const auto& slot : event.tracked) {
        bool touches = slot.is_unary ? slot.a == event.skill.target_object
                                     : slot.a == event.skill.target_object ||
                                           slot.b == event.skill.target_object;
        if (stable(slot) && touches &&
            std::find(match.begin(), match.end(), slot) == match.end())
            match.push_back(slot);
    }

    for (const auto& slot : match) {
        if (!slot_known(slot, replay_rels)) return FailureClass::sim2real_gap;
        bool replayed = slot_truth(slot, replay_rels);
        bool observed = slot_truth(slot, event.post_relations_observed);
        if (replayed != observed) return FailureClass::sim2real_gap;
    }
    return FailureClass::incorrect_symbolic_prediction;
}

}  // namespace relearn
