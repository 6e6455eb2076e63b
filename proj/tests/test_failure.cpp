#include "doctest.h"

#include "relearn/failure.hpp"
#include "relearn/real2sim.hpp"

using namespace relearn;

namespace {

// Container-transport scene: box with two cubes inside on a table.
SceneState transport_scene(Rng rng) {
    SceneState s;
    SceneObject table;
    table.spec = {0, SemanticClass::table, {1.0, 1.0, 0.7}, false, 0.0, 0.01};
    table.pose.position = {0, 0, 0.35};
    s.objects.push_back(table);
    SceneObject box;
    box.spec = {1, SemanticClass::open_box, {0.3, 0.3, 0.12}, true, 0.0, 0.01};
    box.pose.position = {rng.uniform(-0.25, 0.25), rng.uniform(-0.25, 0.25), 0.76};
    s.objects.push_back(box);
    for (int i = 0; i < 2; ++i) {
        SceneObject cube;
        cube.spec = {2 + i, SemanticClass::cuboid, {0.06, 0.06, 0.06}, true, 0.0, 0.01};
        cube.pose.position = {box.pose.position.x + (i == 0 ? -0.06 : 0.06),
                              box.pose.position.y, 0.9};
        s.objects.push_back(cube);
    }
    s.support_of = {{1, 0}, {2, 1}, {3, 1}};
    return settle(s);
}

// A failure event for moving the filled box while the plan wrongly predicts
// the cubes stay behind. Observation quality is controlled by sigma.
FailureEvent scripted_failure(uint64_t seed, double sigma) {
    Rng rng(seed);
    SceneState pre = transport_scene(rng.split(0));
    SkillInstance skill = SkillInstance::pick_place(1, {rng.uniform(0.1, 0.3),
                                                        rng.uniform(-0.15, 0.15), 0.0},
                                                    0.0);
    ExecResult ex = execute_skill(pre, skill);

    FailureEvent f;
    f.pre_cloud = render_cloud(pre, 96, sigma, rng.split(1));
    f.skill = skill;
    f.reference_scene = fit_scene_from_cloud(f.pre_cloud);
    f.pre_relations = detect_relations_geometric(pre);
    // observed relations, stand-in for an accurate detector reading the world
    SceneState observed_world = ex.state;
    f.post_relations_observed = detect_relations_geometric(observed_world);
    // naive prediction: the box moves, contents do not
    f.predicted_relations = f.post_relations_observed;
    f.predicted_relations.set(2, 1, BinaryRel::inside, false);
    f.predicted_relations.set(3, 1, BinaryRel::inside, false);
    f.tracked = {
        RelSlot::binary(2, 1, BinaryRel::inside, false),
        RelSlot::binary(3, 1, BinaryRel::inside, false),
        RelSlot::binary(1, 0, BinaryRel::above, false),
        RelSlot::unary(1, UnaryRel::movable, false),
    };
    f.seed = seed;
    return f;
}

}  // namespace

TEST_CASE("detect_failure returns exactly the flipped tracked relations") {
    RelationSet predicted, observed;
    predicted.set(1, 2, BinaryRel::inside, true);
    observed.set(1, 2, BinaryRel::inside, false);
    predicted.set(1, UnaryRel::movable, true);
    observed.set(1, UnaryRel::movable, true);
    std::vector<RelSlot> tracked = {RelSlot::binary(1, 2, BinaryRel::inside, false),
                                    RelSlot::unary(1, UnaryRel::movable, false)};
    SUBCASE("identical sets give the empty mismatch") {
        auto m = detect_failure(predicted, predicted, tracked);
        CHECK(m.empty());
    }
    SUBCASE("a single inside flip is reported") {
        auto m = detect_failure(predicted, observed, tracked);
        REQUIRE(m.size() == 1);
        CHECK_FALSE(m[0].is_unary);
        CHECK(m[0].rel == static_cast<int>(BinaryRel::inside));
        CHECK(m[0].value == false);  // observed truth
    }
    SUBCASE("a unary flip is reported alone") {
        RelationSet obs2 = predicted;
        obs2.set(1, UnaryRel::movable, false);
        auto m = detect_failure(predicted, obs2, tracked);
        REQUIRE(m.size() == 1);
        CHECK(m[0].is_unary);
    }
}

TEST_CASE("noiseless scripted failures classify as incorrect symbolic predictions") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        FailureEvent f = scripted_failure(seed, 0.0);
        CHECK(classify_failure(f) == FailureClass::incorrect_symbolic_prediction);
    }
}

TEST_CASE("heavy point noise flips the classification to a sim2real gap") {
    int gap = 0;
    for (uint64_t seed = 0; seed < 10; ++seed) {
        FailureEvent f = scripted_failure(seed, 0.05);
        if (classify_failure(f) == FailureClass::sim2real_gap) ++gap;
    }
    CHECK(gap >= 8);
}

TEST_CASE("classification is deterministic") {
    FailureEvent f = scripted_failure(3, 0.01);
    CHECK(classify_failure(f) == classify_failure(f));
}
