#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "relearn/bench.hpp"

using namespace relearn;

namespace {

ModelConfig tiny_model(uint64_t seed = 3) {
    ModelConfig cfg;
    cfg.point_feat = 8;
    cfg.id_dim = 8;
    cfg.enc_hidden = 16;
    cfg.dyn_hidden = 16;
    cfg.dec_hidden = 16;
    cfg.init_seed = seed;
    return cfg;
}

FailureEvent tiny_failure(const SkillEffectModel& model) {
    TransportTaskConfig task;
    TransportInstance inst = make_transport_instance(task, Rng(5));
    SegmentedCloud cloud = render_cloud(inst.world, 24, 0.0, Rng(6));
    FailureEvent f;
    f.pre_cloud = cloud;
    f.reference_scene = fit_scene_from_cloud(cloud);
    f.pre_relations = model.predict(cloud, {}).step_relations(-1);
    f.skill = SkillInstance::pick_place(inst.box_id, {0.9, 0.0, 0.0}, 0.0);
    std::vector<int> ids;
    for (const auto& seg : cloud.segments) ids.push_back(seg.segment_id);
    f.tracked = tracked_slots(inst.goal, ids, inst.box_id);
    return f;
}

}  // namespace

TEST_CASE("transport instances are deterministic and well formed") {
    TransportTaskConfig cfg;
    TransportInstance a = make_transport_instance(cfg, Rng(9));
    TransportInstance b = make_transport_instance(cfg, Rng(9));
    CHECK(a.world.objects.size() == b.world.objects.size());
    for (size_t i = 0; i < a.world.objects.size(); ++i)
        CHECK(a.world.objects[i].pose.position.x == b.world.objects[i].pose.position.x);
    REQUIRE(a.skeleton.size() == 1);
    CHECK(a.skeleton[0].primitive == Primitive::pick_place);
    CHECK(a.skeleton[0].target == a.box_id);
    // the configured cubes start inside the box
    for (int id : a.cube_ids) CHECK(a.world.contained_in.at(id) == a.box_id);
    // goal: box and cubes above the destination table
    CHECK(a.goal.conjuncts.size() == 1 + a.cube_ids.size());
    RelationSet rels = detect_relations_geometric(a.world);
    CHECK_FALSE(goal_satisfied(a.goal, rels));
}

TEST_CASE("gradient baseline with one particle matches svgd exactly") {
    SkillEffectModel model(tiny_model());
    Rng rng(11);
    for (auto& p : model.params()) p += 0.1 * rng.normal();
    FailureEvent f = tiny_failure(model);
    SteinConfig sc;
    sc.particles = 1;
    sc.iters_state = 15;
    sc.iters_action = 10;
    sc.seed = 21;
    RenderConfig rc;
    rc.n_points_per_segment = 24;
    rc.seed = 22;
    GenResult a = baseline_generate(GenMethod::svgd, f, model, sc, rc);
    GenResult b = baseline_generate(GenMethod::gradient, f, model, sc, rc);
    REQUIRE(a.dataset.size() == 1);
    REQUIRE(b.dataset.size() == 1);
    const SceneState &sa = a.dataset[0].pre_state, &sb = b.dataset[0].pre_state;
    for (size_t i = 0; i < sa.objects.size(); ++i) {
        CHECK(std::abs(sa.objects[i].pose.position.x - sb.objects[i].pose.position.x) < 1e-12);
        CHECK(std::abs(sa.objects[i].pose.position.y - sb.objects[i].pose.position.y) < 1e-12);
        CHECK(std::abs(sa.objects[i].pose.yaw - sb.objects[i].pose.yaw) < 1e-12);
    }
    for (size_t d = 0; d < a.dataset[0].skill.params.size(); ++d)
        CHECK(std::abs(a.dataset[0].skill.params[d] - b.dataset[0].skill.params[d]) < 1e-12);
}

TEST_CASE("sampling with an unsatisfiable detector exhausts its budget") {
    SkillEffectModel model(tiny_model());  // untrained: every probability is 0.5
    FailureEvent f = tiny_failure(model);
    // all-true targets can never be satisfied by thresholded 0.5 outputs
    for (auto& slot : f.tracked) slot.value = true;
    f.pre_relations = RelationSet{};
    for (auto& slot : f.tracked) {
        if (slot.is_unary) f.pre_relations.set(slot.a, static_cast<UnaryRel>(slot.rel), true);
        else f.pre_relations.set(slot.a, slot.b, static_cast<BinaryRel>(slot.rel), true);
    }
    SteinConfig sc;
    sc.particles = 2;
    sc.seed = 31;
    RenderConfig rc;
    rc.n_points_per_segment = 24;
    GenResult out = baseline_generate(GenMethod::sampling, f, model, sc, rc);
    CHECK(out.budget_exhausted);
    CHECK(out.accepted == 0);
    CHECK(out.dataset.empty());
}

TEST_CASE("zero-trial suite produces an empty but valid report") {
    BenchConfig cfg;
    cfg.model = tiny_model();
    cfg.pretrain_records = 12;
    cfg.train.pretrain_epochs = 1;
    cfg.train.batch_size = 4;
    cfg.eval_trials = 0;
    cfg.finetune_epochs = 1;
    cfg.small_extra_records = 2;
    cfg.large_extra_records = 4;
    cfg.stein.particles = 2;
    cfg.stein.iters_state = 2;
    cfg.stein.iters_action = 2;
    cfg.episode.planner.ka = 4;
    cfg.episode.n_points = 16;
    cfg.render.n_points_per_segment = 16;
    cfg.seeds = {1};
    cfg.outdir = "/tmp/relearn_bench_empty";
    cfg.checkpoint_path = "";
    std::filesystem::remove_all(cfg.outdir);
    BenchReport report = run_benchmark(cfg);
    CHECK(report.outcomes.empty());
    write_bench_report(cfg, report);
    CHECK(std::filesystem::exists(cfg.outdir + "/success_rates.csv"));
    CHECK(std::filesystem::exists(cfg.outdir + "/ordering.csv"));
    CHECK(std::filesystem::exists(cfg.outdir + "/bench_success.svg"));
    CHECK(std::filesystem::exists(cfg.outdir + "/manifest.json"));
}
