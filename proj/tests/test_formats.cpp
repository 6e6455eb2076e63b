#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "relearn/bench.hpp"
#include "relearn/simkin.hpp"

using namespace relearn;

TEST_CASE("scene text round trip is exact") {
    SceneConfig cfg;
    cfg.n_cubes = 3;
    cfg.drawer_probability = 1.0;
    std::vector<SceneState> scenes;
    for (int i = 0; i < 5; ++i) scenes.push_back(random_scene(cfg, Rng(40 + i)));
    std::string path = "/tmp/relearn_scenes.txt";
    save_scenes(path, scenes);
    auto loaded = load_scenes(path);
    REQUIRE(loaded.size() == scenes.size());
    for (size_t s = 0; s < scenes.size(); ++s) {
        REQUIRE(loaded[s].objects.size() == scenes[s].objects.size());
        for (size_t i = 0; i < scenes[s].objects.size(); ++i) {
            const auto &a = scenes[s].objects[i], &b = loaded[s].objects[i];
            CHECK(a.spec.id == b.spec.id);
            CHECK(a.spec.semantic_class == b.spec.semantic_class);
            CHECK(a.spec.dims.x == b.spec.dims.x);
            CHECK(a.spec.joint_pos == b.spec.joint_pos);
            CHECK(a.pose.position.x == b.pose.position.x);
            CHECK(a.pose.position.z == b.pose.position.z);
            CHECK(a.pose.yaw == b.pose.yaw);
        }
        CHECK(loaded[s].support_of == scenes[s].support_of);
        CHECK(loaded[s].contained_in == scenes[s].contained_in);
    }
}

TEST_CASE("cloud binary round trip keeps float32 payloads bit-exact") {
    SceneConfig cfg;
    SceneState s = random_scene(cfg, Rng(77));
    SegmentedCloud cloud = render_cloud(s, 32, 0.01, Rng(78));
    std::string path = "/tmp/relearn_cloud.bin";
    save_cloud(path, cloud);
    SegmentedCloud loaded = load_cloud(path);
    REQUIRE(loaded.segments.size() == cloud.segments.size());
    for (size_t i = 0; i < cloud.segments.size(); ++i) {
        CHECK(loaded.segments[i].segment_id == cloud.segments[i].segment_id);
        CHECK(loaded.segments[i].semantic_class == cloud.segments[i].semantic_class);
        for (size_t k = 0; k < cloud.segments[i].points.size(); ++k) {
            CHECK(static_cast<float>(cloud.segments[i].points[k].x) ==
                  static_cast<float>(loaded.segments[i].points[k].x));
        }
    }
}

TEST_CASE("dataset directory round trip preserves records and manifest") {
    PretrainConfig cfg;
    cfg.scene.n_cubes = 2;
    cfg.n_points_per_segment = 16;
    auto records = generate_pretrain_dataset(cfg, 4, Rng(90));
    std::string dir = "/tmp/relearn_dataset";
    std::filesystem::remove_all(dir);
    save_dataset(dir, records, "{\"seed\":90}");
    std::string manifest;
    auto loaded = load_dataset(dir, &manifest);
    CHECK(manifest == "{\"seed\":90}");
    REQUIRE(loaded.size() == records.size());
    for (size_t i = 0; i < records.size(); ++i) {
        CHECK(loaded[i].skill.params == records[i].skill.params);
        CHECK(loaded[i].pre_relations.binary == records[i].pre_relations.binary);
        CHECK(loaded[i].post_relations.unary == records[i].post_relations.unary);
        CHECK(loaded[i].pre_state.objects.size() == records[i].pre_state.objects.size());
        CHECK(loaded[i].collision == records[i].collision);
    }
}

TEST_CASE("csv and svg writers are byte-deterministic") {
    std::vector<std::string> header = {"a", "b"};
    std::vector<std::vector<std::string>> rows = {{"1", "0.5"}, {"2", "0.25"}};
    write_csv("/tmp/relearn_a.csv", header, rows);
    write_csv("/tmp/relearn_b.csv", header, rows);
    CHECK(fnv1a_file("/tmp/relearn_a.csv") == fnv1a_file("/tmp/relearn_b.csv"));

    write_bar_chart_svg("/tmp/relearn_a.svg", "t", {"x", "y"}, {0.4, 0.9}, "v");
    write_bar_chart_svg("/tmp/relearn_b.svg", "t", {"x", "y"}, {0.4, 0.9}, "v");
    CHECK(fnv1a_file("/tmp/relearn_a.svg") == fnv1a_file("/tmp/relearn_b.svg"));
}
