#pragma once

#include <string>
#include <vector>

#include "relearn/scene.hpp"

namespace relearn {

enum class Primitive { pick_place = 0, push, open_drawer, close_drawer };

constexpr int kNumPrimitives = 4;
constexpr int kMaxSkillParams = 4;

const char* primitive_name(Primitive p);
Primitive primitive_from_name(const std::string& name);
int primitive_param_count(Primitive p);

// pick_place: params = (dx, dy, dz, dyaw)
// push:       params = (dir_x, dir_y, distance); direction normalized on construction
// open/close_drawer: params = (extension)
struct SkillInstance {
    Primitive primitive = Primitive::pick_place;
    int target_object = 0;
    std::vector<double> params;

    static SkillInstance pick_place(int target, Vec3 dpos, double dyaw);
    static SkillInstance push(int target, double dir_x, double dir_y, double distance);
    static SkillInstance drawer(int target, double extension);  // signed; <0 closes
};

struct ExecResult {
    SceneState state;
    bool collision = false;
    std::vector<int> moved_ids;  // objects displaced by the skill, target first
};

ExecResult execute_skill(const SceneState& scene, const SkillInstance& skill);

struct TransitionRecord {
    SceneState pre_state;
    SegmentedCloud pre_cloud;
    SkillInstance skill;
    SceneState post_state;
    SegmentedCloud post_cloud;
    RelationSet pre_relations;
    RelationSet post_relations;
    bool collision = false;
};

struct SceneConfig {
    // Two fixed tables; movable objects are placed on them and optionally
    // inside an open container.
    std::vector<Vec3> table_positions = {{-0.55, 0.0, 0.35}, {0.55, 0.0, 0.35}};
    Vec3 table_dims = {0.9, 0.9, 0.7};
    int n_cubes = 3;
    double cube_min = 0.04, cube_max = 0.08;
    double container_probability = 0.5;
    Vec3 container_dims = {0.3, 0.3, 0.12};
    double container_wall = 0.01;
    int max_in_container = 2;
    // some containers and cubes start on the ground so off-table
    // configurations are in distribution for the detector
    double container_on_ground_probability = 0.25;
    double cube_on_ground_probability = 0.08;
    double drawer_probability = 0.15;
    Vec3 drawer_dims = {0.4, 0.4, 0.3};
    int max_place_attempts = 1000;
};

SceneState random_scene(const SceneConfig& config, Rng rng);

struct PretrainConfig {
    SceneConfig scene;
    int n_points_per_segment = 64;
    double noise_sigma = 0.0;
    // Mix over primitives; entries for unavailable targets fall back to pick_place.
    double p_pick_place = 0.7, p_push = 0.25, p_drawer = 0.05;
    // Default excludes transitions that move an object with contents, so
    // containment co-movement stays out of distribution.
    bool exclude_container_transport = true;
    int max_skill_attempts = 40;
    double placement_margin = 0.18;  // pick_place destinations stay inside tables
};

std::vector<TransitionRecord> generate_pretrain_dataset(const PretrainConfig& config, int n,
                                                        Rng rng);

// Samples a random skill valid for the scene (used by dataset generation).
SkillInstance sample_skill(const SceneState& scene, const PretrainConfig& config, Rng& rng);

// Dataset directory format: manifest.json + records.jsonl + clouds.bin.
void save_dataset(const std::string& dir, const std::vector<TransitionRecord>& records,
                  const std::string& manifest_json);
std::vector<TransitionRecord> load_dataset(const std::string& dir,
                                           std::string* manifest_json = nullptr);

}  // namespace relearn
