#include "relearn/simkin.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace relearn {

const char* primitive_name(Primitive p) {
    switch (p) {
        case Primitive::pick_place: return "pick_place";
        case Primitive::push: return "push";
        case Primitive::open_drawer: return "open_drawer";
        case Primitive::close_drawer: return "close_drawer";
    }
    return "pick_place";
}

Primitive primitive_from_name(const std::string& name) {
    for (int i = 0; i < kNumPrimitives; ++i) {
        auto p = static_cast<Primitive>(i);
        if (name == primitive_name(p)) return p;
    }
    throw std::runtime_error("unknown primitive: " + name);
}

int primitive_param_count(Primitive p) {
    switch (p) {
        case Primitive::pick_place: return 4;
        case Primitive::push: return 3;
        case Primitive::open_drawer:
        case Primitive::close_drawer: return 1;
    }
    return 0;
}

SkillInstance SkillInstance::pick_place(int target, Vec3 dpos, double dyaw) {
    return {Primitive::pick_place, target, {dpos.x, dpos.y, dpos.z, dyaw}};
}

SkillInstance SkillInstance::push(int target, double dir_x, double dir_y, double distance) {
    double n = std::sqrt(dir_x * dir_x + dir_y * dir_y);
    if (n < 1e-12) { dir_x = 1.0; dir_y = 0.0; n = 1.0; }
    return {Primitive::push, target, {dir_x / n, dir_y / n, distance}};
}

SkillInstance SkillInstance::drawer(int target, double extension) {
    return {extension >= 0 ? Primitive::open_drawer : Primitive::close_drawer, target,
            {extension}};
}

// --- skill execution ----------------------------------------------------------

static std::set<int> containment_closure(const SceneState& scene, int root) {
    std::set<int> moved{root};
    bool grew = true;
    while (grew) {
        grew = false;
        for (const auto& [obj, cont] : scene.contained_in) {
            if (cont != kNone && moved.count(cont) && !moved.count(obj)) {
                moved.insert(obj);
                grew = true;
            }
        }
    }
    return moved;
}

static void rigid_move(SceneState& scene, const std::set<int>& moved, const Vec3& pivot,
                       const Vec3& dpos, double dyaw) {
    for (int id : moved) {
        SceneObject* o = scene.find(id);
        Vec3 rel = o->pose.position - pivot;
        o->pose.position = pivot + rot_z(dyaw, rel) + dpos;
        o->pose.yaw = normalize_yaw(o->pose.yaw + dyaw);
    }
}

static void refresh_supports(SceneState& scene, const std::set<int>& moved) {
    for (int id : moved) {
        SceneObject* o = scene.find(id);
        if (o != nullptr && o->spec.movable) scene.support_of[id] = derive_support(scene, id);
    }
}

// Projects the moved set out of bounding-box interpenetrations deeper than
// 1 cm with stationary non-support objects. Horizontal shifts only; settle
// re-derives z afterwards.
static bool resolve_collisions(SceneState& scene, const std::set<int>& moved) {
    bool any = false;
    for (int round = 0; round < 8; ++round) {
        bool hit = false;
        for (int id : moved) {
            SceneObject* a = scene.find(id);
            Aabb ba = object_aabb(*a);
            for (const auto& b : scene.objects) {
                if (moved.count(b.spec.id)) continue;
                int sup = scene.support_of.count(id) ? scene.support_of.at(id) : kGround;
                if (b.spec.id == sup) continue;
                if (scene.contained_in.count(id) && scene.contained_in.at(id) == b.spec.id)
                    continue;
                Aabb bb = object_aabb(b);
                double g0 = ba.gap(bb, 0), g1 = ba.gap(bb, 1), g2 = ba.gap(bb, 2);
                if (g0 < -0.01 && g1 < -0.01 && g2 < -0.01) {
                    hit = true;
                    any = true;
                    // smallest horizontal push-out
                    int axis = (-g0 <= -g1) ? 0 : 1;
                    double depth = axis == 0 ? -g0 : -g1;
                    Vec3 da = ba.center() - bb.center();
                    double sign = (axis == 0 ? da.x : da.y) >= 0 ? 1.0 : -1.0;
                    Vec3 shift{0, 0, 0};
                    (axis == 0 ? shift.x : shift.y) = sign * (depth + 1e-4);
                    for (int mid : moved) scene.find(mid)->pose.position += shift;
                    ba = object_aabb(*a);
                }
            }
        }
        if (!hit) break;
    }
    return any;
}

static ExecResult exec_pick_place(const SceneState& scene, const SkillInstance& skill) {
    const SceneObject* target = scene.find(skill.target_object);
    if (target == nullptr) throw std::runtime_error("execute_skill: unknown target object");
    if (!target->spec.movable)
        throw std::runtime_error("execute_skill: pick_place target not movable");
    ExecResult res;
    res.state = scene;
    Vec3 dpos{skill.params[0], skill.params[1], skill.params[2]};
    double dyaw = skill.params[3];
    std::set<int> moved = containment_closure(scene, skill.target_object);
    rigid_move(res.state, moved, target->pose.position, dpos, dyaw);
    refresh_supports(res.state, moved);
    res.state = settle(res.state);
    res.collision = resolve_collisions(res.state, moved);
    if (res.collision) {
        refresh_supports(res.state, moved);
        res.state = settle(res.state);
    }
    res.moved_ids.assign(moved.begin(), moved.end());
    std::swap(*std::find(res.moved_ids.begin(), res.moved_ids.end(), skill.target_object),
              res.moved_ids.front());
    return res;
}

static ExecResult exec_push(const SceneState& scene, const SkillInstance& skill) {
    const SceneObject* target = scene.find(skill.target_object);
    if (target == nullptr) throw std::runtime_error("execute_skill: unknown target object");
    ExecResult res;
    res.state = scene;
    double dist = skill.params[2];
    if (dist <= 0.0) {
        res.state = settle(res.state);
        return res;
    }
    Vec3 dir{skill.params[0], skill.params[1], 0};
    double dn = dir.norm();
    dir = dir * (1.0 / (dn < 1e-12 ? 1.0 : dn));
    Vec3 perp{-dir.y, dir.x, 0};

    auto proj = [&](const Aabb& b, const Vec3& axis) {
        Vec3 corners[4] = {{b.lo.x, b.lo.y, 0}, {b.lo.x, b.hi.y, 0},
                           {b.hi.x, b.lo.y, 0}, {b.hi.x, b.hi.y, 0}};
        double lo = 1e30, hi = -1e30;
        for (auto& c : corners) {
            double p = c.dot(axis);
            lo = std::min(lo, p);
            hi = std::max(hi, p);
        }
        return std::pair<double, double>{lo, hi};
    };

    Aabb tbox = object_aabb(*target);
    auto [t_near, t_far] = proj(tbox, dir);
    auto [p_lo, p_hi] = proj(tbox, perp);
    double start = t_near;

    struct Cand { int id; double near_p, far_p; };
    std::vector<Cand> cands;
    for (const auto& o : res.state.objects) {
        if (!o.spec.movable) continue;
        if (res.state.contained_in.count(o.spec.id) &&
            res.state.contained_in.at(o.spec.id) != kNone)
            continue;  // rides its container instead
        Aabb b = object_aabb(o);
        auto [lo, hi] = proj(b, dir);
        auto [plo, phi] = proj(b, perp);
        if (phi <= p_lo || plo >= p_hi) continue;  // outside the sweep corridor
        if (hi < start - 1e-9) continue;           // behind the pusher
        cands.push_back({o.spec.id, lo, hi});
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        return a.near_p != b.near_p ? a.near_p < b.near_p : a.id < b.id;
    });

    std::set<int> all_moved;
    double front = start + dist;
    for (const auto& c : cands) {
        if (c.near_p >= front) break;
        double delta = front - c.near_p;
        std::set<int> group = containment_closure(res.state, c.id);
        for (int id : group) {
            res.state.find(id)->pose.position += dir * delta;
            all_moved.insert(id);
        }
        front = c.far_p + delta;
    }
    refresh_supports(res.state, all_moved);
    res.state = settle(res.state);
    res.moved_ids.assign(all_moved.begin(), all_moved.end());
    return res;
}

static ExecResult exec_drawer(const SceneState& scene, const SkillInstance& skill) {
    const SceneObject* target = scene.find(skill.target_object);
    if (target == nullptr) throw std::runtime_error("execute_skill: unknown target object");
    if (target->spec.semantic_class != SemanticClass::drawer_unit)
        throw std::runtime_error("execute_skill: drawer skill on non-drawer");
    ExecResult res;
    res.state = scene;
    SceneObject* unit = res.state.find(skill.target_object);
    double ext = skill.params[0];
    if (skill.primitive == Primitive::close_drawer && ext > 0) ext = -ext;
    double j0 = unit->spec.joint_pos;
    double j1 = std::clamp(j0 + ext, 0.0, unit->spec.dims.x);
    unit->spec.joint_pos = j1;
    Vec3 slide = rot_z(unit->pose.yaw, {j1 - j0, 0, 0});
    std::set<int> contents = containment_closure(scene, skill.target_object);
    contents.erase(skill.target_object);
    for (int id : contents) res.state.find(id)->pose.position += slide;
    refresh_supports(res.state, contents);
    res.state = settle(res.state);
    res.moved_ids.assign(contents.begin(), contents.end());
    res.moved_ids.insert(res.moved_ids.begin(), skill.target_object);
    return res;
}

ExecResult execute_skill(const SceneState& scene, const SkillInstance& skill) {
    switch (skill.primitive) {
        case Primitive::pick_place: return exec_pick_place(scene, skill);
        case Primitive::push: return exec_push(scene, skill);
        case Primitive::open_drawer:
        case Primitive::close_drawer: return exec_drawer(scene, skill);
    }
    throw std::runtime_error("execute_skill: unknown primitive");
}

// --- scene generation -----------------------------------------------------------

SceneState random_scene(const SceneConfig& config, Rng rng) {
    SceneState scene;
    int next_id = 0;
    for (const auto& tp : config.table_positions) {
        SceneObject table;
        table.spec.id = next_id++;
        table.spec.semantic_class = SemanticClass::table;
        table.spec.dims = config.table_dims;
        table.spec.movable = false;
        table.pose.position = tp;
        scene.objects.push_back(table);
        scene.support_of[table.spec.id] = kGround;
    }
    int n_tables = static_cast<int>(config.table_positions.size());

    auto overlaps_existing = [&](const SceneObject& o, int ignore_id = kNone) {
        Aabb b = object_aabb(o);
        for (const auto& other : scene.objects) {
            if (!other.spec.movable && other.spec.semantic_class == SemanticClass::table)
                continue;
            if (other.spec.id == ignore_id) continue;
            if (object_aabb(other).overlaps(b)) return true;
        }
        return false;
    };

    double span_x = 0.0, span_y = 0.0;
    for (const auto& tp : config.table_positions) {
        span_x = std::max(span_x, std::abs(tp.x) + config.table_dims.x / 2);
        span_y = std::max(span_y, std::abs(tp.y) + config.table_dims.y / 2);
    }
    auto place_on_table = [&](SceneObject& o, double p_ground) {
        bool ground = rng.uniform01() < p_ground;
        for (int attempt = 0; attempt < config.max_place_attempts; ++attempt) {
            if (ground) {
                o.pose.position = {rng.uniform(-span_x, span_x), rng.uniform(-span_y, span_y),
                                   o.spec.dims.z / 2};
            } else {
                int t = rng.uniform_int(n_tables);
                const auto& tp = config.table_positions[t];
                double mx = config.table_dims.x / 2 - o.spec.dims.x / 2 - 0.02;
                double my = config.table_dims.y / 2 - o.spec.dims.y / 2 - 0.02;
                o.pose.position = {tp.x + rng.uniform(-mx, mx), tp.y + rng.uniform(-my, my),
                                   tp.z + config.table_dims.z / 2 + o.spec.dims.z / 2};
            }
            o.pose.yaw = rng.uniform(-M_PI, M_PI);
            if (!overlaps_existing(o)) return true;
        }
        return false;
    };

    int container_id = kNone;
    if (rng.uniform01() < config.container_probability) {
        SceneObject box;
        box.spec.id = next_id++;
        box.spec.semantic_class = SemanticClass::open_box;
        box.spec.dims = config.container_dims;
        box.spec.wall = config.container_wall;
        if (!place_on_table(box, config.container_on_ground_probability))
            throw std::runtime_error("scene-too-crowded");
        container_id = box.spec.id;
        scene.objects.push_back(box);
    }
    if (config.drawer_probability > 0 && rng.uniform01() < config.drawer_probability) {
        SceneObject unit;
        unit.spec.id = next_id++;
        unit.spec.semantic_class = SemanticClass::drawer_unit;
        unit.spec.dims = config.drawer_dims;
        unit.spec.joint_pos = rng.uniform01() < 0.5 ? 0.0 : rng.uniform(0.0, unit.spec.dims.x);
        if (!place_on_table(unit, 0.0)) throw std::runtime_error("scene-too-crowded");
        scene.objects.push_back(unit);
    }

    int want_inside = container_id == kNone
                          ? 0
                          : std::min(config.max_in_container, rng.uniform_int(config.max_in_container + 1));
    for (int k = 0; k < config.n_cubes; ++k) {
        SceneObject cube;
        cube.spec.id = next_id++;
        cube.spec.semantic_class = SemanticClass::cuboid;
        double s = rng.uniform(config.cube_min, config.cube_max);
        cube.spec.dims = {s, s, rng.uniform(config.cube_min, config.cube_max)};
        bool placed = false;
        if (k < want_inside) {
            const SceneObject* box = scene.find(container_id);
            for (int attempt = 0; attempt < config.max_place_attempts; ++attempt) {
                double hx = box->spec.dims.x / 2 - box->spec.wall - cube.spec.dims.x / 2 - 0.005;
                double hy = box->spec.dims.y / 2 - box->spec.wall - cube.spec.dims.y / 2 - 0.005;
                if (hx <= 0 || hy <= 0) break;
                Vec3 local{rng.uniform(-hx, hx), rng.uniform(-hy, hy), 0};
                Vec3 world = box->pose.position + rot_z(box->pose.yaw, local);
                cube.pose.position = {world.x, world.y, box->pose.position.z};
                cube.pose.yaw = normalize_yaw(box->pose.yaw + rng.uniform(-0.3, 0.3));
                if (!overlaps_existing(cube, container_id)) { placed = true; break; }
            }
        }
        if (!placed && !place_on_table(cube, config.cube_on_ground_probability))
            throw std::runtime_error("scene-too-crowded");
        scene.objects.push_back(cube);
    }
    for (const auto& o : scene.objects)
        if (o.spec.movable) scene.support_of[o.spec.id] = derive_support(scene, o.spec.id);
    return settle(scene);
}

SkillInstance sample_skill(const SceneState& scene, const PretrainConfig& config, Rng& rng) {
    std::vector<int> movables, drawers;
    for (const auto& o : scene.objects) {
        if (o.spec.movable) movables.push_back(o.spec.id);
        if (o.spec.semantic_class == SemanticClass::drawer_unit) drawers.push_back(o.spec.id);
    }
    double r = rng.uniform01();
    if (r < config.p_drawer && !drawers.empty()) {
        int id = drawers[rng.uniform_int(static_cast<int>(drawers.size()))];
        const SceneObject* unit = scene.find(id);
        double ext = rng.uniform(-unit->spec.dims.x, unit->spec.dims.x);
        return SkillInstance::drawer(id, ext);
    }
    if (r < config.p_drawer + config.p_push && !movables.empty()) {
        int id = movables[rng.uniform_int(static_cast<int>(movables.size()))];
        double ang = rng.uniform(-M_PI, M_PI);
        return SkillInstance::push(id, std::cos(ang), std::sin(ang), rng.uniform(0.0, 0.3));
    }
    if (movables.empty()) throw std::runtime_error("sample_skill: no movable objects");
    int id = movables[rng.uniform_int(static_cast<int>(movables.size()))];
    const SceneObject* obj = scene.find(id);
    double span_x = 0.0, span_y = 0.0;
    for (const auto& tp : config.scene.table_positions) {
        span_x = std::max(span_x, std::abs(tp.x) + config.scene.table_dims.x / 2);
        span_y = std::max(span_y, std::abs(tp.y) + config.scene.table_dims.y / 2);
    }
    span_x -= config.placement_margin;
    span_y -= config.placement_margin;
    Vec3 dpos{rng.uniform(-span_x, span_x) - obj->pose.position.x,
              rng.uniform(-span_y, span_y) - obj->pose.position.y, 0.0};
    return SkillInstance::pick_place(id, dpos, rng.uniform(-M_PI / 2, M_PI / 2));
}

static bool moved_object_had_contents(const SceneState& pre, const std::vector<int>& moved) {
    for (int id : moved)
        for (const auto& [obj, cont] : pre.contained_in)
            if (cont == id && obj != id) return true;
    return false;
}

std::vector<TransitionRecord> generate_pretrain_dataset(const PretrainConfig& config, int n,
                                                        Rng rng) {
    if (n < 1) throw std::runtime_error("generate_pretrain_dataset: n must be >= 1");
    std::vector<TransitionRecord> records;
    records.reserve(n);
    for (int i = 0; i < n; ++i) {
        Rng rec_rng = rng.split(i);
        TransitionRecord rec;
        for (int attempt = 0;; ++attempt) {
            if (attempt >= config.max_skill_attempts)
                throw std::runtime_error("generate_pretrain_dataset: no admissible skill");
            Rng try_rng = rec_rng.split(attempt);
            SceneState pre = random_scene(config.scene, try_rng.split(0));
            Rng skill_rng = try_rng.split(1);
            SkillInstance skill = sample_skill(pre, config, skill_rng);
            ExecResult ex = execute_skill(pre, skill);
            if (ex.collision) continue;
            if (config.exclude_container_transport &&
                moved_object_had_contents(pre, ex.moved_ids))
                continue;
            rec.pre_state = pre;
            rec.skill = skill;
            rec.post_state = ex.state;
            rec.collision = ex.collision;
            rec.pre_cloud = render_cloud(pre, config.n_points_per_segment, config.noise_sigma,
                                         try_rng.split(2));
            rec.post_cloud = render_cloud(ex.state, config.n_points_per_segment,
                                          config.noise_sigma, try_rng.split(3));
            rec.pre_relations = detect_relations_geometric(pre);
            rec.post_relations = detect_relations_geometric(ex.state);
            break;
        }
        records.push_back(std::move(rec));
    }
    return records;
}

// --- dataset files ----------------------------------------------------------------

using nlohmann::json;

static json relations_to_json(const RelationSet& r) {
    json ju = json::array(), jb = json::array();
    for (const auto& [k, v] : r.unary) ju.push_back({k.first, k.second, v ? 1 : 0});
    for (const auto& [k, v] : r.binary)
        jb.push_back({std::get<0>(k), std::get<1>(k), std::get<2>(k), v ? 1 : 0});
    return json{{"unary", ju}, {"binary", jb}};
}

static RelationSet relations_from_json(const json& j) {
    RelationSet r;
    for (const auto& e : j.at("unary"))
        r.unary[{e[0].get<int>(), e[1].get<int>()}] = e[2].get<int>() != 0;
    for (const auto& e : j.at("binary"))
        r.binary[{e[0].get<int>(), e[1].get<int>(), e[2].get<int>()}] = e[3].get<int>() != 0;
    return r;
}

static void write_cloud_block(std::ofstream& f, const SegmentedCloud& cloud) {
    uint32_t segs = static_cast<uint32_t>(cloud.segments.size());
    uint32_t npts = segs == 0 ? 0 : static_cast<uint32_t>(cloud.segments[0].points.size());
    f.write(reinterpret_cast<const char*>(&segs), 4);
    f.write(reinterpret_cast<const char*>(&npts), 4);
    for (const auto& seg : cloud.segments) {
        uint32_t id = static_cast<uint32_t>(seg.segment_id);
        uint32_t cls = static_cast<uint32_t>(seg.semantic_class);
        f.write(reinterpret_cast<const char*>(&id), 4);
        f.write(reinterpret_cast<const char*>(&cls), 4);
        for (const auto& p : seg.points) {
            float xyz[3] = {static_cast<float>(p.x), static_cast<float>(p.y),
                            static_cast<float>(p.z)};
            f.write(reinterpret_cast<const char*>(xyz), 12);
        }
    }
}

static SegmentedCloud read_cloud_block(std::ifstream& f) {
    uint32_t segs = 0, npts = 0;
    f.read(reinterpret_cast<char*>(&segs), 4);
    f.read(reinterpret_cast<char*>(&npts), 4);
    SegmentedCloud cloud;
    for (uint32_t s = 0; s < segs; ++s) {
        uint32_t id = 0, cls = 0;
        f.read(reinterpret_cast<char*>(&id), 4);
        f.read(reinterpret_cast<char*>(&cls), 4);
        Segment seg;
        seg.segment_id = static_cast<int>(id);
        seg.semantic_class = static_cast<SemanticClass>(cls);
        seg.points.resize(npts);
        for (uint32_t k = 0; k < npts; ++k) {
            float xyz[3];
            f.read(reinterpret_cast<char*>(xyz), 12);
            seg.points[k] = {xyz[0], xyz[1], xyz[2]};
        }
        cloud.segments.push_back(std::move(seg));
    }
    return cloud;
}

void save_dataset(const std::string& dir, const std::vector<TransitionRecord>& records,
                  const std::string& manifest_json) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream mf(dir + "/manifest.json", std::ios::binary);
        mf << manifest_json;
    }
    std::ofstream rf(dir + "/records.jsonl", std::ios::binary);
    std::ofstream cf(dir + "/clouds.bin", std::ios::binary);
    for (const auto& rec : records) {
        json j;
        j["pre_scene"] = scene_to_text(rec.pre_state);
        j["post_scene"] = scene_to_text(rec.post_state);
        j["skill"] = {{"primitive", primitive_name(rec.skill.primitive)},
                      {"target", rec.skill.target_object},
                      {"params", rec.skill.params}};
        j["pre_relations"] = relations_to_json(rec.pre_relations);
        j["post_relations"] = relations_to_json(rec.post_relations);
        j["collision"] = rec.collision;
        rf << j.dump() << "\n";
        write_cloud_block(cf, rec.pre_cloud);
        write_cloud_block(cf, rec.post_cloud);
    }
}

std::vector<TransitionRecord> load_dataset(const std::string& dir, std::string* manifest_json) {
    if (manifest_json) {
        std::ifstream mf(dir + "/manifest.json", std::ios::binary);
        std::stringstream ss;
        ss << mf.rdbuf();
        *manifest_json = ss.str();
    }
    std::ifstream rf(dir + "/records.jsonl", std::ios::binary);
    std::ifstream cf(dir + "/clouds.bin", std::ios::binary);
    if (!rf || !cf) throw std::runtime_error("cannot open dataset dir: " + dir);
    std::vector<TransitionRecord> records;
    std::string line;
    while (std::getline(rf, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        TransitionRecord rec;
        rec.pre_state = scene_from_text(j.at("pre_scene").get<std::string>());
        rec.post_state = scene_from_text(j.at("post_scene").get<std::string>());
        rec.skill.primitive = primitive_from_name(j.at("skill").at("primitive").get<std::string>());
        rec.skill.target_object = j.at("skill").at("target").get<int>();
        rec.skill.params = j.at("skill").at("params").get<std::vector<double>>();
        rec.pre_relations = relations_from_json(j.at("pre_relations"));
        rec.post_relations = relations_from_json(j.at("post_relations"));
        rec.collision = j.at("collision").get<bool>();
        rec.pre_cloud = read_cloud_block(cf);
        rec.post_cloud = read_cloud_block(cf);
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace relearn
