#include "relearn/scene.hpp"

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace relearn {

const char* semantic_class_name(SemanticClass c) {
    switch (c) {
        case SemanticClass::cuboid: return "cuboid";
        case SemanticClass::open_box: return "open_box";
        case SemanticClass::shelf: return "shelf";
        case SemanticClass::drawer_unit: return "drawer_unit";
        case SemanticClass::table: return "table";
    }
    return "cuboid";
}

SemanticClass semantic_class_from_name(const std::string& name) {
    for (int i = 0; i <= static_cast<int>(SemanticClass::table); ++i) {
        auto c = static_cast<SemanticClass>(i);
        if (name == semantic_class_name(c)) return c;
    }
    throw std::runtime_error("unknown semantic class: " + name);
}

const char* unary_rel_name(UnaryRel r) {
    switch (r) {
        case UnaryRel::movable: return "movable";
        case UnaryRel::is_drawer: return "is_drawer";
        case UnaryRel::open: return "open";
    }
    return "movable";
}

const char* binary_rel_name(BinaryRel r) {
    static const char* names[] = {"left",     "right",    "front",    "behind", "above",
                                  "below",    "in_contact", "boundary", "inside"};
    return names[static_cast<int>(r)];
}

const SceneObject* SceneState::find(int id) const {
    for (const auto& o : objects)
        if (o.spec.id == id) return &o;
    return nullptr;
}

SceneObject* SceneState::find(int id) {
    for (auto& o : objects)
        if (o.spec.id == id) return &o;
    return nullptr;
}

int SceneState::index_of(int id) const {
    for (size_t i = 0; i < objects.size(); ++i)
        if (objects[i].spec.id == id) return static_cast<int>(i);
    return -1;
}

const Segment* SegmentedCloud::find(int id) const {
    for (const auto& s : segments)
        if (s.segment_id == id) return &s;
    return nullptr;
}

Vec3 SegmentedCloud::centroid(int seg_index) const {
    const auto& pts = segments[seg_index].points;
    Vec3 c;
    for (const auto& p : pts) c += p;
    return pts.empty() ? c : c * (1.0 / static_cast<double>(pts.size()));
}

bool RelationSet::get(int obj, UnaryRel r) const {
    auto it = unary.find({obj, static_cast<int>(r)});
    return it != unary.end() && it->second;
}

bool RelationSet::get(int a, int b, BinaryRel r) const {
    auto it = binary.find({a, b, static_cast<int>(r)});
    return it != binary.end() && it->second;
}

bool RelationSet::has(int obj, UnaryRel r) const {
    return unary.count({obj, static_cast<int>(r)}) > 0;
}

bool RelationSet::has(int a, int b, BinaryRel r) const {
    return binary.count({a, b, static_cast<int>(r)}) > 0;
}

// --- Object geometry -------------------------------------------------------

static void append_open_box_slabs(std::vector<Slab>& out, const Vec3& dims, double t,
                                  const Vec3& offset) {
    double dx = dims.x, dy = dims.y, dz = dims.z;
    out.push_back({offset + Vec3{0, 0, -dz / 2 + t / 2}, {dx / 2, dy / 2, t / 2}});
    double wall_h = (dz - t) / 2;
    out.push_back({offset + Vec3{dx / 2 - t / 2, 0, t / 2}, {t / 2, dy / 2, wall_h}});
    out.push_back({offset + Vec3{-dx / 2 + t / 2, 0, t / 2}, {t / 2, dy / 2, wall_h}});
    out.push_back({offset + Vec3{0, dy / 2 - t / 2, t / 2}, {(dx - 2 * t) / 2, t / 2, wall_h}});
    out.push_back({offset + Vec3{0, -dy / 2 + t / 2, t / 2}, {(dx - 2 * t) / 2, t / 2, wall_h}});
}

std::vector<Slab> object_slabs(const ObjectSpec& spec) {
    std::vector<Slab> slabs;
    double t = spec.wall;
    const Vec3& d = spec.dims;
    switch (spec.semantic_class) {
        case SemanticClass::cuboid:
        case SemanticClass::table:
        case SemanticClass::shelf:
            slabs.push_back({{0, 0, 0}, d * 0.5});
            break;
        case SemanticClass::open_box:
            append_open_box_slabs(slabs, d, t, {0, 0, 0});
            break;
        case SemanticClass::drawer_unit: {
            // Shell: open toward local +x, the drawer tray slides out that way.
            double wall_h = d.z / 2 - t;
            slabs.push_back({{0, 0, -d.z / 2 + t / 2}, {d.x / 2, d.y / 2, t / 2}});
            slabs.push_back({{0, 0, d.z / 2 - t / 2}, {d.x / 2, d.y / 2, t / 2}});
            slabs.push_back({{-d.x / 2 + t / 2, 0, 0}, {t / 2, d.y / 2, wall_h}});
            slabs.push_back({{t / 2, d.y / 2 - t / 2, 0}, {(d.x - t) / 2, t / 2, wall_h}});
            slabs.push_back({{t / 2, -d.y / 2 + t / 2, 0}, {(d.x - t) / 2, t / 2, wall_h}});
            // Tray: an open box nested in the lower half of the shell.
            double g = 0.004;  // sliding clearance
            Vec3 tray{d.x - t - g, d.y - 2 * t - g, d.z / 2 - t};
            Vec3 tray_center{t / 2 + spec.joint_pos, 0, -d.z / 2 + t + tray.z / 2};
            append_open_box_slabs(slabs, tray, t, tray_center);
            break;
        }
    }
    return slabs;
}

Aabb object_aabb(const SceneObject& obj) {
    auto slabs = object_slabs(obj.spec);
    Aabb box = slab_world_aabb(slabs[0], obj.pose.position, obj.pose.yaw);
    for (size_t i = 1; i < slabs.size(); ++i)
        box = box.united(slab_world_aabb(slabs[i], obj.pose.position, obj.pose.yaw));
    return box;
}

std::optional<double> cavity_floor_at(const SceneObject& obj, double px, double py) {
    const auto& s = obj.spec;
    Vec3 local = rot_z(-obj.pose.yaw, Vec3{px, py, 0} - Vec3{obj.pose.position.x,
                                                             obj.pose.position.y, 0});
    if (s.semantic_class == SemanticClass::open_box) {
        double hx = s.dims.x / 2 - s.wall, hy = s.dims.y / 2 - s.wall;
        if (std::abs(local.x) <= hx && std::abs(local.y) <= hy)
            return obj.pose.position.z - s.dims.z / 2 + s.wall;
        return std::nullopt;
    }
    if (s.semantic_class == SemanticClass::drawer_unit) {
        double g = 0.004;
        double tray_lx = s.dims.x - s.wall - g, tray_ly = s.dims.y - 2 * s.wall - g;
        double cx = s.wall / 2 + s.joint_pos;
        double hx = tray_lx / 2 - s.wall, hy = tray_ly / 2 - s.wall;
        if (std::abs(local.x - cx) <= hx && std::abs(local.y) <= hy)
            return obj.pose.position.z - s.dims.z / 2 + 2 * s.wall;
        return std::nullopt;
    }
    return std::nullopt;
}

bool cavity_fits(const SceneObject& container, const Aabb& box) {
    double corners[4][2] = {{box.lo.x, box.lo.y},
                            {box.lo.x, box.hi.y},
                            {box.hi.x, box.lo.y},
                            {box.hi.x, box.hi.y}};
    for (auto& c : corners)
        if (!cavity_floor_at(container, c[0], c[1])) return false;
    return true;
}

double support_top(const SceneObject& obj) { return object_aabb(obj).hi.z; }

double surface_distance(const SceneObject& obj, const Vec3& p) {
    Vec3 local = rot_z(-obj.pose.yaw, p - obj.pose.position);
    double best = 1e30;
    for (const auto& s : object_slabs(obj.spec))
        best = std::min(best, slab_surface_distance(s, local));
    return best;
}

// --- settle ------------------------------------------------------------------

// Kahn topological order over the support graph; throws on cycles.
static std::vector<int> support_topo_order(const SceneState& scene) {
    std::map<int, std::vector<int>> dependents;  // support -> supported
    std::map<int, int> indeg;
    for (const auto& o : scene.objects) indeg[o.spec.id] = 0;
    for (const auto& [id, sup] : scene.support_of) {
        if (sup == kGround) continue;
        if (scene.find(sup) == nullptr || scene.find(id) == nullptr) continue;
        dependents[sup].push_back(id);
        indeg[id] += 1;
    }
    std::vector<int> order, queue;
    for (const auto& [id, deg] : indeg)
        if (deg == 0) queue.push_back(id);
    std::sort(queue.begin(), queue.end());
    while (!queue.empty()) {
        int id = queue.front();
        queue.erase(queue.begin());
        order.push_back(id);
        for (int dep : dependents[id]) {
            if (--indeg[dep] == 0) {
                queue.insert(std::lower_bound(queue.begin(), queue.end(), dep), dep);
            }
        }
    }
    if (order.size() != scene.objects.size()) throw std::runtime_error("support-cycle");
    return order;
}

static std::set<int> transitive_dependents(const SceneState& scene, int id) {
    std::set<int> out{id};
    bool grew = true;
    while (grew) {
        grew = false;
        for (const auto& [obj, sup] : scene.support_of) {
            if (out.count(sup) && !out.count(obj)) {
                out.insert(obj);
                grew = true;
            }
        }
        for (const auto& [obj, cont] : scene.contained_in) {
            if (cont != kNone && out.count(cont) && !out.count(obj)) {
                out.insert(obj);
                grew = true;
            }
        }
    }
    return out;
}

// Support surface height of `sup` for an object with horizontal box `footprint`
// centered at (cx, cy): the cavity floor when the object fits inside, else the top.
static double surface_height_for(const SceneObject& sup, const Aabb& footprint, double cx,
                                 double cy) {
    auto floor = cavity_floor_at(sup, cx, cy);
    if (floor && cavity_fits(sup, footprint)) return *floor;
    return support_top(sup);
}

// An object rests on the highest covering surface at or below its current
// bottom (tolerance absorbs settling round-off). Surfaces above the bottom
// belong to objects it merely overlaps, not ones supporting it.
constexpr double kDropTolerance = 0.02;

int derive_support(const SceneState& scene, int id) {
    const SceneObject* a = scene.find(id);
    if (a == nullptr) return kGround;
    auto excluded = transitive_dependents(scene, id);
    Aabb abox = object_aabb(*a);
    double cx = a->pose.position.x, cy = a->pose.position.y;
    double bottom = abox.lo.z;
    int best = kGround;
    double best_surface = 0.0;  // ground level
    for (const auto& b : scene.objects) {
        if (excluded.count(b.spec.id)) continue;
        Aabb bbox = object_aabb(b);
        if (!bbox.contains_xy(cx, cy)) continue;
        double s = surface_height_for(b, abox, cx, cy);
        if (s > bottom + kDropTolerance) continue;
        if (best == kGround || s > best_surface ||
            (s == best_surface && b.spec.id < best)) {
            best = b.spec.id;
            best_surface = s;
        }
    }
    return best;
}

SceneState settle(const SceneState& scene) {
    SceneState out = scene;
    for (const auto& o : out.objects) {
        if (o.spec.movable && !out.support_of.count(o.spec.id))
            out.support_of[o.spec.id] = derive_support(out, o.spec.id);
    }
    for (int pass = 0; pass < 32; ++pass) {
        bool changed = false;
        std::vector<int> order = support_topo_order(out);
        for (int id : order) {
            SceneObject* a = out.find(id);
            if (!a->spec.movable) continue;
            int sup = out.support_of[id];
            const SceneObject* b = sup == kGround ? nullptr : out.find(sup);
            double cx = a->pose.position.x, cy = a->pose.position.y;
            if (sup != kGround && (b == nullptr || !object_aabb(*b).contains_xy(cx, cy))) {
                int re = derive_support(out, id);
                if (re != sup) {
                    out.support_of[id] = re;
                    changed = true;
                }
                sup = out.support_of[id];
                b = sup == kGround ? nullptr : out.find(sup);
            }
            double surface = 0.0;
            if (b != nullptr) surface = surface_height_for(*b, object_aabb(*a), cx, cy);
            double z = surface + a->spec.dims.z / 2;
            if (z != a->pose.position.z) {
                a->pose.position.z = z;
                changed = true;
            }
        }
        if (!changed) break;
    }
    // Containment from settled bounding boxes: smallest enclosing box wins.
    out.contained_in.clear();
    std::vector<Aabb> boxes;
    boxes.reserve(out.objects.size());
    for (const auto& o : out.objects) boxes.push_back(object_aabb(o));
    for (size_t i = 0; i < out.objects.size(); ++i) {
        int best = kNone;
        double best_vol = 1e30;
        for (size_t j = 0; j < out.objects.size(); ++j) {
            if (i == j) continue;
            if (boxes[j].contains(boxes[i]) && !boxes[i].contains(boxes[j])) {
                double v = boxes[j].volume();
                if (v < best_vol) {
                    best_vol = v;
                    best = out.objects[j].spec.id;
                }
            }
        }
        out.contained_in[out.objects[i].spec.id] = best;
    }
    return out;
}

// --- render_cloud -------------------------------------------------------------

struct FaceRect {
    Vec3 origin;  // local corner
    Vec3 u, v;    // local edge vectors
    double area;
};

static void slab_faces(const Slab& s, std::vector<FaceRect>& out) {
    const Vec3& c = s.center;
    const Vec3& h = s.half;
    double dx = 2 * h.x, dy = 2 * h.y, dz = 2 * h.z;
    // +-x, +-y, +-z faces
    out.push_back({{c.x + h.x, c.y - h.y, c.z - h.z}, {0, dy, 0}, {0, 0, dz}, dy * dz});
    out.push_back({{c.x - h.x, c.y - h.y, c.z - h.z}, {0, dy, 0}, {0, 0, dz}, dy * dz});
    out.push_back({{c.x - h.x, c.y + h.y, c.z - h.z}, {dx, 0, 0}, {0, 0, dz}, dx * dz});
    out.push_back({{c.x - h.x, c.y - h.y, c.z - h.z}, {dx, 0, 0}, {0, 0, dz}, dx * dz});
    out.push_back({{c.x - h.x, c.y - h.y, c.z + h.z}, {dx, 0, 0}, {0, dy, 0}, dx * dy});
    out.push_back({{c.x - h.x, c.y - h.y, c.z - h.z}, {dx, 0, 0}, {0, dy, 0}, dx * dy});
}

SegmentedCloud render_cloud(const SceneState& scene, int n_points_per_segment,
                            double noise_sigma, Rng rng) {
    if (n_points_per_segment < 8)
        throw std::runtime_error("render_cloud: need at least 8 points per segment");
    SegmentedCloud cloud;
    for (size_t oi = 0; oi < scene.objects.size(); ++oi) {
        const auto& obj = scene.objects[oi];
        Rng seg_rng = rng.split(oi);
        std::vector<FaceRect> faces;
        for (const auto& s : object_slabs(obj.spec)) slab_faces(s, faces);
        std::vector<double> cum(faces.size());
        double total = 0.0;
        for (size_t f = 0; f < faces.size(); ++f) {
            total += faces[f].area;
            cum[f] = total;
        }
        Segment seg;
        seg.segment_id = obj.spec.id;
        seg.semantic_class = obj.spec.semantic_class;
        seg.points.reserve(n_points_per_segment);
        for (int k = 0; k < n_points_per_segment; ++k) {
            double r = seg_rng.uniform01() * total;
            size_t f = std::lower_bound(cum.begin(), cum.end(), r) - cum.begin();
            if (f >= faces.size()) f = faces.size() - 1;
            double a = seg_rng.uniform01(), b = seg_rng.uniform01();
            Vec3 local = faces[f].origin + faces[f].u * a + faces[f].v * b;
            Vec3 world = obj.pose.position + rot_z(obj.pose.yaw, local);
            if (noise_sigma > 0.0) {
                world.x += noise_sigma * seg_rng.normal();
                world.y += noise_sigma * seg_rng.normal();
                world.z += noise_sigma * seg_rng.normal();
            }
            seg.points.push_back(world);
        }
        cloud.segments.push_back(std::move(seg));
    }
    return cloud;
}

SegmentedCloud transform_cloud(const SegmentedCloud& cloud, const SceneState& reference,
                               const std::vector<Pose>& target_poses) {
    if (target_poses.size() != cloud.segments.size())
        throw std::runtime_error("transform_cloud: pose count mismatch");
    SegmentedCloud out;
    out.segments.reserve(cloud.segments.size());
    for (size_t i = 0; i < cloud.segments.size(); ++i) {
        const Segment& seg = cloud.segments[i];
        const SceneObject* ref = reference.find(seg.segment_id);
        if (ref == nullptr)
            throw std::runtime_error("transform_cloud: segment not in reference scene");
        const Pose& tgt = target_poses[i];
        Vec3 dp = tgt.position - ref->pose.position;
        double dyaw = tgt.yaw - ref->pose.yaw;
        Segment ns;
        ns.segment_id = seg.segment_id;
        ns.semantic_class = seg.semantic_class;
        ns.points.reserve(seg.points.size());
        if (dyaw == 0.0) {
            for (const auto& p : seg.points) ns.points.push_back(p + dp);
        } else {
            Vec3 c = cloud.centroid(static_cast<int>(i));
            for (const auto& p : seg.points) {
                Vec3 q = p - c;
                ns.points.push_back(c + rot_z(dyaw, q) + dp);
            }
        }
        out.segments.push_back(std::move(ns));
    }
    return out;
}

// --- relations -----------------------------------------------------------------

static double edge_distance(double cx, double cy, const Aabb& top) {
    double ddx = std::max(top.lo.x - cx, cx - top.hi.x);
    double ddy = std::max(top.lo.y - cy, cy - top.hi.y);
    if (ddx > 0 || ddy > 0) {
        double ox = std::max(ddx, 0.0), oy = std::max(ddy, 0.0);
        return std::sqrt(ox * ox + oy * oy);
    }
    return -std::max(ddx, ddy);
}

RelationSet detect_relations_geometric(const SceneState& scene) {
    RelationSet rels;
    size_t n = scene.objects.size();
    std::vector<Aabb> boxes(n);
    for (size_t i = 0; i < n; ++i) boxes[i] = object_aabb(scene.objects[i]);

    for (size_t i = 0; i < n; ++i) {
        const auto& spec = scene.objects[i].spec;
        bool drawer = spec.semantic_class == SemanticClass::drawer_unit;
        rels.set(spec.id, UnaryRel::movable, spec.movable);
        rels.set(spec.id, UnaryRel::is_drawer, drawer);
        rels.set(spec.id, UnaryRel::open, drawer && spec.joint_pos > 0.5 * spec.dims.x);
    }

    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            int a = scene.objects[i].spec.id, b = scene.objects[j].spec.id;
            const Aabb &ba = boxes[i], &bb = boxes[j];
            Vec3 d = ba.center() - bb.center();
            for (int r = 0; r < kNumBinary; ++r)
                rels.set(a, b, static_cast<BinaryRel>(r), false);

            double ax = std::abs(d.x), ay = std::abs(d.y), az = std::abs(d.z);
            if (ax >= ay && ax >= az) {
                rels.set(a, b, d.x < 0 ? BinaryRel::left : BinaryRel::right, true);
            } else if (ay >= az) {
                rels.set(a, b, d.y < 0 ? BinaryRel::front : BinaryRel::behind, true);
            } else {
                rels.set(a, b, d.z > 0 ? BinaryRel::above : BinaryRel::below, true);
            }

            double vo = std::min(ba.hi.z, bb.hi.z) - std::max(ba.lo.z, bb.lo.z);
            bool horiz = ba.gap(bb, 0) < 0 && ba.gap(bb, 1) < 0;
            if (vo <= kVerticalOverlapEps && horiz) {
                rels.set(a, b, d.z > 0 ? BinaryRel::above : BinaryRel::below, true);
            }

            double g0 = ba.gap(bb, 0), g1 = ba.gap(bb, 1), g2 = ba.gap(bb, 2);
            bool contact = (std::abs(g0) <= kContactTolerance && g1 < 0 && g2 < 0) ||
                           (std::abs(g1) <= kContactTolerance && g0 < 0 && g2 < 0) ||
                           (std::abs(g2) <= kContactTolerance && g0 < 0 && g1 < 0);
            rels.set(a, b, BinaryRel::in_contact, contact);

            rels.set(a, b, BinaryRel::inside, bb.contains(ba) && !ba.contains(bb));

            if (rels.get(a, b, BinaryRel::above) && bb.extent(0) > kBottomEps &&
                bb.extent(1) > kBottomEps) {
                Vec3 ca = ba.center();
                if (edge_distance(ca.x, ca.y, bb) < kBoundaryEps)
                    rels.set(a, b, BinaryRel::boundary, true);
            }
        }
    }
    return rels;
}

// --- text / binary formats -----------------------------------------------------

static std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string scene_to_text(const SceneState& scene) {
    std::ostringstream os;
    os << "scene v1 units=m,rad objects=" << scene.objects.size() << "\n";
    for (const auto& o : scene.objects) {
        os << "obj id=" << o.spec.id << " class=" << semantic_class_name(o.spec.semantic_class)
           << " dims=" << fmt_double(o.spec.dims.x) << "," << fmt_double(o.spec.dims.y) << ","
           << fmt_double(o.spec.dims.z) << " movable=" << (o.spec.movable ? 1 : 0)
           << " joint=" << fmt_double(o.spec.joint_pos) << " wall=" << fmt_double(o.spec.wall)
           << " pos=" << fmt_double(o.pose.position.x) << "," << fmt_double(o.pose.position.y)
           << "," << fmt_double(o.pose.position.z) << " yaw=" << fmt_double(o.pose.yaw);
        auto s = scene.support_of.find(o.spec.id);
        os << " support=";
        if (s == scene.support_of.end() || s->second == kGround) os << "ground";
        else os << s->second;
        auto c = scene.contained_in.find(o.spec.id);
        os << " contained=";
        if (c == scene.contained_in.end() || c->second == kNone) os << "none";
        else os << c->second;
        os << "\n";
    }
    os << "end\n";
    return os.str();
}

static std::map<std::string, std::string> parse_kv(const std::string& line, size_t from) {
    std::map<std::string, std::string> kv;
    std::istringstream is(line.substr(from));
    std::string tok;
    while (is >> tok) {
        auto eq = tok.find('=');
        if (eq != std::string::npos) kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    return kv;
}

static Vec3 parse_vec3(const std::string& s) {
    Vec3 v;
    if (std::sscanf(s.c_str(), "%lf,%lf,%lf", &v.x, &v.y, &v.z) != 3)
        throw std::runtime_error("bad vector field: " + s);
    return v;
}

SceneState scene_from_text(const std::string& text, size_t* pos) {
    size_t p = pos ? *pos : 0;
    SceneState scene;
    bool started = false;
    while (p < text.size()) {
        size_t nl = text.find('\n', p);
        if (nl == std::string::npos) nl = text.size();
        std::string line = text.substr(p, nl - p);
        p = nl + 1;
        if (line.empty()) continue;
        if (line.rfind("scene ", 0) == 0) {
            started = true;
            continue;
        }
        if (line == "end") break;
        if (!started || line.rfind("obj ", 0) != 0)
            throw std::runtime_error("bad scene record line: " + line);
        auto kv = parse_kv(line, 4);
        SceneObject o;
        o.spec.id = std::stoi(kv.at("id"));
        o.spec.semantic_class = semantic_class_from_name(kv.at("class"));
        o.spec.dims = parse_vec3(kv.at("dims"));
        o.spec.movable = kv.at("movable") == "1";
        o.spec.joint_pos = std::stod(kv.at("joint"));
        o.spec.wall = std::stod(kv.at("wall"));
        o.pose.position = parse_vec3(kv.at("pos"));
        o.pose.yaw = std::stod(kv.at("yaw"));
        int id = o.spec.id;
        scene.objects.push_back(o);
        const std::string& sup = kv.at("support");
        scene.support_of[id] = sup == "ground" ? kGround : std::stoi(sup);
        const std::string& cont = kv.at("contained");
        scene.contained_in[id] = cont == "none" ? kNone : std::stoi(cont);
    }
    if (!started) throw std::runtime_error("missing scene header");
    if (pos) *pos = p;
    return scene;
}

void save_scenes(const std::string& path, const std::vector<SceneState>& scenes) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    for (const auto& s : scenes) f << scene_to_text(s);
}

std::vector<SceneState> load_scenes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    std::string text = ss.str();
    std::vector<SceneState> scenes;
    size_t p = 0;
    while (p < text.size()) {
        while (p < text.size() && (text[p] == '\n' || text[p] == '\r')) ++p;
        if (p >= text.size()) break;
        scenes.push_back(scene_from_text(text, &p));
    }
    return scenes;
}

void save_cloud(const std::string& path, const SegmentedCloud& cloud) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
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

SegmentedCloud load_cloud(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
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
    if (!f) throw std::runtime_error("truncated cloud file: " + path);
    return cloud;
}

}  // namespace relearn
