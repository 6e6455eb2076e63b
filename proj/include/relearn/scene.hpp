#pragma once

#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "relearn/geometry.hpp"
#include "relearn/rng.hpp"

namespace relearn {

enum class SemanticClass { cuboid = 0, open_box, shelf, drawer_unit, table };

const char* semantic_class_name(SemanticClass c);
SemanticClass semantic_class_from_name(const std::string& name);

struct Pose {
    Vec3 position;
    double yaw = 0.0;
};

struct ObjectSpec {
    int id = 0;
    SemanticClass semantic_class = SemanticClass::cuboid;
    Vec3 dims;             // full extents, meters
    bool movable = true;
    double joint_pos = 0.0;  // drawer extension along local +x, meters
    double wall = 0.01;      // wall thickness for open_box / drawer_unit
};

struct SceneObject {
    ObjectSpec spec;
    Pose pose;
};

constexpr int kGround = -1;
constexpr int kNone = -1;

struct SceneState {
    std::vector<SceneObject> objects;
    std::map<int, int> support_of;     // object id -> supporting object id or kGround
    std::map<int, int> contained_in;   // object id -> container id or kNone

    const SceneObject* find(int id) const;
    SceneObject* find(int id);
    int index_of(int id) const;  // -1 when absent
};

struct Segment {
    int segment_id = 0;
    SemanticClass semantic_class = SemanticClass::cuboid;
    std::vector<Vec3> points;
};

struct SegmentedCloud {
    std::vector<Segment> segments;

    const Segment* find(int id) const;
    Vec3 centroid(int seg_index) const;
};

enum class UnaryRel { movable = 0, is_drawer, open };
enum class BinaryRel { left = 0, right, front, behind, above, below, in_contact, boundary, inside };

constexpr int kNumUnary = 3;
constexpr int kNumBinary = 9;

const char* unary_rel_name(UnaryRel r);
const char* binary_rel_name(BinaryRel r);

struct RelationSet {
    std::map<std::pair<int, int>, bool> unary;              // (object, relation)
    std::map<std::tuple<int, int, int>, bool> binary;       // (a, b, relation)

    void set(int obj, UnaryRel r, bool v) { unary[{obj, static_cast<int>(r)}] = v; }
    void set(int a, int b, BinaryRel r, bool v) { binary[{a, b, static_cast<int>(r)}] = v; }
    bool get(int obj, UnaryRel r) const;
    bool get(int a, int b, BinaryRel r) const;
    bool has(int obj, UnaryRel r) const;
    bool has(int a, int b, BinaryRel r) const;
};

// Relation thresholds.
constexpr double kContactTolerance = 0.005;   // m
constexpr double kBoundaryEps = 0.1;          // m
constexpr double kBottomEps = 0.2;            // m, min horizontal extent of the support
constexpr double kVerticalOverlapEps = 1e-6;  // m

// --- Object geometry -------------------------------------------------------

// Objects decompose into yawed box slabs sharing the object's pose; all
// bounding boxes, surfaces and cavity queries derive from this list.
std::vector<Slab> object_slabs(const ObjectSpec& spec);

Aabb object_aabb(const SceneObject& obj);

// Horizontal interior region check for containers (open_box, extended drawer
// tray). Returns the cavity floor height when (px, py) lies inside.
std::optional<double> cavity_floor_at(const SceneObject& obj, double px, double py);

// True when a box with the given horizontal world AABB fits inside the
// cavity of `container` (used to decide rim vs. interior support).
bool cavity_fits(const SceneObject& container, const Aabb& box);

double support_top(const SceneObject& obj);

// |distance| from a world point to the object's surface.
double surface_distance(const SceneObject& obj, const Vec3& p);

// --- Operations ------------------------------------------------------------

// Snaps every movable object onto its support surface (z only), reassigning
// supports whose footprint no longer covers the object, then recomputes the
// containment map from settled bounding boxes. Throws "support-cycle" on a
// cyclic support graph.
SceneState settle(const SceneState& scene);

// Derives a support id for object `id` by dropping it onto the highest
// surface whose horizontal footprint covers its center. Excludes objects
// transitively supported by `id`.
int derive_support(const SceneState& scene, int id);

SegmentedCloud render_cloud(const SceneState& scene, int n_points_per_segment,
                            double noise_sigma, Rng rng);

// Segment-wise rigid transform from reference poses to target poses:
// rotation by delta-yaw about the vertical axis through the segment centroid,
// then translation by delta-position. One target pose per segment, in
// segment order.
SegmentedCloud transform_cloud(const SegmentedCloud& cloud, const SceneState& reference,
                               const std::vector<Pose>& target_poses);

RelationSet detect_relations_geometric(const SceneState& scene);

// --- Scene file format ------------------------------------------------------

std::string scene_to_text(const SceneState& scene);
SceneState scene_from_text(const std::string& text, size_t* pos = nullptr);
void save_scenes(const std::string& path, const std::vector<SceneState>& scenes);
std::vector<SceneState> load_scenes(const std::string& path);

void save_cloud(const std::string& path, const SegmentedCloud& cloud);
SegmentedCloud load_cloud(const std::string& path);

}  // namespace relearn
