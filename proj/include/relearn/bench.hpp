#pragma once

#include <string>
#include <vector>

#include "relearn/failure.hpp"
#include "relearn/model.hpp"
#include "relearn/planner.hpp"
#include "relearn/real2sim.hpp"
#include "relearn/simkin.hpp"
#include "relearn/stein.hpp"

namespace relearn {

// --- container-transport task -----------------------------------------------

struct TransportTaskConfig {
    SceneConfig scene;           // two tables by default
    Vec3 box_dims = {0.3, 0.3, 0.12};
    double cube_side = 0.06;
    int n_cubes_in_box = 2;
    int n_distractors = 1;
};

struct TransportInstance {
    SceneState world;
    Goal goal;                       // cubes and box above the destination table
    std::vector<SkeletonStep> skeleton;  // single pick_place of the box
    int box_id = 0;
    int dest_table_id = 0;
    std::vector<int> cube_ids;
};

TransportInstance make_transport_instance(const TransportTaskConfig& cfg, Rng rng);

// --- dataset generation methods ------------------------------------------------

enum class GenMethod { svgd, gradient, sampling };
const char* gen_method_name(GenMethod m);
GenMethod gen_method_from_name(const std::string& name);

struct GenResult {
    std::vector<TransitionRecord> dataset;  // D+
    double wall_seconds = 0.0;
    double satisfaction_rate = 0.0;         // state particles, detection head
    double action_translation_std = 0.0;    // stddev of (dx, dy) around their mean
    int requested = 0;
    int accepted = 0;                       // < requested when sampling exhausts
    bool budget_exhausted = false;
};

// svgd: two-stage Stein inference; gradient: same objectives, kernel removed,
// particles optimized sequentially and independently; sampling: rejection with
// a draw budget of 50*M per particle.
GenResult baseline_generate(GenMethod method, const FailureEvent& failure,
                            const SkillEffectModel& model, const SteinConfig& stein,
                            const RenderConfig& render);

// --- benchmark -------------------------------------------------------------------

struct BenchConfig {
    ModelConfig model;
    TrainConfig train;
    TransportTaskConfig task;
    SteinConfig stein;
    EpisodeConfig episode;
    RenderConfig render;
    int pretrain_records = 4000;
    int finetune_epochs = 200;
    int large_extra_records = 200;
    int small_extra_records = 20;
    int eval_trials = 50;
    std::vector<uint64_t> seeds = {1, 2, 3};
    std::string checkpoint_path;  // loaded if present, else trained and saved
    std::string outdir = "bench_out";
};

struct ConditionOutcome {
    std::string condition;
    uint64_t seed = 0;
    double success_rate = 0.0;
    double generation_seconds = 0.0;  // D+ construction, when applicable
    double finetune_seconds = 0.0;
};

struct BenchReport {
    std::vector<ConditionOutcome> outcomes;
    // per-seed ordering checks used by the acceptance gate
    int seeds_f2p_beats_sampling = 0;
    int seeds_f2p_beats_gradient = 0;
    int seeds_f2p_beats_replanning = 0;
    int seeds_monotone_data_chain = 0;  // f2p > large >= small >= original
    int n_seeds = 0;
    double success_of(const std::string& condition, uint64_t seed) const;
    double mean_success(const std::string& condition) const;
};

SkillEffectModel pretrain_or_load(const BenchConfig& cfg);

// Provokes a container-transport failure with the pretrained model; retries
// over instances until one is emitted.
FailureEvent provoke_transport_failure(const SkillEffectModel& model, const BenchConfig& cfg,
                                       uint64_t seed);

BenchReport run_benchmark(const BenchConfig& cfg);

// --- noise sweep -------------------------------------------------------------------

struct NoisePoint {
    double sigma = 0.0;
    double sim2real_fraction = 0.0;  // over classified failure events
    double post_finetune_success = 0.0;
    int n_failures = 0;
};

std::vector<NoisePoint> noise_sweep(const BenchConfig& cfg, const std::vector<double>& sigmas);

// --- particle-count ablation ----------------------------------------------------------

struct AblatePoint {
    int particles = 0;
    double success_rate = 0.0;
    double generation_seconds = 0.0;
};

std::vector<AblatePoint> ablate_particles(const BenchConfig& cfg,
                                          const std::vector<int>& particle_counts);

// --- report files ---------------------------------------------------------------------

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);
void write_bar_chart_svg(const std::string& path, const std::string& title,
                         const std::vector<std::string>& labels,
                         const std::vector<double>& values, const std::string& y_label);
void write_line_chart_svg(const std::string& path, const std::string& title,
                          const std::vector<double>& xs,
                          const std::vector<std::vector<double>>& series,
                          const std::vector<std::string>& series_names,
                          const std::string& x_label, const std::string& y_label);
uint64_t fnv1a_file(const std::string& path);
std::string format_double(double v);

void write_bench_report(const BenchConfig& cfg, const BenchReport& report);
void write_noise_report(const BenchConfig& cfg, const std::vector<NoisePoint>& points);
void write_ablation_report(const BenchConfig& cfg, const std::vector<AblatePoint>& points);

}  // namespace relearn
