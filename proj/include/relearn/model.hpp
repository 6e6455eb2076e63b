#pragma once

#include <string>
#include <vector>

#include "relearn/autodiff.hpp"
#include "relearn/scene.hpp"
#include "relearn/simkin.hpp"

namespace relearn {

struct ModelConfig {
    int point_feat = 32;  // pooled per-segment feature width
    int id_dim = 32;      // sinusoidal id encoding width
    int enc_hidden = 64;
    int dyn_hidden = 64;
    int dec_hidden = 64;
    uint64_t init_seed = 1;

    int latent_dim() const { return point_feat + id_dim; }
};

struct TrainConfig {
    double learning_rate = 1e-4;
    int pretrain_epochs = 10;
    int finetune_epochs = 200;
    double pos_a = 12.0;
    double pos_b = 5.0;
    int batch_size = 8;
    uint64_t seed = 0;
    int threads = 2;
};

struct LossTerms {
    double detection = 0, regularization = 0, position = 0, prediction = 0;
    double total() const { return detection + regularization + position + prediction; }
};

struct TrainResult {
    std::vector<LossTerms> curve;  // per epoch, mean over batches
    bool diverged = false;
};

// One relation output slot: either unary (a, rel) or a binary ordered pair.
struct RelSlot {
    bool is_unary = false;
    int a = 0, b = 0;  // segment ids
    int rel = 0;
    bool value = false;  // target / observed truth

    static RelSlot unary(int obj, UnaryRel r, bool v) {
        return {true, obj, -1, static_cast<int>(r), v};
    }
    static RelSlot binary(int a, int b, BinaryRel r, bool v) {
        return {false, a, b, static_cast<int>(r), v};
    }
    bool operator==(const RelSlot& o) const {
        return is_unary == o.is_unary && a == o.a && b == o.b && rel == o.rel;
    }
};

struct PredictStep {
    std::vector<double> unary_prob;   // n*kNumUnary, p(true), cloud segment order
    std::vector<double> binary_prob;  // n*(n-1)*kNumBinary
    std::vector<double> pos_delta;    // n*3
};

struct Prediction {
    std::vector<int> segment_ids;
    PredictStep detection;
    std::vector<PredictStep> steps;

    RelationSet step_relations(int step) const;  // thresholded at 0.5; -1 = detection
    double prob_of(int step, const RelSlot& slot) const;  // p(slot true)
};

struct InputGradients {
    double objective = 0.0;
    // 3 entries (x, y, yaw) per entry of movable_ids, then action params if requested.
    std::vector<double> pose_grad;
    std::vector<double> action_grad;
    std::vector<double> slot_probs;  // p(true) per requested slot
    bool satisfied = false;          // thresholded detection matches every slot value
};

double entropy_objective(const std::vector<double>& probs);  // sum of Bernoulli entropies, nats

class SkillEffectModel {
public:
    explicit SkillEffectModel(const ModelConfig& cfg);

    const ModelConfig& config() const { return cfg_; }
    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }
    size_t param_count() const { return params_.size(); }

    // --- forward -------------------------------------------------------------
    // Latent state for a cloud; rows follow cloud segment order.
    std::vector<double> encode(const SegmentedCloud& cloud) const;

    Prediction predict(const SegmentedCloud& cloud,
                       const std::vector<SkillInstance>& skills) const;

    // Rollout from a precomputed latent (n rows of latent_dim), so shooting
    // samples share one encoding of the observation.
    Prediction predict_from_latent(const std::vector<double>& latent,
                                   const std::vector<int>& segment_ids,
                                   const std::vector<SkillInstance>& skills) const;

    // --- training ------------------------------------------------------------
    // The latent-regularization target is encoded by `target_encoder` (default:
    // this model) and treated as constant: gradients stop at the target branch.
    LossTerms training_loss(const std::vector<const TransitionRecord*>& batch,
                            const TrainConfig& cfg, std::vector<double>* grad,
                            const SkillEffectModel* target_encoder = nullptr) const;

    TrainResult train(const std::vector<TransitionRecord>& dataset, int epochs,
                      const TrainConfig& cfg);

    // --- inference-time gradients ---------------------------------------------
    // Objective "relation_logprob": sum over slots of ln p(slot = value) from the
    // detection head on the pose-transformed cloud; gradients w.r.t. (x, y, yaw)
    // of each movable segment.
    InputGradients pose_log_prob_gradients(const SegmentedCloud& cloud,
                                           const std::vector<int>& movable_ids,
                                           const std::vector<Pose>& reference_poses,
                                           const std::vector<double>& pose_params,
                                           const std::vector<RelSlot>& slots) const;

    // Objective "entropy": sum of Bernoulli entropies of the slot predictions
    // after applying the skill with the given action params; gradients w.r.t.
    // the action parameter vector.
    InputGradients action_entropy_gradients(const SegmentedCloud& cloud,
                                            const SkillInstance& skill,
                                            const std::vector<double>& action_params,
                                            const std::vector<RelSlot>& slots) const;

    // --- persistence -----------------------------------------------------------
    void save_checkpoint(const std::string& path) const;
    static SkillEffectModel load_checkpoint(const std::string& path);

    void zero_relation_heads();  // zeroes decoder output layers (probabilities 0.5)

    std::vector<double> id_encoding(int object_id) const;

private:
    friend struct ModelGraph;
    ModelConfig cfg_;
    std::vector<double> params_;

    struct ParamView {
        int offset, rows, cols;
    };
    std::vector<ParamView> views_;
    void build_views();
    void init_params();
};

}  // namespace relearn
