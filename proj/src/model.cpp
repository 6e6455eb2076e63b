#include "relearn/model.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "relearn/parallel.hpp"
#include "relearn/rng.hpp"

namespace relearn {

using ad::Tape;
using ad::Var;

namespace {

enum ParamId {
    enc_w1, enc_b1, enc_w2, enc_b2,
    skill_w1, skill_b1, skill_w2, skill_b2,
    attn_wq, attn_wk, attn_wv,
    dyn_w1, dyn_b1, dyn_w2, dyn_b2,
    pos_w1, pos_b1, pos_w2, pos_b2, pos_w3, pos_b3,
    un_w1, un_b1, un_w2, un_b2,
    bin_w1, bin_b1, bin_w2, bin_b2, bin_w3, bin_b3,
    kParamCount
};

int pair_count(int n) { return n * (n - 1); }

int pair_index(int i, int j, int n) {
    (void)n;
    return i * (n - 1) + (j < i ? j : j - 1);
}

}  // namespace

double entropy_objective(const std::vector<double>& probs) {
    double acc = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0 && p <= 1.0))
            throw std::runtime_error("entropy_objective: probability outside [0,1]");
        if (p > 0.0 && p < 1.0) acc += -p * std::log(p) - (1.0 - p) * std::log(1.0 - p);
    }
    return acc;
}

// --- parameter bookkeeping -----------------------------------------------------

void SkillEffectModel::build_views() {
    int h = cfg_.enc_hidden, pf = cfg_.point_feat, L = cfg_.latent_dim();
    int dh = cfg_.dyn_hidden, dc = cfg_.dec_hidden;
    int skill_in = kMaxSkillParams + kNumPrimitives;
    auto shape = [&](ParamId id) -> std::pair<int, int> {
        switch (id) {
            case enc_w1: return {6, h};
            case enc_b1: return {1, h};
            case enc_w2: return {h, pf};
            case enc_b2: return {1, pf};
            case skill_w1: return {skill_in, h};
            case skill_b1: return {1, h};
            case skill_w2: return {h, pf};
            case skill_b2: return {1, pf};
            case attn_wq:
            case attn_wk:
            case attn_wv: return {L, L};
            case dyn_w1: return {3 * L, dh};
            case dyn_b1: return {1, dh};
            case dyn_w2: return {dh, L};
            case dyn_b2: return {1, L};
            case pos_w1: return {L, dc};
            case pos_b1: return {1, dc};
            case pos_w2: return {dc, dc};
            case pos_b2: return {1, dc};
            case pos_w3: return {dc, 3};
            case pos_b3: return {1, 3};
            case un_w1: return {L, dc};
            case un_b1: return {1, dc};
            case un_w2: return {dc, 2 * kNumUnary};
            case un_b2: return {1, 2 * kNumUnary};
            case bin_w1: return {2 * L, dc};
            case bin_b1: return {1, dc};
            case bin_w2: return {dc, dc};
            case bin_b2: return {1, dc};
            case bin_w3: return {dc, 2 * kNumBinary};
            case bin_b3: return {1, 2 * kNumBinary};
            default: return {0, 0};
        }
    };
    views_.clear();
    int offset = 0;
    for (int id = 0; id < kParamCount; ++id) {
        auto [r, c] = shape(static_cast<ParamId>(id));
        views_.push_back({offset, r, c});
        offset += r * c;
    }
    params_.assign(offset, 0.0);
}

void SkillEffectModel::init_params() {
    Rng rng(cfg_.init_seed);
    for (int id = 0; id < kParamCount; ++id) {
        const ParamView& v = views_[id];
        bool is_bias = v.rows == 1 && id != attn_wq && id != attn_wk && id != attn_wv;
        // output heads start at zero so untrained relation probabilities are 0.5
        bool zero_head = id == pos_w3 || id == pos_b3 || id == un_w2 || id == un_b2 ||
                         id == bin_w3 || id == bin_b3;
        double bound = std::sqrt(6.0 / (v.rows + v.cols));
        for (int i = 0; i < v.rows * v.cols; ++i) {
            double val = 0.0;
            if (!is_bias && !zero_head) val = rng.uniform(-bound, bound);
            params_[v.offset + i] = val;
        }
    }
}

SkillEffectModel::SkillEffectModel(const ModelConfig& cfg) : cfg_(cfg) {
    build_views();
    init_params();
}

void SkillEffectModel::zero_relation_heads() {
    for (int id : {static_cast<int>(un_w2), static_cast<int>(un_b2), static_cast<int>(bin_w3),
                   static_cast<int>(bin_b3), static_cast<int>(pos_w3), static_cast<int>(pos_b3)}) {
        const ParamView& v = views_[id];
        std::fill(params_.begin() + v.offset, params_.begin() + v.offset + v.rows * v.cols, 0.0);
    }
}

std::vector<double> SkillEffectModel::id_encoding(int object_id) const {
    std::vector<double> enc(cfg_.id_dim);
    for (int k = 0; k < cfg_.id_dim; k += 2) {
        double freq = std::pow(10000.0, -static_cast<double>(k) / cfg_.id_dim);
        enc[k] = std::sin(object_id * freq);
        if (k + 1 < cfg_.id_dim) enc[k + 1] = std::cos(object_id * freq);
    }
    return enc;
}

// --- forward graph ---------------------------------------------------------------

struct ModelGraph {
    const SkillEffectModel& model;
    const ModelConfig& cfg;
    Tape tape;
    std::vector<Var> pv;
    bool trainable;

    ModelGraph(const SkillEffectModel& m, bool train)
        : model(m), cfg(m.cfg_), pv(kParamCount), trainable(train) {
        for (int id = 0; id < kParamCount; ++id) {
            const auto& v = m.views_[id];
            const double* data = m.params_.data() + v.offset;
            pv[id] = trainable ? tape.input(data, v.rows, v.cols)
                               : tape.constant(data, v.rows, v.cols);
        }
    }

    Var linear(Var x, int w, int b) {
        return tape.add_rowvec(tape.matmul(x, pv[w]), pv[b]);
    }

    // Centroid channel uses the bounding-box center: exactly invariant to
    // point order and duplication, which the mean is not in floating point.
    Var encode_segment(Var pts, int seg_id) {
        int n = tape.rows(pts);
        Var hi = tape.maxpool_rows(pts);
        Var lo = tape.scale(tape.maxpool_rows(tape.scale(pts, -1.0)), -1.0);
        Var centroid = tape.scale(tape.add(hi, lo), 0.5);
        Var centered = tape.sub(pts, tape.broadcast_rows(centroid, n));
        Var feat = tape.concat_cols(centered, tape.broadcast_rows(centroid, n));
        Var h1 = tape.relu(linear(feat, enc_w1, enc_b1));
        Var h2 = tape.relu(linear(h1, enc_w2, enc_b2));
        Var pooled = tape.maxpool_rows(h2);
        std::vector<double> id_enc = model.id_encoding(seg_id);
        Var idv = tape.constant(id_enc.data(), 1, cfg.id_dim);
        return tape.concat_cols(pooled, idv);
    }

    Var encode_cloud_const(const SegmentedCloud& cloud) {
        std::vector<Var> latents;
        latents.reserve(cloud.segments.size());
        for (const auto& seg : cloud.segments) {
            std::vector<double> flat(seg.points.size() * 3);
            for (size_t i = 0; i < seg.points.size(); ++i) {
                flat[i * 3] = seg.points[i].x;
                flat[i * 3 + 1] = seg.points[i].y;
                flat[i * 3 + 2] = seg.points[i].z;
            }
            Var pts = tape.constant(flat.data(), static_cast<int>(seg.points.size()), 3);
            latents.push_back(encode_segment(pts, seg.segment_id));
        }
        return tape.stack_rows(latents);
    }

    // Skill embedding: params MLP ⊕ target id encoding. `action_leaf` substitutes
    // the raw parameter vector when action gradients are required.
    Var skill_token(const SkillInstance& skill, Var action_leaf = {}) {
        int np = static_cast<int>(skill.params.size());
        Var raw;
        if (action_leaf.valid()) {
            raw = action_leaf;
        } else {
            raw = tape.constant(skill.params.data(), 1, np);
        }
        std::vector<double> tail(kMaxSkillParams - np + kNumPrimitives, 0.0);
        tail[kMaxSkillParams - np + static_cast<int>(skill.primitive)] = 1.0;
        Var tailv = tape.constant(tail.data(), 1, static_cast<int>(tail.size()));
        Var in = tape.concat_cols(raw, tailv);
        Var h = tape.relu(linear(in, skill_w1, skill_b1));
        Var emb = linear(h, skill_w2, skill_b2);
        std::vector<double> id_enc = model.id_encoding(skill.target_object);
        Var idv = tape.constant(id_enc.data(), 1, cfg.id_dim);
        return tape.concat_cols(emb, idv);
    }

    // One round of pairwise attention over object latents plus the skill
    // token; the per-object update is additionally conditioned on the token
    // directly so parameter information does not have to survive the softmax.
    Var dynamics_delta(Var X, Var token) {
        int n = tape.rows(X);
        Var T = tape.vstack(X, token);
        Var q = tape.matmul(T, pv[attn_wq]);
        Var k = tape.matmul(T, pv[attn_wk]);
        Var v = tape.matmul(T, pv[attn_wv]);
        Var scores = tape.scale(tape.matmul_nt(q, k), 1.0 / std::sqrt(cfg.latent_dim()));
        Var attn = tape.matmul(tape.softmax_rows(scores), v);
        Var cond = tape.broadcast_rows(token, n + 1);
        Var h = tape.relu(linear(tape.concat_cols(tape.concat_cols(T, attn), cond),
                                 dyn_w1, dyn_b1));
        Var delta_all = linear(h, dyn_w2, dyn_b2);
        return tape.slice_rows(delta_all, 0, n);
    }

    Var unary_logits(Var X) {
        Var h = tape.relu(linear(X, un_w1, un_b1));
        Var lg = linear(h, un_w2, un_b2);
        return tape.reshape(lg, tape.rows(X) * kNumUnary, 2);
    }

    // Invalid for single-segment clouds; callers skip binary terms when n == 1.
    Var binary_logits(Var X) {
        int n = tape.rows(X);
        std::vector<Var> rows;
        rows.reserve(pair_count(n));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                rows.push_back(tape.concat_cols(tape.slice_row(X, i), tape.slice_row(X, j)));
            }
        Var P = tape.stack_rows(rows);
        Var h1 = tape.relu(linear(P, bin_w1, bin_b1));
        Var h2 = tape.relu(linear(h1, bin_w2, bin_b2));
        Var lg = linear(h2, bin_w3, bin_b3);
        return tape.reshape(lg, pair_count(n) * kNumBinary, 2);
    }

    Var pos_deltas(Var dX) {
        Var h1 = tape.relu(linear(dX, pos_w1, pos_b1));
        Var h2 = tape.relu(linear(h1, pos_w2, pos_b2));
        return linear(h2, pos_w3, pos_b3);
    }
};

namespace {

std::vector<double> probs_from_logits(const Tape& tape, Var logits) {
    int m = tape.rows(logits);
    const double* pl = tape.val(logits);
    std::vector<double> out(m);
    for (int i = 0; i < m; ++i)
        out[i] = 1.0 / (1.0 + std::exp(-(pl[i * 2 + 1] - pl[i * 2])));
    return out;
}

PredictStep extract_step(ModelGraph& g, Var X, Var delta) {
    PredictStep step;
    step.unary_prob = probs_from_logits(g.tape, g.unary_logits(X));
    if (g.tape.rows(X) > 1)
        step.binary_prob = probs_from_logits(g.tape, g.binary_logits(X));
    if (delta.valid()) {
        Var dp = g.pos_deltas(delta);
        step.pos_delta.assign(g.tape.val(dp),
                              g.tape.val(dp) + g.tape.rows(dp) * 3);
    }
    return step;
}

// slot -> row in the unary/binary logit matrices (cloud segment order)
int slot_row(const RelSlot& slot, const std::vector<int>& ids) {
    int n = static_cast<int>(ids.size());
    auto index_of = [&](int id) {
        for (int i = 0; i < n; ++i)
            if (ids[i] == id) return i;
        throw std::runtime_error("relation slot references unknown segment id");
    };
    if (slot.is_unary) return index_of(slot.a) * kNumUnary + slot.rel;
    int i = index_of(slot.a), j = index_of(slot.b);
    if (i == j) throw std::runtime_error("binary relation slot with identical objects");
    return pair_index(i, j, n) * kNumBinary + slot.rel;
}

}  // namespace

std::vector<double> SkillEffectModel::encode(const SegmentedCloud& cloud) const {
    if (cloud.segments.empty()) throw std::runtime_error("encode: empty cloud");
    ModelGraph g(*this, false);
    Var X = g.encode_cloud_const(cloud);
    return std::vector<double>(g.tape.val(X),
                               g.tape.val(X) + cloud.segments.size() * cfg_.latent_dim());
}

Prediction SkillEffectModel::predict(const SegmentedCloud& cloud,
                                     const std::vector<SkillInstance>& skills) const {
    if (cloud.segments.empty()) throw std::runtime_error("predict: empty cloud");
    for (const auto& s : skills)
        if (cloud.find(s.target_object) == nullptr)
            throw std::runtime_error("predict: skill targets unknown segment id");
    Prediction out;
    for (const auto& seg : cloud.segments) out.segment_ids.push_back(seg.segment_id);
    ModelGraph g(*this, false);
    Var X = g.encode_cloud_const(cloud);
    out.detection = extract_step(g, X, {});
    for (const auto& skill : skills) {
        Var token = g.skill_token(skill);
        Var delta = g.dynamics_delta(X, token);
        X = g.tape.add(X, delta);
        out.steps.push_back(extract_step(g, X, delta));
    }
    return out;
}

Prediction SkillEffectModel::predict_from_latent(const std::vector<double>& latent,
                                                 const std::vector<int>& segment_ids,
                                                 const std::vector<SkillInstance>& skills) const {
    int n = static_cast<int>(segment_ids.size());
    if (latent.size() != static_cast<size_t>(n) * cfg_.latent_dim())
        throw std::runtime_error("predict_from_latent: latent size mismatch");
    Prediction out;
    out.segment_ids = segment_ids;
    ModelGraph g(*this, false);
    Var X = g.tape.constant(latent.data(), n, cfg_.latent_dim());
    out.detection = extract_step(g, X, {});
    for (const auto& skill : skills) {
        Var token = g.skill_token(skill);
        Var delta = g.dynamics_delta(X, token);
        X = g.tape.add(X, delta);
        out.steps.push_back(extract_step(g, X, delta));
    }
    return out;
}

RelationSet Prediction::step_relations(int step) const {
    const PredictStep& s = step < 0 ? detection : steps.at(step);
    RelationSet out;
    int n = static_cast<int>(segment_ids.size());
    for (int i = 0; i < n; ++i)
        for (int r = 0; r < kNumUnary; ++r)
            out.set(segment_ids[i], static_cast<UnaryRel>(r),
                    s.unary_prob[i * kNumUnary + r] > 0.5);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            for (int r = 0; r < kNumBinary; ++r)
                out.set(segment_ids[i], segment_ids[j], static_cast<BinaryRel>(r),
                        s.binary_prob[pair_index(i, j, n) * kNumBinary + r] > 0.5);
        }
    return out;
}

double Prediction::prob_of(int step, const RelSlot& slot) const {
    const PredictStep& s = step < 0 ? detection : steps.at(step);
    int row = slot_row(slot, segment_ids);
    return slot.is_unary ? s.unary_prob[row] : s.binary_prob[row];
}

// --- training ---------------------------------------------------------------------

namespace {

// Rare positive labels (contained objects, open drawers, boundary cases) are
// upweighted so the heads cannot win by predicting the majority class.
constexpr double kRarePositiveWeight = 8.0;

void gather_labels(const RelationSet& rels, const std::vector<int>& ids,
                   std::vector<int>& unary_out, std::vector<int>& binary_out,
                   std::vector<double>* unary_w = nullptr,
                   std::vector<double>* binary_w = nullptr) {
    int n = static_cast<int>(ids.size());
    unary_out.clear();
    binary_out.clear();
    for (int i = 0; i < n; ++i)
        for (int r = 0; r < kNumUnary; ++r) {
            bool v = rels.get(ids[i], static_cast<UnaryRel>(r));
            unary_out.push_back(v ? 1 : 0);
            if (unary_w) {
                bool rare = r == static_cast<int>(UnaryRel::is_drawer) ||
                            r == static_cast<int>(UnaryRel::open);
                unary_w->push_back(v && rare ? kRarePositiveWeight : 1.0);
            }
        }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            for (int r = 0; r < kNumBinary; ++r) {
                bool v = rels.get(ids[i], ids[j], static_cast<BinaryRel>(r));
                binary_out.push_back(v ? 1 : 0);
                if (binary_w) {
                    bool rare = r == static_cast<int>(BinaryRel::inside) ||
                                r == static_cast<int>(BinaryRel::boundary);
                    binary_w->push_back(v && rare ? kRarePositiveWeight : 1.0);
                }
            }
        }
}

struct RecordLoss {
    LossTerms terms;
    Var total;
};

RecordLoss record_loss(ModelGraph& g, const TransitionRecord& rec, const TrainConfig& cfg,
                       const SkillEffectModel* target_encoder) {
    Tape& t = g.tape;
    std::vector<int> ids;
    for (const auto& seg : rec.pre_cloud.segments) ids.push_back(seg.segment_id);
    int n = static_cast<int>(ids.size());

    Var X = g.encode_cloud_const(rec.pre_cloud);

    std::vector<int> lab_u, lab_b;
    std::vector<double> w_u, w_b;
    gather_labels(rec.pre_relations, ids, lab_u, lab_b, &w_u, &w_b);
    double wu = static_cast<double>(lab_u.size()) / (lab_u.size() + lab_b.size());
    Var l_det = t.mean_ce(g.unary_logits(X), lab_u, w_u);
    if (!lab_b.empty())
        l_det = t.add_scalars({t.scale(l_det, wu),
                               t.scale(t.mean_ce(g.binary_logits(X), lab_b, w_b), 1.0 - wu)});

    Var token = g.skill_token(rec.skill);
    Var delta = g.dynamics_delta(X, token);
    Var X1 = t.add(X, delta);

    // Target latent from the next observation; gradients stop at the target.
    const SkillEffectModel& tgt = target_encoder ? *target_encoder : g.model;
    std::vector<double> target = tgt.encode(rec.post_cloud);
    Var Xt = t.constant(target.data(), n, g.cfg.latent_dim());
    Var l_reg = t.sum_squares(t.sub(X1, Xt));

    std::vector<double> dp_true(n * 3);
    for (int i = 0; i < n; ++i) {
        const SceneObject* pre = rec.pre_state.find(ids[i]);
        const SceneObject* post = rec.post_state.find(ids[i]);
        Vec3 d = post->pose.position - pre->pose.position;
        dp_true[i * 3] = d.x;
        dp_true[i * 3 + 1] = d.y;
        dp_true[i * 3 + 2] = d.z;
    }
    Var dp_err = t.sub(g.pos_deltas(delta), t.constant(dp_true.data(), n, 3));
    Var l_pos = t.scale(t.sqrt_scalar(t.scale(t.norm_fro(dp_err), cfg.pos_a)), cfg.pos_b);

    std::vector<int> lab_u1, lab_b1;
    std::vector<double> w_u1, w_b1;
    gather_labels(rec.post_relations, ids, lab_u1, lab_b1, &w_u1, &w_b1);
    Var l_pred = t.mean_ce(g.unary_logits(X1), lab_u1, w_u1);
    if (!lab_b1.empty())
        l_pred = t.add_scalars({t.scale(l_pred, wu),
                                t.scale(t.mean_ce(g.binary_logits(X1), lab_b1, w_b1), 1.0 - wu)});

    RecordLoss out;
    out.terms.detection = t.scalar(l_det);
    out.terms.regularization = t.scalar(l_reg);
    out.terms.position = t.scalar(l_pos);
    out.terms.prediction = t.scalar(l_pred);
    out.total = t.add_scalars({l_det, l_reg, l_pos, l_pred});
    return out;
}

}  // namespace

LossTerms SkillEffectModel::training_loss(const std::vector<const TransitionRecord*>& batch,
                                          const TrainConfig& cfg, std::vector<double>* grad,
                                          const SkillEffectModel* target_encoder) const {
    if (batch.empty()) throw std::runtime_error("training_loss: empty batch");
    if (grad) grad->assign(params_.size(), 0.0);
    LossTerms mean;
    double inv = 1.0 / batch.size();
    for (const TransitionRecord* rec : batch) {
        ModelGraph g(*this, grad != nullptr);
        RecordLoss rl = record_loss(g, *rec, cfg, target_encoder);
        mean.detection += rl.terms.detection * inv;
        mean.regularization += rl.terms.regularization * inv;
        mean.position += rl.terms.position * inv;
        mean.prediction += rl.terms.prediction * inv;
        if (grad) {
            g.tape.backward(rl.total);
            for (int id = 0; id < kParamCount; ++id) {
                const ParamView& v = views_[id];
                const double* gp = g.tape.grad(g.pv[id]);
                double* dst = grad->data() + v.offset;
                for (int i = 0; i < v.rows * v.cols; ++i) dst[i] += gp[i] * inv;
            }
        }
    }
    return mean;
}

TrainResult SkillEffectModel::train(const std::vector<TransitionRecord>& dataset, int epochs,
                                    const TrainConfig& cfg) {
    if (dataset.empty()) throw std::runtime_error("train: empty dataset");
    TrainResult result;
    size_t np = params_.size();
    std::vector<double> m(np, 0.0), v(np, 0.0);
    double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    long step = 0;
    std::vector<double> snapshot = params_;
    std::vector<size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < epochs; ++epoch) {
        Rng shuffle_rng = Rng(cfg.seed).split(1000 + epoch);
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_int(static_cast<int>(i))]);

        LossTerms epoch_mean;
        int batches = 0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            size_t end = std::min(order.size(), start + cfg.batch_size);
            int bn = static_cast<int>(end - start);
            std::vector<LossTerms> terms(bn);
            std::vector<std::vector<double>> grads(bn);
            parallel_for(bn, cfg.threads, [&](int k) {
                ModelGraph g(*this, true);
                RecordLoss rl = record_loss(g, dataset[order[start + k]], cfg, nullptr);
                terms[k] = rl.terms;
                g.tape.backward(rl.total);
                grads[k].resize(np);
                for (int id = 0; id < kParamCount; ++id) {
                    const ParamView& pvw = views_[id];
                    const double* gp = g.tape.grad(g.pv[id]);
                    std::memcpy(grads[k].data() + pvw.offset, gp,
                                sizeof(double) * pvw.rows * pvw.cols);
                }
            });
            std::vector<double> g(np, 0.0);
            LossTerms batch_mean;
            for (int k = 0; k < bn; ++k) {
                for (size_t i = 0; i < np; ++i) g[i] += grads[k][i] / bn;
                batch_mean.detection += terms[k].detection / bn;
                batch_mean.regularization += terms[k].regularization / bn;
                batch_mean.position += terms[k].position / bn;
                batch_mean.prediction += terms[k].prediction / bn;
            }
            if (!std::isfinite(batch_mean.total())) {
                params_ = snapshot;
                result.diverged = true;
                return result;
            }
            ++step;
            double bc1 = 1.0 - std::pow(b1, step), bc2 = 1.0 - std::pow(b2, step);
            for (size_t i = 0; i < np; ++i) {
                m[i] = b1 * m[i] + (1 - b1) * g[i];
                v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
                params_[i] -= cfg.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
            }
            epoch_mean.detection += batch_mean.detection;
            epoch_mean.regularization += batch_mean.regularization;
            epoch_mean.position += batch_mean.position;
            epoch_mean.prediction += batch_mean.prediction;
            ++batches;
        }
        epoch_mean.detection /= batches;
        epoch_mean.regularization /= batches;
        epoch_mean.position /= batches;
        epoch_mean.prediction /= batches;
        result.curve.push_back(epoch_mean);
        snapshot = params_;
    }
    return result;
}

// --- inference-time gradients ---------------------------------------------------

InputGradients SkillEffectModel::pose_log_prob_gradients(
    const SegmentedCloud& cloud, const std::vector<int>& movable_ids,
    const std::vector<Pose>& reference_poses, const std::vector<double>& pose_params,
    const std::vector<RelSlot>& slots) const {
    if (movable_ids.size() != reference_poses.size() ||
        pose_params.size() != movable_ids.size() * 3)
        throw std::runtime_error("pose_log_prob_gradients: size mismatch");

    ModelGraph g(*this, false);
    Tape& t = g.tape;
    std::vector<Var> pose_leaves(movable_ids.size());
    for (size_t k = 0; k < movable_ids.size(); ++k)
        pose_leaves[k] = t.input(pose_params.data() + k * 3, 1, 3);

    std::vector<int> ids;
    std::vector<Var> latents;
    for (size_t si = 0; si < cloud.segments.size(); ++si) {
        const Segment& seg = cloud.segments[si];
        ids.push_back(seg.segment_id);
        std::vector<double> flat(seg.points.size() * 3);
        for (size_t i = 0; i < seg.points.size(); ++i) {
            flat[i * 3] = seg.points[i].x;
            flat[i * 3 + 1] = seg.points[i].y;
            flat[i * 3 + 2] = seg.points[i].z;
        }
        auto mv = std::find(movable_ids.begin(), movable_ids.end(), seg.segment_id);
        Var pts;
        if (mv != movable_ids.end()) {
            size_t k = mv - movable_ids.begin();
            Vec3 c = cloud.centroid(static_cast<int>(si));
            const Pose& ref = reference_poses[k];
            pts = t.transform_segment(pose_leaves[k], flat,
                                      static_cast<int>(seg.points.size()), c.x, c.y,
                                      ref.position.x, ref.position.y, ref.yaw);
        } else {
            pts = t.constant(flat.data(), static_cast<int>(seg.points.size()), 3);
        }
        latents.push_back(g.encode_segment(pts, seg.segment_id));
    }
    Var X = t.stack_rows(latents);
    Var lg_u = g.unary_logits(X);
    bool need_binary = false;
    for (const auto& slot : slots) need_binary = need_binary || !slot.is_unary;
    Var lg_b = need_binary ? g.binary_logits(X) : Var{};

    std::vector<Var> slot_rows;
    std::vector<int> labels;
    for (const auto& slot : slots) {
        int row = slot_row(slot, ids);
        slot_rows.push_back(t.slice_row(slot.is_unary ? lg_u : lg_b, row));
        labels.push_back(slot.value ? 1 : 0);
    }
    InputGradients out;
    out.pose_grad.assign(movable_ids.size() * 3, 0.0);
    out.satisfied = true;
    if (slot_rows.empty()) {
        out.objective = 0.0;
        return out;
    }
    Var gathered = t.stack_rows(slot_rows);
    Var obj = t.sum_log_prob(gathered, labels);
    t.backward(obj);
    out.objective = t.scalar(obj);
    for (size_t k = 0; k < movable_ids.size(); ++k) {
        const double* gp = t.grad(pose_leaves[k]);
        for (int d = 0; d < 3; ++d) out.pose_grad[k * 3 + d] = gp[d];
    }
    std::vector<double> probs = probs_from_logits(t, gathered);
    out.slot_probs = probs;
    for (size_t i = 0; i < slots.size(); ++i)
        if ((probs[i] > 0.5) != slots[i].value) out.satisfied = false;
    return out;
}

InputGradients SkillEffectModel::action_entropy_gradients(
    const SegmentedCloud& cloud, const SkillInstance& skill,
    const std::vector<double>& action_params, const std::vector<RelSlot>& slots) const {
    if (action_params.size() != skill.params.size())
        throw std::runtime_error("action_entropy_gradients: parameter size mismatch");
    ModelGraph g(*this, false);
    Tape& t = g.tape;
    Var action = t.input(action_params.data(), 1, static_cast<int>(action_params.size()));

    std::vector<int> ids;
    for (const auto& seg : cloud.segments) ids.push_back(seg.segment_id);
    Var X = g.encode_cloud_const(cloud);
    Var token = g.skill_token(skill, action);
    Var delta = g.dynamics_delta(X, token);
    Var X1 = t.add(X, delta);
    Var lg_u = g.unary_logits(X1);
    bool need_binary = false;
    for (const auto& slot : slots) need_binary = need_binary || !slot.is_unary;
    Var lg_b = need_binary ? g.binary_logits(X1) : Var{};

    std::vector<Var> slot_rows;
    for (const auto& slot : slots)
        slot_rows.push_back(t.slice_row(slot.is_unary ? lg_u : lg_b, slot_row(slot, ids)));
    InputGradients out;
    out.action_grad.assign(action_params.size(), 0.0);
    if (slot_rows.empty()) {
        out.objective = 0.0;
        return out;
    }
    Var gathered = t.stack_rows(slot_rows);
    Var h = t.bernoulli_entropy_sum(gathered);
    t.backward(h);
    out.objective = t.scalar(h);
    const double* gp = t.grad(action);
    for (size_t i = 0; i < action_params.size(); ++i) out.action_grad[i] = gp[i];
    out.slot_probs = probs_from_logits(t, gathered);
    out.satisfied = true;
    for (size_t i = 0; i < slots.size(); ++i)
        if ((out.slot_probs[i] > 0.5) != slots[i].value) out.satisfied = false;
    return out;
}

// --- persistence --------------------------------------------------------------------

void SkillEffectModel::save_checkpoint(const std::string& path) const {
    nlohmann::json manifest;
    manifest["version"] = 1;
    manifest["point_feat"] = cfg_.point_feat;
    manifest["id_dim"] = cfg_.id_dim;
    manifest["enc_hidden"] = cfg_.enc_hidden;
    manifest["dyn_hidden"] = cfg_.dyn_hidden;
    manifest["dec_hidden"] = cfg_.dec_hidden;
    manifest["init_seed"] = cfg_.init_seed;
    manifest["param_count"] = params_.size();
    nlohmann::json shapes = nlohmann::json::array();
    for (const auto& v : views_) shapes.push_back({v.offset, v.rows, v.cols});
    manifest["shapes"] = shapes;
    std::string mj = manifest.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    const char magic[8] = {'R', 'L', 'C', 'K', '0', '0', '0', '1'};
    f.write(magic, 8);
    uint64_t len = mj.size();
    f.write(reinterpret_cast<const char*>(&len), 8);
    f.write(mj.data(), static_cast<std::streamsize>(len));
    f.write(reinterpret_cast<const char*>(params_.data()),
            static_cast<std::streamsize>(sizeof(double) * params_.size()));
}

SkillEffectModel SkillEffectModel::load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    char magic[8];
    f.read(magic, 8);
    if (std::string(magic, 8) != "RLCK0001")
        throw std::runtime_error("bad checkpoint magic: " + path);
    uint64_t len = 0;
    f.read(reinterpret_cast<char*>(&len), 8);
    std::string mj(len, '\0');
    f.read(mj.data(), static_cast<std::streamsize>(len));
    nlohmann::json manifest = nlohmann::json::parse(mj);
    ModelConfig cfg;
    cfg.point_feat = manifest.at("point_feat").get<int>();
    cfg.id_dim = manifest.at("id_dim").get<int>();
    cfg.enc_hidden = manifest.at("enc_hidden").get<int>();
    cfg.dyn_hidden = manifest.at("dyn_hidden").get<int>();
    cfg.dec_hidden = manifest.at("dec_hidden").get<int>();
    cfg.init_seed = manifest.at("init_seed").get<uint64_t>();
    SkillEffectModel model(cfg);
    size_t count = manifest.at("param_count").get<size_t>();
    if (count != model.params_.size())
        throw std::runtime_error("checkpoint parameter count mismatch");
    f.read(reinterpret_cast<char*>(model.params_.data()),
           static_cast<std::streamsize>(sizeof(double) * count));
    if (!f) throw std::runtime_error("truncated checkpoint: " + path);
    return model;
}

}  // namespace relearn
