#include "relearn/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "relearn/parallel.hpp"

namespace relearn {

namespace {

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

}  // namespace

// --- transport task --------------------------------------------------------------

TransportInstance make_transport_instance(const TransportTaskConfig& cfg, Rng rng) {
    if (cfg.scene.table_positions.size() < 2)
        throw std::runtime_error("transport task needs two tables");
    TransportInstance inst;
    SceneState s;
    int next_id = 0;
    for (const auto& tp : cfg.scene.table_positions) {
        SceneObject table;
        table.spec = {next_id++, SemanticClass::table, cfg.scene.table_dims, false, 0.0, 0.01};
        table.pose.position = tp;
        s.objects.push_back(table);
        s.support_of[table.spec.id] = kGround;
    }
    int source_table = 0;
    inst.dest_table_id = 1;
    const Vec3& src = cfg.scene.table_positions[source_table];

    SceneObject box;
    box.spec = {next_id++, SemanticClass::open_box, cfg.box_dims, true, 0.0, 0.01};
    double mx = cfg.scene.table_dims.x / 2 - cfg.box_dims.x / 2 - 0.03;
    double my = cfg.scene.table_dims.y / 2 - cfg.box_dims.y / 2 - 0.03;
    box.pose.position = {src.x + rng.uniform(-mx, mx), src.y + rng.uniform(-my, my),
                         src.z + cfg.scene.table_dims.z / 2 + cfg.box_dims.z / 2};
    box.pose.yaw = rng.uniform(-0.2, 0.2);
    inst.box_id = box.spec.id;
    s.objects.push_back(box);
    s.support_of[inst.box_id] = source_table;

    for (int i = 0; i < cfg.n_cubes_in_box; ++i) {
        SceneObject cube;
        cube.spec = {next_id++, SemanticClass::cuboid,
                     {cfg.cube_side, cfg.cube_side, cfg.cube_side}, true, 0.0, 0.01};
        double hx = cfg.box_dims.x / 2 - 0.01 - cfg.cube_side / 2 - 0.01;
        Vec3 local{rng.uniform(-hx, hx), rng.uniform(-hx, hx), 0};
        // rejection against cubes already placed in the box
        for (int attempt = 0; attempt < 100; ++attempt) {
            bool ok = true;
            for (int j = 0; j < i; ++j) {
                const Vec3& other = s.objects[s.objects.size() - 1 - j].pose.position;
                Vec3 world = box.pose.position + rot_z(box.pose.yaw, local);
                if (std::abs(world.x - other.x) < cfg.cube_side + 0.005 &&
                    std::abs(world.y - other.y) < cfg.cube_side + 0.005)
                    ok = false;
            }
            if (ok) break;
            local = {rng.uniform(-hx, hx), rng.uniform(-hx, hx), 0};
        }
        Vec3 world = box.pose.position + rot_z(box.pose.yaw, local);
        cube.pose.position = {world.x, world.y, box.pose.position.z};
        cube.pose.yaw = normalize_yaw(box.pose.yaw + rng.uniform(-0.2, 0.2));
        inst.cube_ids.push_back(cube.spec.id);
        s.objects.push_back(cube);
        s.support_of[cube.spec.id] = inst.box_id;
    }

    for (int i = 0; i < cfg.n_distractors; ++i) {
        SceneObject d;
        double side = cfg.cube_side * rng.uniform(0.8, 1.2);
        d.spec = {next_id++, SemanticClass::cuboid, {side, side, side}, true, 0.0, 0.01};
        for (int attempt = 0; attempt < 200; ++attempt) {
            int t = rng.uniform_int(static_cast<int>(cfg.scene.table_positions.size()));
            const Vec3& tp = cfg.scene.table_positions[t];
            double dx = cfg.scene.table_dims.x / 2 - side / 2 - 0.02;
            double dy = cfg.scene.table_dims.y / 2 - side / 2 - 0.02;
            d.pose.position = {tp.x + rng.uniform(-dx, dx), tp.y + rng.uniform(-dy, dy),
                               tp.z + cfg.scene.table_dims.z / 2 + side / 2};
            d.pose.yaw = rng.uniform(-M_PI, M_PI);
            bool clear = true;
            for (const auto& o : s.objects)
                if (o.spec.movable && object_aabb(o).overlaps(object_aabb(d))) clear = false;
            if (clear) break;
        }
        s.objects.push_back(d);
        s.support_of[d.spec.id] = derive_support(s, d.spec.id);
    }

    inst.world = settle(s);
    inst.skeleton = {{Primitive::pick_place, inst.box_id}};
    inst.goal.conjuncts.push_back(
        RelSlot::binary(inst.box_id, inst.dest_table_id, BinaryRel::above, true));
    for (int id : inst.cube_ids)
        inst.goal.conjuncts.push_back(
            RelSlot::binary(id, inst.dest_table_id, BinaryRel::above, true));
    return inst;
}

// --- generation methods -----------------------------------------------------------

const char* gen_method_name(GenMethod m) {
    switch (m) {
        case GenMethod::svgd: return "svgd";
        case GenMethod::gradient: return "gradient";
        case GenMethod::sampling: return "sampling";
    }
    return "svgd";
}

GenMethod gen_method_from_name(const std::string& name) {
    if (name == "svgd") return GenMethod::svgd;
    if (name == "gradient") return GenMethod::gradient;
    if (name == "sampling") return GenMethod::sampling;
    throw std::runtime_error("unknown generation method: " + name);
}

namespace {

double translation_std(const ParticleSet& actions) {
    if (actions.m == 0 || actions.dim < 2) return 0.0;
    double mx = 0, my = 0;
    for (int i = 0; i < actions.m; ++i) {
        mx += actions.row(i)[0];
        my += actions.row(i)[1];
    }
    mx /= actions.m;
    my /= actions.m;
    double acc = 0;
    for (int i = 0; i < actions.m; ++i) {
        double dx = actions.row(i)[0] - mx, dy = actions.row(i)[1] - my;
        acc += dx * dx + dy * dy;
    }
    return std::sqrt(acc / actions.m);
}

GenResult generate_stein(const FailureEvent& failure, const SkillEffectModel& model,
                         SteinConfig cfg, const RenderConfig& render) {
    GenResult out;
    out.requested = cfg.particles;
    double t0 = now_seconds();
    StateInference states = infer_states(failure, model, cfg);
    ParticleSet actions = infer_actions(states, failure, model, cfg);
    SynthesisResult synth = synthesize_dataset(states, actions, failure, render);
    out.wall_seconds = now_seconds() - t0;
    out.dataset = std::move(synth.records);
    out.satisfaction_rate = states.satisfaction_rate;
    out.action_translation_std = translation_std(actions);
    out.accepted = actions.m;
    return out;
}

GenResult generate_sampling(const FailureEvent& failure, const SkillEffectModel& model,
                            SteinConfig cfg, const RenderConfig& render) {
    GenResult out;
    out.requested = cfg.particles;
    double t0 = now_seconds();

    // state template: bounds and reference poses without any optimization
    SteinConfig tpl_cfg = cfg;
    tpl_cfg.iters_state = 0;
    StateInference tpl = infer_states(failure, model, tpl_cfg);
    std::vector<RelSlot> slots = slots_with_values(failure.tracked, failure.pre_relations);

    int budget_per_particle = 50 * cfg.particles;
    Rng rng = Rng(cfg.seed).split(71);

    StateInference accepted = tpl;
    accepted.set.m = 0;
    accepted.set.particles.clear();
    accepted.set.satisfied.clear();

    auto satisfied_by = [&](const std::vector<double>& x) {
        auto poses = particle_poses(failure.reference_scene, tpl.movable_ids, x.data());
        SegmentedCloud cloud = transform_cloud(failure.pre_cloud, failure.reference_scene, poses);
        Prediction det = model.predict(cloud, {});
        for (const auto& slot : slots)
            if ((det.prob_of(-1, slot) > 0.5) != slot.value) return false;
        return true;
    };

    for (int i = 0; i < cfg.particles; ++i) {
        Rng pr = rng.split(i);
        bool found = false;
        std::vector<double> x(tpl.set.dim);
        for (int draw = 0; draw < budget_per_particle; ++draw) {
            for (int d = 0; d < tpl.set.dim; ++d)
                x[d] = pr.uniform(tpl.set.lo[d], tpl.set.hi[d]);
            if (satisfied_by(x)) {
                found = true;
                break;
            }
        }
        if (found) {
            accepted.set.particles.insert(accepted.set.particles.end(), x.begin(), x.end());
            accepted.set.satisfied.push_back(1);
            accepted.set.m += 1;
        } else {
            out.budget_exhausted = true;
        }
    }
    accepted.satisfaction_rate = accepted.set.m == 0 ? 0.0 : 1.0;

    // actions: accept when the entropy objective beats the running median
    ParticleSet actions;
    actions.stage = ParticleStage::action;
    action_bounds(failure.skill, failure.reference_scene, cfg, actions.lo, actions.hi);
    actions.dim = static_cast<int>(actions.lo.size());
    actions.m = 0;
    std::vector<double> accepted_entropies;
    std::vector<double> kept_states;
    Rng arng = Rng(cfg.seed).split(72);
    for (int i = 0; i < accepted.set.m; ++i) {
        auto poses = particle_poses(failure.reference_scene, tpl.movable_ids,
                                    accepted.set.row(i));
        SegmentedCloud cloud = transform_cloud(failure.pre_cloud, failure.reference_scene, poses);
        std::vector<double> latent = model.encode(cloud);
        std::vector<int> ids;
        for (const auto& seg : cloud.segments) ids.push_back(seg.segment_id);
        Rng pr = arng.split(i);
        std::vector<double> best(actions.dim, 0.0);
        bool chosen = false;
        for (int draw = 0; draw < budget_per_particle; ++draw) {
            std::vector<double> a(actions.dim);
            for (int d = 0; d < actions.dim; ++d) a[d] = pr.uniform(actions.lo[d], actions.hi[d]);
            SkillInstance skill = failure.skill;
            skill.params = a;
            Prediction pred = model.predict_from_latent(latent, ids, {skill});
            std::vector<double> probs;
            for (const auto& slot : failure.tracked) probs.push_back(pred.prob_of(0, slot));
            double h = entropy_objective(probs);
            double median = 0.0;
            if (!accepted_entropies.empty()) {
                std::vector<double> sorted = accepted_entropies;
                std::sort(sorted.begin(), sorted.end());
                size_t n = sorted.size();
                median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
            }
            if (accepted_entropies.empty() || h > median) {
                best = a;
                chosen = true;
                accepted_entropies.push_back(h);
                break;
            }
        }
        if (!chosen) {
            out.budget_exhausted = true;
            continue;  // dropped: partial dataset
        }
        actions.particles.insert(actions.particles.end(), best.begin(), best.end());
        actions.satisfied.push_back(accepted.set.satisfied[i]);
        kept_states.insert(kept_states.end(), accepted.set.row(i),
                           accepted.set.row(i) + accepted.set.dim);
        actions.m += 1;
    }
    accepted.set.particles = kept_states;
    accepted.set.m = actions.m;
    accepted.set.satisfied = actions.satisfied;

    SynthesisResult synth = synthesize_dataset(accepted, actions, failure, render);
    out.wall_seconds = now_seconds() - t0;
    out.dataset = std::move(synth.records);
    out.satisfaction_rate =
        cfg.particles == 0 ? 0.0 : static_cast<double>(accepted.set.m) / cfg.particles;
    out.action_translation_std = translation_std(actions);
    out.accepted = accepted.set.m;
    return out;
}

}  // namespace

GenResult baseline_generate(GenMethod method, const FailureEvent& failure,
                            const SkillEffectModel& model, const SteinConfig& stein,
                            const RenderConfig& render) {
    switch (method) {
        case GenMethod::svgd:
            return generate_stein(failure, model, stein, render);
        case GenMethod::gradient: {
            SteinConfig cfg = stein;
            cfg.kernel_enabled = false;
            cfg.sequential = true;
            return generate_stein(failure, model, cfg, render);
        }
        case GenMethod::sampling:
            return generate_sampling(failure, model, stein, render);
    }
    throw std::runtime_error("baseline_generate: unknown method");
}

// --- benchmark ----------------------------------------------------------------------

SkillEffectModel pretrain_or_load(const BenchConfig& cfg) {
    if (!cfg.checkpoint_path.empty() && std::filesystem::exists(cfg.checkpoint_path))
        return SkillEffectModel::load_checkpoint(cfg.checkpoint_path);
    PretrainConfig pc;
    pc.scene = cfg.task.scene;
    pc.n_points_per_segment = cfg.render.n_points_per_segment;
    pc.exclude_container_transport = true;
    auto dataset = generate_pretrain_dataset(pc, cfg.pretrain_records, Rng(cfg.train.seed));
    SkillEffectModel model(cfg.model);
    model.train(dataset, cfg.train.pretrain_epochs, cfg.train);
    if (!cfg.checkpoint_path.empty()) model.save_checkpoint(cfg.checkpoint_path);
    return model;
}

FailureEvent provoke_transport_failure(const SkillEffectModel& model, const BenchConfig& cfg,
                                       uint64_t seed) {
    for (int attempt = 0; attempt < 10; ++attempt) {
        TransportInstance inst =
            make_transport_instance(cfg.task, Rng(seed).split(900 + attempt));
        EpisodeConfig ec = cfg.episode;
        ec.seed = Rng(seed).split(300 + attempt).next_u64();
        EpisodeResult res = run_episode(model, inst.world, inst.skeleton, inst.goal, ec);
        if (res.failure_emitted) return res.failure;
    }
    throw std::runtime_error("provoke_transport_failure: no failure emitted in 10 attempts");
}

namespace {

double evaluate_condition(const SkillEffectModel& model, const BenchConfig& cfg, uint64_t seed,
                          bool replanning) {
    int trials = cfg.eval_trials;
    std::vector<char> wins(trials, 0);
    parallel_for(trials, cfg.train.threads, [&](int t) {
        TransportInstance inst =
            make_transport_instance(cfg.task, Rng(7000 + seed).split(t));
        EpisodeConfig ec = cfg.episode;
        ec.replanning = replanning;
        ec.seed = Rng(8000 + seed).split(t).next_u64();
        EpisodeResult res = run_episode(model, inst.world, inst.skeleton, inst.goal, ec);
        wins[t] = res.success ? 1 : 0;
    });
    int won = 0;
    for (char w : wins) won += w;
    return trials == 0 ? 0.0 : static_cast<double>(won) / trials;
}

SkillEffectModel finetune_clone(const SkillEffectModel& base,
                                const std::vector<TransitionRecord>& data, int epochs,
                                const TrainConfig& tc, double* seconds) {
    SkillEffectModel model = base;
    double t0 = now_seconds();
    if (!data.empty() && epochs > 0) model.train(data, epochs, tc);
    if (seconds) *seconds = now_seconds() - t0;
    return model;
}

}  // namespace

double BenchReport::success_of(const std::string& condition, uint64_t seed) const {
    for (const auto& o : outcomes)
        if (o.condition == condition && o.seed == seed) return o.success_rate;
    return 0.0;
}

double BenchReport::mean_success(const std::string& condition) const {
    double acc = 0;
    int n = 0;
    for (const auto& o : outcomes)
        if (o.condition == condition) {
            acc += o.success_rate;
            ++n;
        }
    return n == 0 ? 0.0 : acc / n;
}

BenchReport run_benchmark(const BenchConfig& cfg) {
    BenchReport report;
    if (cfg.eval_trials <= 0 || cfg.seeds.empty()) return report;  // nothing to evaluate
    SkillEffectModel pretrained = pretrain_or_load(cfg);
    report.n_seeds = static_cast<int>(cfg.seeds.size());

    for (uint64_t seed : cfg.seeds) {
        FailureEvent failure = provoke_transport_failure(pretrained, cfg, seed);
        SteinConfig sc = cfg.stein;
        sc.seed = seed;
        RenderConfig rc = cfg.render;
        rc.seed = Rng(seed).split(40).next_u64();

        GenResult svgd = baseline_generate(GenMethod::svgd, failure, pretrained, sc, rc);
        GenResult grad = baseline_generate(GenMethod::gradient, failure, pretrained, sc, rc);
        GenResult samp = baseline_generate(GenMethod::sampling, failure, pretrained, sc, rc);

        TrainConfig tc = cfg.train;
        tc.seed = Rng(seed).split(41).next_u64();

        PretrainConfig extra_cfg;
        extra_cfg.scene = cfg.task.scene;
        extra_cfg.n_points_per_segment = cfg.render.n_points_per_segment;
        extra_cfg.exclude_container_transport = true;
        auto small_extra =
            generate_pretrain_dataset(extra_cfg, cfg.small_extra_records, Rng(seed).split(42));
        auto large_extra =
            generate_pretrain_dataset(extra_cfg, cfg.large_extra_records, Rng(seed).split(43));
        // matched optimizer-step budget across fine-tuned conditions
        int large_epochs = std::max(
            1, cfg.finetune_epochs * cfg.small_extra_records / cfg.large_extra_records);

        struct Entry {
            std::string name;
            SkillEffectModel model;
            bool replanning;
            double gen_s, ft_s;
        };
        std::vector<Entry> entries;
        entries.push_back({"original", pretrained, false, 0, 0});
        entries.push_back({"replanning", pretrained, true, 0, 0});
        double ft = 0;
        entries.push_back({"small",
                           finetune_clone(pretrained, small_extra, cfg.finetune_epochs, tc, &ft),
                           false, 0, ft});
        entries.push_back(
            {"large", finetune_clone(pretrained, large_extra, large_epochs, tc, &ft), false, 0,
             ft});
        entries.push_back({"sampling",
                           finetune_clone(pretrained, samp.dataset, cfg.finetune_epochs, tc, &ft),
                           false, samp.wall_seconds, ft});
        entries.push_back({"gradient",
                           finetune_clone(pretrained, grad.dataset, cfg.finetune_epochs, tc, &ft),
                           false, grad.wall_seconds, ft});
        entries.push_back({"fail2progress",
                           finetune_clone(pretrained, svgd.dataset, cfg.finetune_epochs, tc, &ft),
                           false, svgd.wall_seconds, ft});

        for (auto& e : entries) {
            ConditionOutcome oc;
            oc.condition = e.name;
            oc.seed = seed;
            oc.success_rate = evaluate_condition(e.model, cfg, seed, e.replanning);
            oc.generation_seconds = e.gen_s;
            oc.finetune_seconds = e.ft_s;
            report.outcomes.push_back(oc);
        }

        double f2p = report.success_of("fail2progress", seed);
        if (f2p > report.success_of("sampling", seed)) report.seeds_f2p_beats_sampling++;
        if (f2p > report.success_of("gradient", seed)) report.seeds_f2p_beats_gradient++;
        if (f2p > report.success_of("replanning", seed)) report.seeds_f2p_beats_replanning++;
        double lg = report.success_of("large", seed), sm = report.success_of("small", seed),
               og = report.success_of("original", seed);
        if (f2p > lg && lg >= sm && sm >= og) report.seeds_monotone_data_chain++;
    }
    return report;
}

// --- noise sweep ------------------------------------------------------------------------

std::vector<NoisePoint> noise_sweep(const BenchConfig& cfg, const std::vector<double>& sigmas) {
    SkillEffectModel pretrained = pretrain_or_load(cfg);
    std::vector<NoisePoint> out;
    for (double sigma : sigmas) {
        NoisePoint pt;
        pt.sigma = sigma;
        int sim2real = 0, classified = 0;
        FailureEvent first_failure;
        bool have_failure = false;
        for (int k = 0; k < 20; ++k) {
            TransportInstance inst = make_transport_instance(cfg.task, Rng(3100).split(k));
            EpisodeConfig ec = cfg.episode;
            ec.noise_sigma = sigma;
            ec.seed = Rng(3200).split(k).next_u64();
            EpisodeResult res = run_episode(pretrained, inst.world, inst.skeleton, inst.goal, ec);
            if (!res.failure_emitted) continue;
            ++classified;
            if (classify_failure(res.failure) == FailureClass::sim2real_gap) ++sim2real;
            if (!have_failure) {
                first_failure = res.failure;
                have_failure = true;
            }
        }
        pt.n_failures = classified;
        pt.sim2real_fraction = classified == 0 ? 0.0 : static_cast<double>(sim2real) / classified;

        if (have_failure) {
            SteinConfig sc = cfg.stein;
            sc.seed = 97;
            RenderConfig rc = cfg.render;
            rc.seed = 98;
            GenResult gen = baseline_generate(GenMethod::svgd, first_failure, pretrained, sc, rc);
            TrainConfig tc = cfg.train;
            tc.seed = 99;
            double ft = 0;
            SkillEffectModel tuned =
                finetune_clone(pretrained, gen.dataset, cfg.finetune_epochs, tc, &ft);
            pt.post_finetune_success = evaluate_condition(tuned, cfg, 777, false);
        }
        out.push_back(pt);
    }
    return out;
}

// --- ablation ------------------------------------------------------------------------------

std::vector<AblatePoint> ablate_particles(const BenchConfig& cfg,
                                          const std::vector<int>& particle_counts) {
    SkillEffectModel pretrained = pretrain_or_load(cfg);
    FailureEvent failure = provoke_transport_failure(pretrained, cfg, cfg.seeds.empty() ? 1 : cfg.seeds[0]);
    std::vector<AblatePoint> out;
    for (int m : particle_counts) {
        SteinConfig sc = cfg.stein;
        sc.particles = m;
        sc.seed = 55;
        RenderConfig rc = cfg.render;
        rc.seed = 56;
        GenResult gen = baseline_generate(GenMethod::svgd, failure, pretrained, sc, rc);
        TrainConfig tc = cfg.train;
        tc.seed = 57;
        double ft = 0;
        SkillEffectModel tuned =
            finetune_clone(pretrained, gen.dataset, cfg.finetune_epochs, tc, &ft);
        AblatePoint pt;
        pt.particles = m;
        pt.generation_seconds = gen.wall_seconds;
        pt.success_rate = evaluate_condition(tuned, cfg, 999, false);
        out.push_back(pt);
    }
    return out;
}

// --- report files ----------------------------------------------------------------------------

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    for (size_t i = 0; i < header.size(); ++i) f << (i ? "," : "") << header[i];
    f << "\n";
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i) f << (i ? "," : "") << row[i];
        f << "\n";
    }
}

namespace {

void svg_open(std::ofstream& f, int w, int h, const std::string& title) {
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
    f << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
    f << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
         "font-family=\"sans-serif\">"
      << title << "</text>\n";
}

const char* kPalette[] = {"#4878d0", "#ee854a", "#6acc64", "#d65f5f", "#956cb4", "#8c613c"};

}  // namespace

void write_bar_chart_svg(const std::string& path, const std::string& title,
                         const std::vector<std::string>& labels,
                         const std::vector<double>& values, const std::string& y_label) {
    int w = 640, h = 400, mleft = 60, mbot = 80, mtop = 50;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    svg_open(f, w, h, title);
    double vmax = 1e-9;
    for (double v : values) vmax = std::max(vmax, v);
    int n = static_cast<int>(values.size());
    double bw = static_cast<double>(w - mleft - 20) / std::max(1, n);
    for (int i = 0; i < n; ++i) {
        double bh = (h - mtop - mbot) * values[i] / vmax;
        double x = mleft + i * bw + bw * 0.15;
        double y = h - mbot - bh;
        f << "<rect x=\"" << format_double(x) << "\" y=\"" << format_double(y) << "\" width=\""
          << format_double(bw * 0.7) << "\" height=\"" << format_double(bh) << "\" fill=\""
          << kPalette[i % 6] << "\"/>\n";
        f << "<text x=\"" << format_double(x + bw * 0.35) << "\" y=\"" << h - mbot + 16
          << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\" "
             "transform=\"rotate(30 "
          << format_double(x + bw * 0.35) << " " << h - mbot + 16 << ")\">" << labels[i]
          << "</text>\n";
        f << "<text x=\"" << format_double(x + bw * 0.35) << "\" y=\"" << format_double(y - 4)
          << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">"
          << format_double(values[i]) << "</text>\n";
    }
    f << "<line x1=\"" << mleft << "\" y1=\"" << h - mbot << "\" x2=\"" << w - 20 << "\" y2=\""
      << h - mbot << "\" stroke=\"black\"/>\n";
    f << "<text x=\"16\" y=\"" << (h - mbot + mtop) / 2
      << "\" font-size=\"12\" font-family=\"sans-serif\" transform=\"rotate(-90 16 "
      << (h - mbot + mtop) / 2 << ")\" text-anchor=\"middle\">" << y_label << "</text>\n";
    f << "</svg>\n";
}

void write_line_chart_svg(const std::string& path, const std::string& title,
                          const std::vector<double>& xs,
                          const std::vector<std::vector<double>>& series,
                          const std::vector<std::string>& series_names,
                          const std::string& x_label, const std::string& y_label) {
    int w = 640, h = 400, mleft = 60, mbot = 60, mtop = 50, mright = 140;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    svg_open(f, w, h, title);
    double xmin = xs.front(), xmax = xs.back();
    if (xmax <= xmin) xmax = xmin + 1;
    double vmax = 1e-9;
    for (const auto& s : series)
        for (double v : s) vmax = std::max(vmax, v);
    auto px = [&](double x) {
        return mleft + (w - mleft - mright) * (x - xmin) / (xmax - xmin);
    };
    auto py = [&](double v) { return h - mbot - (h - mtop - mbot) * v / vmax; };
    for (size_t s = 0; s < series.size(); ++s) {
        f << "<polyline fill=\"none\" stroke=\"" << kPalette[s % 6]
          << "\" stroke-width=\"2\" points=\"";
        for (size_t i = 0; i < xs.size(); ++i)
            f << format_double(px(xs[i])) << "," << format_double(py(series[s][i])) << " ";
        f << "\"/>\n";
        for (size_t i = 0; i < xs.size(); ++i)
            f << "<circle cx=\"" << format_double(px(xs[i])) << "\" cy=\""
              << format_double(py(series[s][i])) << "\" r=\"3\" fill=\"" << kPalette[s % 6]
              << "\"/>\n";
        f << "<text x=\"" << w - mright + 8 << "\" y=\"" << mtop + 18 * s
          << "\" font-size=\"12\" font-family=\"sans-serif\" fill=\"" << kPalette[s % 6] << "\">"
          << series_names[s] << "</text>\n";
    }
    f << "<line x1=\"" << mleft << "\" y1=\"" << h - mbot << "\" x2=\"" << w - mright
      << "\" y2=\"" << h - mbot << "\" stroke=\"black\"/>\n";
    for (size_t i = 0; i < xs.size(); ++i)
        f << "<text x=\"" << format_double(px(xs[i])) << "\" y=\"" << h - mbot + 16
          << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">"
          << format_double(xs[i]) << "</text>\n";
    f << "<text x=\"" << (mleft + w - mright) / 2 << "\" y=\"" << h - 16
      << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">" << x_label
      << "</text>\n";
    f << "<text x=\"16\" y=\"" << (h - mbot + mtop) / 2
      << "\" font-size=\"12\" font-family=\"sans-serif\" transform=\"rotate(-90 16 "
      << (h - mbot + mtop) / 2 << ")\" text-anchor=\"middle\">" << y_label << "</text>\n";
    f << "</svg>\n";
}

uint64_t fnv1a_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    uint64_t hash = 0xcbf29ce484222325ULL;
    char buf[4096];
    while (f) {
        f.read(buf, sizeof(buf));
        std::streamsize got = f.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 0x100000001b3ULL;
        }
    }
    return hash;
}

namespace {

void write_manifest(const BenchConfig& cfg, const std::vector<std::string>& files) {
    nlohmann::json j;
    j["tool"] = "relearn";
    j["version"] = "0.1.0";
    nlohmann::json seeds = nlohmann::json::array();
    for (uint64_t s : cfg.seeds) seeds.push_back(s);
    j["seeds"] = seeds;
    j["pretrain_records"] = cfg.pretrain_records;
    j["eval_trials"] = cfg.eval_trials;
    j["particles"] = cfg.stein.particles;
    nlohmann::json hashes;
    for (const auto& f : files) {
        char buf[20];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(fnv1a_file(cfg.outdir + "/" + f)));
        hashes[f] = buf;
    }
    j["artifact_hashes"] = hashes;
    std::ofstream out(cfg.outdir + "/manifest.json", std::ios::binary);
    out << j.dump(2) << "\n";
}

}  // namespace

void write_bench_report(const BenchConfig& cfg, const BenchReport& report) {
    std::filesystem::create_directories(cfg.outdir);
    std::vector<std::vector<std::string>> rows;
    for (const auto& o : report.outcomes)
        rows.push_back({o.condition, std::to_string(o.seed), format_double(o.success_rate)});
    write_csv(cfg.outdir + "/success_rates.csv", {"condition", "seed", "success_rate"}, rows);

    std::vector<std::vector<std::string>> order_rows = {
        {"f2p_beats_sampling", std::to_string(report.seeds_f2p_beats_sampling),
         std::to_string(report.n_seeds)},
        {"f2p_beats_gradient", std::to_string(report.seeds_f2p_beats_gradient),
         std::to_string(report.n_seeds)},
        {"f2p_beats_replanning", std::to_string(report.seeds_f2p_beats_replanning),
         std::to_string(report.n_seeds)},
        {"f2p_gt_large_ge_small_ge_original", std::to_string(report.seeds_monotone_data_chain),
         std::to_string(report.n_seeds)},
    };
    write_csv(cfg.outdir + "/ordering.csv", {"check", "seeds_holding", "seeds_total"},
              order_rows);

    std::vector<std::string> conditions = {"original", "small",    "large",        "replanning",
                                           "sampling", "gradient", "fail2progress"};
    std::vector<double> means;
    for (const auto& c : conditions) means.push_back(report.mean_success(c));
    write_bar_chart_svg(cfg.outdir + "/bench_success.svg",
                        "Transport-task success by condition", conditions, means,
                        "success rate");

    std::vector<std::vector<std::string>> timing_rows;
    for (const auto& o : report.outcomes)
        timing_rows.push_back({o.condition, std::to_string(o.seed),
                               format_double(o.generation_seconds),
                               format_double(o.finetune_seconds)});
    write_csv(cfg.outdir + "/timing.csv",
              {"condition", "seed", "generation_seconds", "finetune_seconds"}, timing_rows);

    write_manifest(cfg, {"success_rates.csv", "ordering.csv", "bench_success.svg"});
}

void write_noise_report(const BenchConfig& cfg, const std::vector<NoisePoint>& points) {
    std::filesystem::create_directories(cfg.outdir);
    std::vector<std::vector<std::string>> rows;
    for (const auto& p : points)
        rows.push_back({format_double(p.sigma), format_double(p.sim2real_fraction),
                        format_double(p.post_finetune_success), std::to_string(p.n_failures)});
    write_csv(cfg.outdir + "/noise_sweep.csv",
              {"sigma", "sim2real_fraction", "post_finetune_success", "n_failures"}, rows);
    std::vector<double> xs;
    std::vector<double> frac, succ;
    for (const auto& p : points) {
        xs.push_back(p.sigma);
        frac.push_back(p.sim2real_fraction);
        succ.push_back(p.post_finetune_success);
    }
    write_line_chart_svg(cfg.outdir + "/noise_sweep.svg", "Point-noise degradation", xs,
                         {frac, succ}, {"sim2real fraction", "post-finetune success"},
                         "noise sigma (m)", "fraction");
    write_manifest(cfg, {"noise_sweep.csv", "noise_sweep.svg"});
}

void write_ablation_report(const BenchConfig& cfg, const std::vector<AblatePoint>& points) {
    std::filesystem::create_directories(cfg.outdir);
    std::vector<std::vector<std::string>> rows;
    for (const auto& p : points)
        rows.push_back({std::to_string(p.particles), format_double(p.success_rate),
                        format_double(p.generation_seconds)});
    write_csv(cfg.outdir + "/ablate_particles.csv",
              {"particles", "success_rate", "generation_seconds"}, rows);
    std::vector<double> xs, succ;
    for (const auto& p : points) {
        xs.push_back(p.particles);
        succ.push_back(p.success_rate);
    }
    write_line_chart_svg(cfg.outdir + "/ablate_particles.svg", "Particle-count ablation", xs,
                         {succ}, {"success rate"}, "particles", "success rate");
    write_manifest(cfg, {"ablate_particles.csv", "ablate_particles.svg"});
}

}  // namespace relearn
