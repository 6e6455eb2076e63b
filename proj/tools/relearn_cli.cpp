// Command-line harness: pretraining, episodes, failure-driven dataset
// generation, fine-tuning, the benchmark matrix, ablations and reports.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "relearn/bench.hpp"

using namespace relearn;
using nlohmann::json;

namespace {

BenchConfig load_config(const std::string& path) {
    BenchConfig cfg;
    if (path.empty()) return cfg;
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config: " + path);
    json j = json::parse(f);
    auto get = [&](const char* key, auto def) {
        using T = decltype(def);
        return j.contains(key) ? j.at(key).get<T>() : def;
    };
    cfg.pretrain_records = get("pretrain_records", cfg.pretrain_records);
    cfg.eval_trials = get("eval_trials", cfg.eval_trials);
    cfg.finetune_epochs = get("finetune_epochs", cfg.finetune_epochs);
    cfg.small_extra_records = get("small_extra_records", cfg.small_extra_records);
    cfg.large_extra_records = get("large_extra_records", cfg.large_extra_records);
    cfg.checkpoint_path = get("checkpoint", cfg.checkpoint_path);
    cfg.outdir = get("outdir", cfg.outdir);
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<uint64_t>>();
    cfg.train.learning_rate = get("learning_rate", cfg.train.learning_rate);
    cfg.train.batch_size = get("batch_size", cfg.train.batch_size);
    cfg.train.threads = get("threads", cfg.train.threads);
    cfg.train.seed = get("train_seed", cfg.train.seed);
    cfg.train.pretrain_epochs = get("pretrain_epochs", cfg.train.pretrain_epochs);
    cfg.stein.particles = get("particles", cfg.stein.particles);
    cfg.stein.iters_state = get("iters_state", cfg.stein.iters_state);
    cfg.stein.iters_action = get("iters_action", cfg.stein.iters_action);
    cfg.stein.lr = get("stein_lr", cfg.stein.lr);
    cfg.stein.threads = cfg.train.threads;
    cfg.episode.planner.ka = get("ka", cfg.episode.planner.ka);
    cfg.episode.n_points = get("n_points", cfg.episode.n_points);
    cfg.episode.replan_budget = get("replan_budget", cfg.episode.replan_budget);
    cfg.render.n_points_per_segment = cfg.episode.n_points;
    cfg.task.n_distractors = get("distractors", cfg.task.n_distractors);
    cfg.task.n_cubes_in_box = get("cubes_in_box", cfg.task.n_cubes_in_box);
    return cfg;
}

json slot_to_json(const RelSlot& s) {
    json j;
    j["kind"] = s.is_unary ? "unary" : "binary";
    j["a"] = s.a;
    if (!s.is_unary) j["b"] = s.b;
    j["rel"] = s.is_unary ? unary_rel_name(static_cast<UnaryRel>(s.rel))
                          : binary_rel_name(static_cast<BinaryRel>(s.rel));
    j["value"] = s.value;
    return j;
}

void write_curve_csv(const std::string& path, const TrainResult& result) {
    std::vector<std::vector<std::string>> rows;
    for (size_t e = 0; e < result.curve.size(); ++e) {
        const LossTerms& t = result.curve[e];
        rows.push_back({std::to_string(e), format_double(t.total()),
                        format_double(t.detection), format_double(t.regularization),
                        format_double(t.position), format_double(t.prediction)});
    }
    write_csv(path, {"epoch", "total", "detection", "regularization", "position", "prediction"},
              rows);
}

void save_failure(const std::string& dir, const FailureEvent& f, FailureClass cls) {
    std::filesystem::create_directories(dir);
    save_cloud(dir + "/pre_cloud.bin", f.pre_cloud);
    save_scenes(dir + "/reference_scene.txt", {f.reference_scene});
    json j;
    j["skill"] = {{"primitive", primitive_name(f.skill.primitive)},
                  {"target", f.skill.target_object},
                  {"params", f.skill.params}};
    j["step_index"] = f.step_index;
    j["seed"] = f.seed;
    j["classification"] = failure_class_name(cls);
    json tracked = json::array();
    for (const auto& s : f.tracked) tracked.push_back(slot_to_json(s));
    j["tracked"] = tracked;
    json mism = json::array();
    for (const auto& s :
         detect_failure(f.predicted_relations, f.post_relations_observed, f.tracked))
        mism.push_back(slot_to_json(s));
    j["mismatch"] = mism;
    std::ofstream log(dir + "/failure_log.jsonl", std::ios::binary | std::ios::app);
    log << j.dump() << "\n";
}

int cmd_pretrain(const BenchConfig& cfg, const std::string& dataset_out) {
    PretrainConfig pc;
    pc.scene = cfg.task.scene;
    pc.n_points_per_segment = cfg.render.n_points_per_segment;
    auto data = generate_pretrain_dataset(pc, cfg.pretrain_records, Rng(cfg.train.seed));
    if (!dataset_out.empty()) {
        json manifest = {{"records", cfg.pretrain_records},
                         {"seed", cfg.train.seed},
                         {"generator", "relearn 0.1.0"},
                         {"exclude_container_transport", true}};
        save_dataset(dataset_out, data, manifest.dump(2));
    }
    SkillEffectModel model(cfg.model);
    TrainResult tr = model.train(data, cfg.train.pretrain_epochs, cfg.train);
    std::filesystem::create_directories(cfg.outdir);
    write_curve_csv(cfg.outdir + "/pretrain_curve.csv", tr);
    std::string ckpt = cfg.checkpoint_path.empty() ? cfg.outdir + "/pretrained.ckpt"
                                                   : cfg.checkpoint_path;
    model.save_checkpoint(ckpt);
    std::printf("pretrained on %d records; checkpoint %s%s\n", cfg.pretrain_records,
                ckpt.c_str(), tr.diverged ? " (diverged, last finite kept)" : "");
    return tr.diverged ? 1 : 0;
}

int cmd_episode(const BenchConfig& cfg, uint64_t seed, bool replanning) {
    SkillEffectModel model = pretrain_or_load(cfg);
    TransportInstance inst = make_transport_instance(cfg.task, Rng(seed).split(900));
    EpisodeConfig ec = cfg.episode;
    ec.seed = seed;
    ec.replanning = replanning;
    EpisodeResult res = run_episode(model, inst.world, inst.skeleton, inst.goal, ec);
    std::filesystem::create_directories(cfg.outdir);
    std::ofstream trace(cfg.outdir + "/episode_trace.jsonl", std::ios::binary);
    for (const auto& step : res.trace) {
        json j;
        j["step"] = step.step;
        j["skill"] = {{"primitive", primitive_name(step.skill.primitive)},
                      {"target", step.skill.target_object},
                      {"params", step.skill.params}};
        json pred = json::array(), obs = json::array();
        for (const auto& s : step.predicted) pred.push_back(slot_to_json(s));
        for (const auto& s : step.observed) obs.push_back(slot_to_json(s));
        j["predicted"] = pred;
        j["observed"] = obs;
        j["mismatches"] = step.mismatches;
        j["replanned"] = step.replanned;
        trace << j.dump() << "\n";
    }
    if (res.failure_emitted) {
        FailureClass cls = classify_failure(res.failure);
        save_failure(cfg.outdir + "/failure", res.failure, cls);
        std::printf("episode: failure at step %d (%s); trace in %s\n", res.failure.step_index,
                    failure_class_name(cls), cfg.outdir.c_str());
    } else {
        std::printf("episode: %s after %d steps\n", res.success ? "success" : "goal not reached",
                    res.steps_executed);
    }
    return 0;
}

int cmd_failgen(const BenchConfig& cfg, const std::string& method_name, uint64_t seed) {
    SkillEffectModel model = pretrain_or_load(cfg);
    GenMethod method = gen_method_from_name(method_name);
    FailureEvent failure = provoke_transport_failure(model, cfg, seed);
    SteinConfig sc = cfg.stein;
    sc.seed = seed;
    RenderConfig rc = cfg.render;
    rc.seed = Rng(seed).split(40).next_u64();
    GenResult gen = baseline_generate(method, failure, model, sc, rc);
    std::filesystem::create_directories(cfg.outdir);
    json manifest;
    manifest["method"] = method_name;
    manifest["seed"] = seed;
    manifest["particles"] = sc.particles;
    manifest["satisfaction_rate"] = gen.satisfaction_rate;
    manifest["action_translation_std"] = gen.action_translation_std;
    manifest["accepted"] = gen.accepted;
    manifest["requested"] = gen.requested;
    manifest["budget_exhausted"] = gen.budget_exhausted;
    save_dataset(cfg.outdir + "/dplus_" + method_name, gen.dataset, manifest.dump(2));
    {
        std::ofstream t(cfg.outdir + "/failgen_timing.txt", std::ios::binary | std::ios::app);
        t << method_name << "," << format_double(gen.wall_seconds) << "\n";
    }
    if (gen.budget_exhausted)
        std::printf("warning: sampling budget exhausted, %d/%d particles accepted\n",
                    gen.accepted, gen.requested);
    std::printf("failgen %s: %zu records, satisfaction %.3f, action std %.3f m\n",
                method_name.c_str(), gen.dataset.size(), gen.satisfaction_rate,
                gen.action_translation_std);
    return 0;
}

int cmd_finetune(const BenchConfig& cfg, const std::string& dataset_dir,
                 const std::string& out_ckpt) {
    SkillEffectModel model = pretrain_or_load(cfg);
    auto data = load_dataset(dataset_dir);
    TrainConfig tc = cfg.train;
    TrainResult tr = model.train(data, cfg.finetune_epochs, tc);
    std::filesystem::create_directories(cfg.outdir);
    write_curve_csv(cfg.outdir + "/finetune_curve.csv", tr);
    model.save_checkpoint(out_ckpt);
    std::printf("fine-tuned on %zu records for %d epochs; checkpoint %s\n", data.size(),
                cfg.finetune_epochs, out_ckpt.c_str());
    return tr.diverged ? 1 : 0;
}

int cmd_bench(const BenchConfig& cfg) {
    BenchReport report = run_benchmark(cfg);
    write_bench_report(cfg, report);
    std::printf("condition means over %d seeds:\n", report.n_seeds);
    for (const auto& c : {"original", "small", "large", "replanning", "sampling", "gradient",
                          "fail2progress"})
        std::printf("  %-14s %.3f\n", c, report.mean_success(c));
    std::printf("report written to %s\n", cfg.outdir.c_str());
    return 0;
}

int cmd_noise_sweep(const BenchConfig& cfg, const std::vector<double>& sigmas) {
    auto points = noise_sweep(cfg, sigmas);
    write_noise_report(cfg, points);
    for (const auto& p : points)
        std::printf("sigma %.3f: sim2real %.2f (over %d failures), success %.2f\n", p.sigma,
                    p.sim2real_fraction, p.n_failures, p.post_finetune_success);
    return 0;
}

int cmd_ablate(const BenchConfig& cfg, const std::vector<int>& particles) {
    auto points = ablate_particles(cfg, particles);
    write_ablation_report(cfg, points);
    for (const auto& p : points)
        std::printf("M=%d: success %.2f, generation %.1fs\n", p.particles, p.success_rate,
                    p.generation_seconds);
    return 0;
}

int cmd_report(const BenchConfig& cfg) {
    // Rebuilds plots and the manifest from an existing success_rates.csv.
    std::ifstream f(cfg.outdir + "/success_rates.csv");
    if (!f)
        throw std::runtime_error("missing " + cfg.outdir +
                                 "/success_rates.csv; run the bench subcommand first");
    std::string line;
    std::getline(f, line);  // header
    BenchReport report;
    std::set<uint64_t> seeds;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        ConditionOutcome o;
        size_t c1 = line.find(','), c2 = line.find(',', c1 + 1);
        o.condition = line.substr(0, c1);
        o.seed = std::stoull(line.substr(c1 + 1, c2 - c1 - 1));
        o.success_rate = std::stod(line.substr(c2 + 1));
        seeds.insert(o.seed);
        report.outcomes.push_back(o);
    }
    report.n_seeds = static_cast<int>(seeds.size());
    for (uint64_t seed : seeds) {
        double f2p = report.success_of("fail2progress", seed);
        if (f2p > report.success_of("sampling", seed)) report.seeds_f2p_beats_sampling++;
        if (f2p > report.success_of("gradient", seed)) report.seeds_f2p_beats_gradient++;
        if (f2p > report.success_of("replanning", seed)) report.seeds_f2p_beats_replanning++;
        double lg = report.success_of("large", seed), sm = report.success_of("small", seed),
               og = report.success_of("original", seed);
        if (f2p > lg && lg >= sm && sm >= og) report.seeds_monotone_data_chain++;
    }
    write_bench_report(cfg, report);
    std::printf("report regenerated in %s\n", cfg.outdir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"failure-driven skill-effect model refinement harness"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON config file");
    std::string outdir, checkpoint;
    app.add_option("--outdir", outdir, "output directory override");
    app.add_option("--checkpoint", checkpoint, "checkpoint path override");
    int records = -1, trials = -1, particles = -1, threads = -1;
    app.add_option("--records", records, "pretraining record count override");
    app.add_option("--trials", trials, "evaluation trial count override");
    app.add_option("--particles", particles, "particle count override");
    app.add_option("--threads", threads, "worker thread count override");
    uint64_t seed = 1;
    app.add_option("--seed", seed, "run seed");

    auto* pretrain = app.add_subcommand("pretrain", "generate data and pretrain a checkpoint");
    std::string dataset_out;
    pretrain->add_option("--dataset-out", dataset_out, "also save the dataset directory");

    auto* episode = app.add_subcommand("episode", "run one transport episode");
    bool replanning = false;
    episode->add_flag("--replanning", replanning, "replan on mismatch up to the budget");

    auto* failgen = app.add_subcommand("failgen", "generate a targeted dataset from a failure");
    std::string method = "svgd";
    failgen->add_option("--method", method, "svgd|gradient|sampling")->required();

    auto* finetune = app.add_subcommand("finetune", "fine-tune a checkpoint on a dataset");
    std::string dataset_dir, out_ckpt = "finetuned.ckpt";
    finetune->add_option("--dataset", dataset_dir, "dataset directory")->required();
    finetune->add_option("--out", out_ckpt, "output checkpoint path");

    app.add_subcommand("bench", "run the full benchmark matrix");

    auto* noise = app.add_subcommand("noise-sweep", "sim2real degradation study");
    std::vector<double> sigmas = {0.0, 0.01, 0.03};
    noise->add_option("--sigmas", sigmas, "noise levels in meters");

    auto* ablate = app.add_subcommand("ablate-particles", "particle-count ablation");
    std::vector<int> counts = {1, 5, 10, 20, 40};
    ablate->add_option("--counts", counts, "particle counts");

    app.add_subcommand("report", "regenerate plots and manifest from saved tables");

    CLI11_PARSE(app, argc, argv);

    try {
        BenchConfig cfg = load_config(config_path);
        if (!outdir.empty()) cfg.outdir = outdir;
        if (!checkpoint.empty()) cfg.checkpoint_path = checkpoint;
        if (records > 0) cfg.pretrain_records = records;
        if (trials > 0) cfg.eval_trials = trials;
        if (particles > 0) cfg.stein.particles = particles;
        if (threads > 0) {
            cfg.train.threads = threads;
            cfg.stein.threads = threads;
        }
        if (cfg.checkpoint_path.empty()) cfg.checkpoint_path = cfg.outdir + "/pretrained.ckpt";

        if (pretrain->parsed()) return cmd_pretrain(cfg, dataset_out);
        if (episode->parsed()) return cmd_episode(cfg, seed, replanning);
        if (failgen->parsed()) return cmd_failgen(cfg, method, seed);
        if (finetune->parsed()) return cmd_finetune(cfg, dataset_dir, out_ckpt);
        if (app.get_subcommand("bench")->parsed()) return cmd_bench(cfg);
        if (noise->parsed()) return cmd_noise_sweep(cfg, sigmas);
        if (ablate->parsed()) return cmd_ablate(cfg, counts);
        if (app.get_subcommand("report")->parsed()) return cmd_report(cfg);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
