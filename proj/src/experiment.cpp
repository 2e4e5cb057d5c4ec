#include "reachpred/experiment.hpp"

#include "reachpred/parallel.hpp"

#include <algorithm>
#include <ostream>
#include <set>

namespace reachpred {

namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

Eigen::VectorXd vecx(const json& j) {
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
    return v;
}

void reject_unknown(const json& doc, std::initializer_list<const char*> keys, const char* what) {
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        bool ok = false;
        for (const char* k : keys) ok |= it.key() == k;
        if (!ok) throw IoError(std::string("unknown ") + what + " key '" + it.key() + "'");
    }
}

Eigen::MatrixXd start_buffer(const Trajectory& demo) {
    return demo.has_buffer() ? demo.buffer() : rest_buffer(demo.front());
}

std::string task_frame(const Experiment& exp) { return exp.spec.planner.features.task_frame; }

}  // namespace

std::string mode_name(PredictMode mode) { return mode == PredictMode::replan ? "replan" : "single_shot"; }

PredictMode parse_mode(const std::string& name) {
    if (name == "single_shot") return PredictMode::single_shot;
    if (name == "replan") return PredictMode::replan;
    throw std::invalid_argument("unknown prediction mode '" + name + "' (single_shot or replan)");
}

ExperimentSpec experiment_from_json(const json& doc, const fs::path& base_dir) {
    check_units(doc);
    reject_unknown(doc, {"description", "units", "model", "scene", "output_dir", "demos", "features", "ioc", "planner",
                         "predict", "learn", "threads"},
                   "experiment");
    ExperimentSpec s;
    s.base_dir = base_dir;
    s.model = resolve(base_dir, doc.at("model").get<std::string>());
    s.scene = resolve(base_dir, doc.at("scene").get<std::string>());
    s.output_dir = resolve(base_dir, doc.value("output_dir", std::string("out")));
    s.threads = doc.value("threads", 0);
    if (doc.contains("features")) apply_json(s.planner.features, doc.at("features"));
    if (doc.contains("ioc")) apply_json(s.ioc, doc.at("ioc"));
    if (doc.contains("planner")) apply_json(s.planner, doc.at("planner"));
    if (doc.contains("features")) apply_json(s.planner.features, doc.at("features"));
    s.ioc.features = s.planner.features;
    s.ioc.threads = s.threads;

    const json& demos = doc.at("demos");
    reject_unknown(demos, {"paths", "synthesize"}, "demos");
    if (demos.contains("paths"))
        for (const auto& p : demos.at("paths")) s.demo_paths.push_back(resolve(base_dir, p.get<std::string>()));
    if (demos.contains("synthesize")) {
        const json& sj = demos.at("synthesize");
        reject_unknown(sj, {"w_true", "starts", "goals", "count", "seed", "iterations", "reference_samples"},
                       "synthesize");
        SynthesisSpec syn;
        if (!sj.contains("w_true") || sj.at("w_true").empty()) throw IoError("synthesize block requires w_true");
        for (auto it = sj.at("w_true").begin(); it != sj.at("w_true").end(); ++it)
            syn.w_true[it.key()] = it.value().get<double>();
        if (sj.contains("starts"))
            for (const auto& q : sj.at("starts")) syn.starts.push_back(vecx(q));
        for (const auto& g : sj.at("goals")) {
            const Eigen::VectorXd v = vecx(g);
            if (v.size() != 3) throw IoError("synthesis goals are 3-vectors");
            syn.goals.push_back(v);
        }
        if (syn.goals.empty()) throw IoError("synthesize block needs at least one goal");
        syn.count = sj.value("count", syn.count);
        syn.seed = sj.value("seed", syn.seed);
        syn.iterations = sj.value("iterations", syn.iterations);
        syn.reference_samples = sj.value("reference_samples", syn.reference_samples);
        s.synthesize = syn;
    }
    if (s.demo_paths.empty() && !s.synthesize) throw IoError("experiment needs demo paths or a synthesize block");

    if (doc.contains("predict")) {
        const json& p = doc.at("predict");
        reject_unknown(p, {"mode", "repeat", "tick"}, "predict");
        if (p.contains("mode")) s.mode = parse_mode(p.at("mode").get<std::string>());
        s.repeat = p.value("repeat", s.repeat);
        s.tick = p.value("tick", s.tick);
    }
    if (doc.contains("learn")) {
        const json& l = doc.at("learn");
        reject_unknown(l, {"cross_validate", "folds", "grid"}, "learn");
        s.cross_validate = l.value("cross_validate", s.cross_validate);
        s.folds = l.value("folds", s.folds);
        if (l.contains("grid")) s.grid = l.at("grid").get<std::vector<double>>();
    }
    return s;
}

ExperimentSpec load_experiment(const fs::path& path) {
    try {
        return experiment_from_json(read_json(path), path.parent_path());
    } catch (const json::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

Experiment open_experiment(const ExperimentSpec& spec) {
    Experiment e{spec, load_model(spec.model), {}};
    e.scene = load_scene(spec.scene, e.model);
    for (const auto& f : spec.demo_paths)
        if (!fs::exists(f)) throw IoError("demo file not found: " + f.string());
    return e;
}

WeightVector reference_weights(const Experiment& exp, const std::map<std::string, double>& w_true) {
    if (!exp.spec.synthesize) throw std::invalid_argument("reference weights need a synthesize block");
    const SynthesisSpec& syn = *exp.spec.synthesize;
    const PlannerConfig& pc = exp.spec.planner;
    WeightVector w;
    w.labels = feature_labels(pc.features, exp.model);
    const int f = static_cast<int>(w.labels.size());
    w.values = Eigen::VectorXd::Zero(f);
    for (const auto& [label, value] : w_true) {
        const auto it = std::find(w.labels.begin(), w.labels.end(), label);
        if (it == w.labels.end()) throw IoError("w_true names unknown feature '" + label + "'");
        if (value < 0.0) throw IoError("w_true entries must be non-negative");
        w.values[it - w.labels.begin()] = value;
    }

    const ControlMetric metric = ControlMetric::make(pc.waypoints, exp.model.dof(), pc.dt, MetricVariant::goal_set,
                                                     exp.spec.ioc.sigma, exp.model.noise_scales());
    Eigen::VectorXd hi = Eigen::VectorXd::Zero(f);
    for (int i = 0; i < syn.count; ++i) {
        const Configuration q0 = syn.starts.empty() ? exp.scene.rest_posture : syn.starts[i % syn.starts.size()];
        GoalSet goal;
        goal.target = syn.goals[i % syn.goals.size()];
        goal.frame = pc.features.task_frame;
        goal.epsilon = pc.goal_epsilon;
        IkOptions ik = pc.ik;
        ik.frame = goal.frame;
        const IkResult seed = ik_seed(exp.model, q0, goal.target, ik);
        if (!seed.success) throw NumericalError("synthesis goal " + std::to_string(i) + " is unreachable");
        Trajectory t = linear_interpolation(q0, seed.q, pc.waypoints, pc.dt);
        t.set_buffer(rest_buffer(q0));
        hi = hi.cwiseMax(compute_feature_vector(t, exp.model, exp.scene, pc.features, {}).values);
        for (int k = 0; k < syn.reference_samples; ++k) {
            Trajectory s = t;
            s.waypoints() += sample_perturbation(metric, syn.seed ^ 0x5eedull, static_cast<std::uint64_t>(i * 1000 + k));
            ProjectionResult p = limit_aware_goal_projection(project_to_joint_limits(s, metric, exp.model), metric,
                                                              exp.model, goal, pc.projection);
            if (!p.converged) continue;
            hi = hi.cwiseMax(compute_feature_vector(p.trajectory, exp.model, exp.scene, pc.features, {}).values);
        }
    }
    w.ranges.lo = Eigen::VectorXd::Zero(f);
    w.ranges.hi = hi;
    w.ranges.constant.resize(f);
    for (int k = 0; k < f; ++k) {
        w.ranges.constant[k] = !(hi[k] > 1e-12);
        if (w.ranges.constant[k] && w.values[k] != 0.0)
            throw IoError("w_true weights feature '" + w.labels[k] + "', which is zero on every reference trajectory");
    }
    return w;
}

std::vector<fs::path> cmd_synth_demos(const Experiment& exp, std::ostream& log) {
    if (!exp.spec.synthesize) throw IoError("experiment has no synthesize block");
    const SynthesisSpec& syn = *exp.spec.synthesize;
    const WeightVector w = reference_weights(exp, syn.w_true);
    save_weights(exp.spec.output_dir / "w_true.json", w);

    PlannerConfig cfg = exp.spec.planner;
    if (syn.iterations > 0) cfg.iterations = syn.iterations;
    std::vector<fs::path> out(syn.count);
    std::vector<std::string> errors(syn.count);
    std::vector<Trajectory> demos(syn.count);
    parallel_for(syn.count, exp.spec.threads, [&](int i) {
        const Configuration q0 = syn.starts.empty() ? exp.scene.rest_posture : syn.starts[i % syn.starts.size()];
        GoalSet goal;
        goal.target = syn.goals[i % syn.goals.size()];
        goal.frame = cfg.features.task_frame;
        goal.epsilon = cfg.goal_epsilon;
        PlannerConfig c = cfg;
        c.seed = syn.seed + static_cast<std::uint64_t>(i);
        try {
            // The demonstrator knows how the passive agent will move.
            PlanResult r = goalset_stomp(exp.model, exp.scene, q0, rest_buffer(q0), goal, w, c, {0.0, false});
            if (!r.converged) errors[i] = "goal not reached";
            const auto hits = colliding_waypoints(r.trajectory, exp.model, exp.scene, {0.0, false});
            if (!hits.empty()) errors[i] = "collides at waypoint " + std::to_string(hits.front());
            demos[i] = std::move(r.trajectory);
        } catch (const NumericalError& e) {
            errors[i] = e.what();
        }
    });
    for (int i = 0; i < syn.count; ++i) {
        if (!errors[i].empty()) throw NumericalError("demo " + std::to_string(i) + ": " + errors[i]);
        out[i] = exp.demos_dir() / ("demo_" + std::to_string(i) + ".csv");
        write_text_atomic(out[i], trajectory_to_csv(demos[i]));
        log << "synthesized " << out[i].string() << " cost "
            << trajectory_cost(demos[i], exp.model, exp.scene, w, cfg.w_obs, cfg.features, {0.0, false}) << "\n";
    }
    return out;
}

std::vector<fs::path> demo_files(const Experiment& exp) {
    if (!exp.spec.demo_paths.empty()) return exp.spec.demo_paths;
    std::vector<fs::path> out;
    for (int i = 0; i < exp.spec.synthesize->count; ++i) {
        fs::path p = exp.demos_dir() / ("demo_" + std::to_string(i) + ".csv");
        if (!fs::exists(p)) throw IoError("missing synthesized demo " + p.string() + "; run synth-demos first");
        out.push_back(p);
    }
    return out;
}

IocDataset load_or_build_dataset(const Experiment& exp, std::ostream& log, bool* cache_hit) {
    const auto files = demo_files(exp);
    std::uint64_t h = fnv1a(read_text(exp.spec.model));
    h = fnv1a(read_text(exp.spec.scene), h);
    if (exp.scene.passive) h = fnv1a(trajectory_to_csv(exp.scene.passive->trajectory), h);
    h = fnv1a(to_json(exp.spec.ioc).dump(), h);
    std::vector<DemoInput> demos;
    for (const auto& f : files) {
        const std::string text = read_text(f);
        h = fnv1a(text, h);
        demos.push_back({trajectory_from_csv(text), 0.0});
    }
    const fs::path cache = exp.spec.output_dir / "cache" / ("dataset_" + hex64(h) + ".json");
    if (fs::exists(cache)) {
        if (cache_hit) *cache_hit = true;
        log << "dataset cache hit " << cache.string() << "\n";
        return dataset_from_json(read_json(cache));
    }
    if (cache_hit) *cache_hit = false;
    IocDataset ds = build_dataset(demos, exp.model, exp.scene, exp.spec.ioc);
    for (const auto& d : ds.dropped) log << "dropped record: " << d << "\n";
    log << "dataset: " << ds.records.size() << " records from " << demos.size() << " demos\n";
    write_json(cache, dataset_to_json(ds));
    return ds;
}

LearnOutput cmd_learn(const Experiment& exp, std::optional<int> leave_out, bool cross_validate, std::ostream& log) {
    IocDataset ds = load_or_build_dataset(exp, log);
    if (leave_out) {
        const int n = static_cast<int>(demo_files(exp).size());
        if (*leave_out < 0 || *leave_out >= n) throw std::invalid_argument("--leave-out index out of range");
        ds = ds.subset([&](const IocRecord& r) { return r.demo != *leave_out; });
    }
    IocConfig cfg = exp.spec.ioc;
    if (cross_validate) {
        const CrossValidation cv = cross_validate_regularizer(ds, exp.spec.grid, exp.spec.folds, cfg);
        cfg.l1_strength = cv.best;
        log << "cross validation picked l1 = " << cv.best << "\n";
    }
    LearnOutput out;
    out.result = learn_weights(ds, cfg);
    out.l1 = cfg.l1_strength;
    out.ranges = ds.ranges;
    if (!out.result.converged) log << "warning: weight learning stopped at the iteration limit\n";
    out.path = exp.spec.output_dir / (leave_out ? "weights_loo" + std::to_string(*leave_out) + ".json" : "weights.json");
    save_weights(out.path, out.result.weights);
    log << "wrote " << out.path.string() << "\n";
    return out;
}

Trajectory predict_case(const Experiment& exp, const Trajectory& demo, const WeightVector& weights, PredictMode mode,
                        std::uint64_t seed, bool* failed) {
    PlannerConfig cfg = exp.spec.planner;
    cfg.waypoints = demo.size();
    cfg.dt = demo.dt();
    cfg.seed = seed;
    GoalSet goal;
    goal.frame = task_frame(exp);
    goal.epsilon = cfg.goal_epsilon;
    goal.target = forward_kinematics(exp.model, demo.back(), goal.frame).position;
    const Eigen::MatrixXd buffer = start_buffer(demo);
    if (failed) *failed = false;
    if (mode == PredictMode::replan) {
        ReplanResult r = replan_loop(exp.model, exp.scene, demo.front(), buffer, goal, weights, cfg, exp.spec.tick,
                                     demo.duration(), 0.0, exp.spec.ioc.min_length);
        if (failed) *failed = r.failed;
        return r.trajectory;
    }
    PlanResult r = goalset_stomp(exp.model, exp.scene, demo.front(), buffer, goal, weights, cfg, {0.0, true});
    if (failed) *failed = !r.converged;
    return r.trajectory;
}

PredictOutput cmd_predict(const Experiment& exp, const WeightVector& weights, PredictMode mode, int repeat,
                          const std::vector<int>& cases, const std::string& tag, std::ostream& log) {
    weights.check_labels(feature_labels(exp.spec.planner.features, exp.model));
    const auto files = demo_files(exp);
    std::vector<int> selected = cases;
    if (selected.empty())
        for (int i = 0; i < static_cast<int>(files.size()); ++i) selected.push_back(i);
    struct Job {
        int demo;
        int rep;
    };
    std::vector<Job> jobs;
    for (int c : selected) {
        if (c < 0 || c >= static_cast<int>(files.size())) throw std::invalid_argument("prediction case out of range");
        for (int k = 0; k < repeat; ++k) jobs.push_back({c, k});
    }
    std::vector<Trajectory> preds(jobs.size());
    std::vector<std::string> errors(jobs.size());
    parallel_for(static_cast<int>(jobs.size()), exp.spec.threads, [&](int j) {
        const Trajectory demo = read_trajectory_csv(files[jobs[j].demo]);
        const std::uint64_t seed = exp.spec.planner.seed + 1000ull * jobs[j].rep + 17ull * jobs[j].demo;
        try {
            bool failed = false;
            preds[j] = predict_case(exp, demo, weights, mode, seed, &failed);
            if (failed) errors[j] = "planning did not converge";
        } catch (const NumericalError& e) {
            errors[j] = e.what();
        }
    });
    PredictOutput out;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        const std::string stem = files[jobs[j].demo].stem().string();
        const std::string name = stem + "__" + tag + "_" + mode_name(mode) + "_r" + std::to_string(jobs[j].rep);
        if (!errors[j].empty()) {
            out.failures.push_back(name + ": " + errors[j]);
            log << "prediction failed " << name << ": " << errors[j] << "\n";
            if (preds[j].size() == 0) continue;
        }
        const fs::path p = exp.predictions_dir() / (name + ".csv");
        write_text_atomic(p, trajectory_to_csv(preds[j]));
        out.files.push_back(p);
        log << "wrote " << p.string() << "\n";
    }
    return out;
}

std::vector<ScoreRecord> cmd_eval(const fs::path& pred_dir, const fs::path& obs_dir, const KinematicModel& model,
                                  const fs::path& report, std::ostream& log) {
    if (!fs::is_directory(pred_dir)) throw IoError("prediction directory not found: " + pred_dir.string());
    std::vector<fs::path> preds;
    for (const auto& e : fs::directory_iterator(pred_dir))
        if (e.is_regular_file() && e.path().extension() == ".csv") preds.push_back(e.path());
    std::sort(preds.begin(), preds.end());
    std::vector<ScoreRecord> records;
    std::vector<std::string> missing;
    for (const auto& p : preds) {
        const std::string stem = p.stem().string();
        const std::string obs_name = stem.substr(0, stem.find("__"));
        const fs::path obs = obs_dir / (obs_name + ".csv");
        if (!fs::exists(obs)) {
            missing.push_back(stem);
            continue;
        }
        records.push_back(score_report(read_trajectory_csv(p), read_trajectory_csv(obs), model, stem));
    }
    if (!missing.empty()) {
        std::string msg = "no observation for:";
        for (const auto& m : missing) msg += " " + m;
        throw IoError(msg);
    }
    if (records.empty()) throw IoError("no predictions in " + pred_dir.string());
    write_text_atomic(report, report_csv(records));
    log << "wrote " << report.string() << " (" << records.size() << " pairs)\n";
    return records;
}

std::string cmd_replay(const Trajectory& traj, const KinematicModel& model, const std::string& frame) {
    const int idx = model.frame_index(frame);
    std::string out = "t,x,y,z,qw,qx,qy,qz\n";
    for (int i = 0; i < traj.size(); ++i) {
        const Pose p = frame_pose(model, chain_transforms(model, traj.waypoint(i)), idx);
        const double v[] = {i * traj.dt(),         p.position.x(),      p.position.y(),      p.position.z(),
                            p.orientation.w(),     p.orientation.x(),   p.orientation.y(),   p.orientation.z()};
        for (int k = 0; k < 8; ++k) {
            if (k) out += ',';
            out += format_double(v[k]);
        }
        out += '\n';
    }
    return out;
}

void cmd_run(const Experiment& exp, std::ostream& log) {
    if (exp.spec.synthesize) cmd_synth_demos(exp, log);
    const auto files = demo_files(exp);
    for (int i = 0; i < static_cast<int>(files.size()); ++i) {
        const LearnOutput learned = cmd_learn(exp, i, exp.spec.cross_validate, log);
        cmd_predict(exp, learned.result.weights, exp.spec.mode, exp.spec.repeat, {i}, "learned", log);
        const WeightVector b1 =
            baseline_weights(BaselineKind::baseline1, exp.spec.planner.features, exp.model, learned.ranges);
        cmd_predict(exp, b1, exp.spec.mode, exp.spec.repeat, {i}, "baseline1", log);
    }
    const fs::path obs_dir = exp.spec.demo_paths.empty() ? exp.demos_dir() : exp.spec.demo_paths.front().parent_path();
    cmd_eval(exp.predictions_dir(), obs_dir, exp.model, exp.spec.output_dir / "report.csv", log);
}

}  // namespace reachpred
