#include "reachpred/experiment.hpp"
#include "../oracles.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

using namespace reachpred;
namespace fs = std::filesystem;

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

const fs::path data_dir = REACHPRED_DATA_DIR;
const fs::path work_dir = fs::path(REACHPRED_TEST_TMP) / "acceptance";

Eigen::MatrixXd gaussian(int rows, int cols, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return Eigen::MatrixXd::NullaryExpr(rows, cols, [&] { return n(rng); });
}

Configuration random_configuration(const KinematicModel& m, std::mt19937_64& rng, double shrink) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Configuration q(m.dof());
    for (int j = 0; j < m.dof(); ++j) {
        const double lo = m.joints()[j].lower, hi = m.joints()[j].upper;
        q[j] = 0.5 * (lo + hi) + 0.5 * (hi - lo) * shrink * u(rng);
    }
    return q;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

Outcome metric_identity() {
    const auto t0 = clock_type::now();
    std::mt19937_64 rng(1);
    const double dt = 0.01;
    const ControlMetric fixed = ControlMetric::make(100, 23, dt, MetricVariant::fixed_goal);
    const ControlMetric free = ControlMetric::make(100, 23, dt, MetricVariant::goal_set);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const Eigen::MatrixXd x = gaussian(100, 23, rng);
        const ControlMetric& c = k % 2 ? free : fixed;
        const double direct = oracle::direct_acceleration(x, dt, 2, k % 2 ? 0 : 2);
        worst = std::max(worst, std::abs(smoothness_quadratic(x, c) - direct) / direct);
    }
    const double secs = seconds_since(t0);
    return {worst < 1e-9 && secs < 10.0, fmt("max relative error %.2e, %.2f s", worst, secs)};
}

Outcome band_structure() {
    const int pattern[5] = {1, -4, 6, -4, 1};
    bool ok = true;
    double worst = 0.0;
    for (double dt : {1.0, 0.01}) {
        for (auto v : {MetricVariant::fixed_goal, MetricVariant::goal_set}) {
            const Eigen::MatrixXd S = ControlMetric::make(100, 1, dt, v).R() * std::pow(dt, 4);
            for (int i = 2; i < 98; ++i) {
                for (int col = 0; col < 100; ++col) {
                    const int off = col - i;
                    const double expected = std::abs(off) <= 2 ? pattern[off + 2] : 0.0;
                    const double got = dt == 1.0 ? S(i, col) : std::round(S(i, col));
                    ok &= got == expected;
                    worst = std::max(worst, std::abs(S(i, col) - expected));
                }
            }
        }
    }
    return {ok && worst < 1e-9, fmt("interior rows 2..97, max deviation after scaling %.1e", worst)};
}

Outcome goal_projection() {
    const auto t0 = clock_type::now();
    const std::vector<double> links = {0.5, 0.4, 0.3};
    const KinematicModel planar = make_planar_arm(links);
    const KinematicModel human = load_model(data_dir / "human_23dof.json");
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    int converged[2] = {0, 0};
    int within = 0, compared = 0;
    double worst_ratio = 0.0;
    const int per_model = 100;
    for (int which = 0; which < 2; ++which) {
        const KinematicModel& m = which == 0 ? planar : human;
        const int n = which == 0 ? 30 : 100;
        const ControlMetric c = ControlMetric::make(n, m.dof(), 0.01, MetricVariant::goal_set,
                                                    ControlMetric::kDefaultSigma, m.noise_scales());
        const double r_nn = c.free_inverse()(c.free_count() - 1, c.free_count() - 1);
        for (int k = 0; k < per_model; ++k) {
            Configuration q0, qn;
            if (which == 0) {
                // keep the elbow and wrist away from the straight singular pose
                q0 = Eigen::Vector3d(-1.5 + 3.0 * u(rng), 0.4 + 1.6 * u(rng), 0.4 + 1.6 * u(rng));
                qn = Eigen::Vector3d(-1.5 + 3.0 * u(rng), 0.4 + 1.6 * u(rng), 0.4 + 1.6 * u(rng));
            } else {
                q0 = random_configuration(m, rng, 0.5);
                qn = random_configuration(m, rng, 0.5);
            }
            const Trajectory t = linear_interpolation(q0, qn, n, 0.01);
            Eigen::Vector3d dir = Eigen::Vector3d(gaussian(3, 1, rng));
            if (which == 0) dir.z() = 0.0;
            GoalSet g;
            g.target = forward_kinematics(m, qn, "hand").position + (0.02 + 0.08 * u(rng)) * dir.normalized();
            const ProjectionResult r = project_to_goal_set(t, c, m, g);
            if (!r.converged || r.iterations > 500) continue;
            ++converged[which];
            if (which != 0) continue;
            const double oracle_dist =
                oracle::planar_nearest_distance(links, g.target.head<2>(), qn, 3.0, 50, k + 1) / std::sqrt(r_nn);
            const double ratio = trajectory_distance(r.trajectory, t, c) / oracle_dist;
            worst_ratio = std::max(worst_ratio, std::abs(ratio - 1.0));
            ++compared;
            within += std::abs(ratio - 1.0) <= 0.05;
        }
    }
    const double secs = seconds_since(t0);
    const bool ok = converged[0] >= 95 && converged[1] >= 95 && within == compared && secs < 60.0;
    return {ok, fmt("converged planar %.0f/100, 23-DoF %.0f/100; planar R-distance worst |ratio-1| %.4f; %.1f s",
                    converged[0], converged[1], worst_ratio, secs)};
}

Outcome sampler_fidelity() {
    const ControlMetric c = ControlMetric::make(10, 1, 0.01, MetricVariant::goal_set);
    const ControlMetric fixed = ControlMetric::make(10, 1, 0.01, MetricVariant::fixed_goal);
    const int f = c.free_count();
    const int draws = 100000;
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(f, f);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(f);
    double fixed_end = 0.0, free_end = 0.0;
    for (int k = 0; k < draws; ++k) {
        const Eigen::VectorXd x = sample_perturbation(c, 7, k).col(0);
        acc += x.segment(1, f) * x.segment(1, f).transpose();
        mean += x.segment(1, f);
        free_end += x[9] * x[9];
        const double e = sample_perturbation(fixed, 7, k)(9, 0);
        fixed_end += e * e;
    }
    mean /= draws;
    const Eigen::MatrixXd cov = acc / draws - mean * mean.transpose();
    const Eigen::MatrixXd expected = c.sigma() * c.sigma() * c.free_inverse();
    const double err = (cov - expected).norm() / expected.norm();
    return {err < 0.10 && fixed_end == 0.0 && free_end > 0.0,
            fmt("Frobenius relative error %.4f, fixed-goal endpoint variance %.1e, goal-set %.3e", err,
                fixed_end / draws, free_end / draws)};
}

Outcome ioc_loss() {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int features = 47, records = 12, samples = 50;
    IocDataset ds;
    for (int k = 0; k < features; ++k) ds.labels.push_back("f" + std::to_string(k));
    for (int r = 0; r < records; ++r) {
        IocRecord rec;
        rec.demo = r;
        rec.demo_features = Eigen::VectorXd::NullaryExpr(features, [&] { return u(rng); });
        rec.sample_features = Eigen::MatrixXd::NullaryExpr(samples, features, [&] { return u(rng); });
        ds.records.push_back(rec);
    }
    ds.normalize();

    double worst_grad = 0.0;
    bool nonneg = true;
    for (int k = 0; k < 50; ++k) {
        const Eigen::VectorXd w = 2.0 * gaussian(features, 1, rng);
        Eigen::VectorXd g;
        const double l = piirl_loss(w, ds, &g);
        nonneg &= l >= 0.0;
        Eigen::VectorXd fd(features);
        for (int i = 0; i < features; ++i) {
            const double h = 1e-5;
            Eigen::VectorXd a = w, b = w;
            a[i] += h;
            b[i] -= h;
            fd[i] = (piirl_loss(a, ds) - piirl_loss(b, ds)) / (2 * h);
        }
        worst_grad = std::max(worst_grad, (g - fd).norm() / fd.norm());
    }
    int convex = 0;
    for (int k = 0; k < 100; ++k) {
        const Eigen::VectorXd a = 3.0 * gaussian(features, 1, rng);
        const Eigen::VectorXd b = 3.0 * gaussian(features, 1, rng);
        const double t = u(rng);
        const double la = piirl_loss(a, ds), lb = piirl_loss(b, ds);
        nonneg &= la >= 0.0 && lb >= 0.0;
        convex += piirl_loss(t * a + (1 - t) * b, ds) <= t * la + (1 - t) * lb + 1e-9 * (la + lb);
    }
    return {worst_grad < 1e-6 && nonneg && convex == 100,
            fmt("worst gradient relative error %.2e, convexity %.0f/100, loss >= 0: %.0f", worst_grad, convex,
                nonneg ? 1.0 : 0.0)};
}

double true_cost(const Experiment& exp, const WeightVector& w_true, const Trajectory& t) {
    return w_true.cost(compute_feature_vector(t, exp.model, exp.scene, exp.spec.planner.features, {0.0, false}).values);
}

Outcome weight_recovery() {
    const auto t0 = clock_type::now();
    ExperimentSpec spec = load_experiment(data_dir / "experiment_static.json");
    spec.output_dir = work_dir / "static";
    fs::remove_all(spec.output_dir);
    const Experiment exp = open_experiment(spec);
    std::ostringstream log;
    const auto demos = cmd_synth_demos(exp, log);
    const WeightVector w_true = load_weights(spec.output_dir / "w_true.json");

    int passed = 0;
    std::ostringstream detail;
    for (int i = 0; i < static_cast<int>(demos.size()); ++i) {
        const LearnOutput learned = cmd_learn(exp, i, false, log);
        const WeightVector b1 =
            baseline_weights(BaselineKind::baseline1, spec.planner.features, exp.model, learned.ranges);
        const auto lp = cmd_predict(exp, learned.result.weights, PredictMode::single_shot, 1, {i}, "learned", log);
        const auto bp = cmd_predict(exp, b1, PredictMode::single_shot, 1, {i}, "baseline1", log);
        if (lp.files.empty() || bp.files.empty()) {
            detail << " " << i << ":failed";
            continue;
        }
        const Trajectory demo = read_trajectory_csv(demos[i]);
        const Trajectory pred = read_trajectory_csv(lp.files[0]);
        const Trajectory base = read_trajectory_csv(bp.files[0]);
        const ScoreRecord sp = score_report(pred, demo, exp.model);
        const ScoreRecord sb = score_report(base, demo, exp.model);
        const double ratio = true_cost(exp, w_true, pred) / true_cost(exp, w_true, demo);
        const bool ok = ratio <= 1.10 && sp.dtw_task <= sb.dtw_task && sp.dtw_joints <= sb.dtw_joints;
        passed += ok;
        detail << fmt(" %.0f:ratio=%.2f,dtw=%.2f/%.2f,%.1f/%.1f", i, ratio, sp.dtw_task, sb.dtw_task)
               << fmt("|%.1f/%.1f", sp.dtw_joints, sb.dtw_joints);
    }
    const double secs = seconds_since(t0);
    return {passed >= 6 && secs < 900.0, fmt("%.0f/7 cases pass, %.0f s;", passed, secs) + detail.str()};
}

Outcome replanning_interference() {
    ExperimentSpec spec = load_experiment(data_dir / "experiment_sweep.json");
    spec.output_dir = work_dir / "sweep";
    fs::remove_all(spec.output_dir);
    const Experiment exp = open_experiment(spec);
    const SynthesisSpec& syn = *spec.synthesize;
    const WeightVector w = reference_weights(exp, syn.w_true);

    // Reference: planned against the moving passive arm with full knowledge of its motion.
    PlannerConfig rc = spec.planner;
    rc.iterations = syn.iterations;
    rc.seed = syn.seed;
    const Configuration q0 = exp.scene.rest_posture;
    GoalSet goal;
    goal.target = syn.goals.at(0);
    const PassiveTiming moving{0.0, false};
    const Trajectory reference = goalset_stomp(exp.model, exp.scene, q0, rest_buffer(q0), goal, w, rc, moving).trajectory;
    const bool reference_free = colliding_waypoints(reference, exp.model, exp.scene, moving).empty();

    int replan_free = 0, single_collides = 0;
    double dtw_single = 0.0, dtw_replan = 0.0;
    for (int s = 0; s < 10; ++s) {
        const Trajectory a = predict_case(exp, reference, w, PredictMode::single_shot, 1 + s);
        const Trajectory b = predict_case(exp, reference, w, PredictMode::replan, 1 + s);
        single_collides += !colliding_waypoints(a, exp.model, exp.scene, moving).empty();
        replan_free += colliding_waypoints(b, exp.model, exp.scene, moving).empty();
        dtw_single += dtw(a, reference, exp.model, DistanceMetric{}).cost / 10.0;
        dtw_replan += dtw(b, reference, exp.model, DistanceMetric{}).cost / 10.0;
    }
    const bool ok = reference_free && replan_free == 10 && single_collides == 10 && dtw_replan < dtw_single;
    return {ok, fmt("reference collision-free %.0f; replan collision-free %.0f/10, single-shot colliding %.0f/10; "
                    "mean task DTW replan %.3f",
                    reference_free ? 1.0 : 0.0, replan_free, single_collides, dtw_replan) +
                    fmt(" vs single-shot %.3f", dtw_single)};
}

SpeedProfile bell(double ripple) {
    SpeedProfile p;
    p.dt = 0.01;
    for (int i = 0; i <= 100; ++i) {
        const double s = i / 100.0;
        p.samples.push_back(30.0 * s * s * (1 - s) * (1 - s) + ripple * std::sin(2.0 * M_PI * 10.0 * i * p.dt));
    }
    return p;
}

Outcome evaluation_metrics() {
    auto abs_diff = [](double a, double b) { return std::abs(a - b); };
    const std::vector<double> a = {1, 2, 3}, b = {1, 3};
    const double d = dtw(a, b, abs_diff).cost;
    const double enumerated = oracle::dtw_enumerate(3, 2, [&](int i, int j) { return abs_diff(a[i], b[j]); });

    Pose p1, p2;
    p1.orientation = Eigen::Quaterniond(1, 0, 0, 0);
    p2.orientation = Eigen::Quaterniond(0, 0, 0, 1);
    const double qd = pose_distance(p1, p2);

    const double smooth = spectral_arc_length(bell(0.0), 20.0, 1000);
    const double rippled = spectral_arc_length(bell(0.2), 20.0, 1000);
    const bool ok = d == 1.0 && enumerated == 1.0 && std::abs(qd - 0.1 * M_PI / 2) <= 1e-12 && rippled < smooth;
    return {ok, fmt("DTW %.3g (enumeration %.3g), quaternion distance error %.1e, SAL smooth %.4f", d, enumerated,
                    std::abs(qd - 0.1 * M_PI / 2), smooth) +
                    fmt(" rippled %.4f", rippled)};
}

Outcome baseline_definitions() {
    const KinematicModel human = load_model(data_dir / "human_23dof.json");
    const FeatureSetConfig fc;
    const WeightVector b0 = baseline_weights(BaselineKind::baseline0, fc, human);
    const WeightVector b1 = baseline_weights(BaselineKind::baseline1, fc, human);
    const int n0 = static_cast<int>((b0.values.array() != 0.0).count());
    const int n1 = static_cast<int>((b1.values.array() != 0.0).count());
    std::set<double> distinct;
    bool posture_zero = true;
    for (int f = 0; f < b1.size(); ++f) {
        if (b1.values[f] != 0.0) distinct.insert(b1.values[f]);
        if (b0.labels[f].rfind("posture_", 0) == 0) posture_zero &= b0.values[f] == 0.0 && b1.values[f] == 0.0;
    }
    return {n0 == 1 && n1 == 17 && distinct.size() == 1 && posture_zero,
            fmt("baseline0 nonzero %.0f, baseline1 nonzero %.0f with %.0f distinct values, posture zero %.0f", n0, n1,
                static_cast<double>(distinct.size()), posture_zero ? 1.0 : 0.0)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
        {1, metric_identity},  {2, band_structure},         {3, goal_projection},
        {4, sampler_fidelity}, {5, ioc_loss},               {6, weight_recovery},
        {7, replanning_interference}, {8, evaluation_metrics}, {9, baseline_definitions}};
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));
    fs::create_directories(work_dir);

    int failures = 0;
    for (const auto& [id, run] : criteria) {
        if (!only.empty() && !only.count(id)) continue;
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << o.detail << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
