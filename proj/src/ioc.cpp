#include "reachpred/ioc.hpp"

#include "reachpred/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace reachpred {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::uint64_t segment_seed(std::uint64_t seed, int demo, int start) {
    return splitmix(splitmix(seed ^ splitmix(static_cast<std::uint64_t>(demo))) +
                    static_cast<std::uint64_t>(start));
}

struct Job {
    int demo;
    Segment segment;
};

}  // namespace

void IocDataset::normalize() {
    std::vector<Eigen::VectorXd> all;
    for (const auto& r : records)
        for (int s = 0; s < r.sample_features.rows(); ++s) all.push_back(r.sample_features.row(s).transpose());
    if (all.empty()) throw NumericalError("dataset has no accepted samples");
    ranges = FeatureRanges::from_samples(all);
    demo_normalized.clear();
    samples_normalized.clear();
    const Eigen::VectorXd scale = ranges.scale();
    for (const auto& r : records) {
        demo_normalized.push_back(ranges.apply(r.demo_features));
        Eigen::MatrixXd s = r.sample_features.rowwise() - ranges.lo.transpose();
        s = s * scale.asDiagonal();
        samples_normalized.push_back(std::move(s));
    }
}

IocDataset IocDataset::subset(const std::function<bool(const IocRecord&)>& keep) const {
    IocDataset out;
    out.labels = labels;
    for (const auto& r : records)
        if (keep(r)) out.records.push_back(r);
    out.normalize();
    return out;
}

IocDataset build_dataset(const std::vector<DemoInput>& demos, const KinematicModel& model,
                         const Scene& scene, const IocConfig& cfg) {
    if (demos.empty()) throw std::invalid_argument("build_dataset needs at least one demonstration");
    if (cfg.samples < 1) throw std::invalid_argument("samples per segment must be at least 1");

    std::vector<Job> jobs;
    for (int d = 0; d < static_cast<int>(demos.size()); ++d)
        for (auto& seg : segment_demonstration(demos[d].trajectory, cfg.advance, cfg.min_length))
            jobs.push_back({d, std::move(seg)});

    std::map<int, ControlMetric> metrics;
    for (const auto& j : jobs) {
        const int n = j.segment.trajectory.size();
        if (!metrics.count(n))
            metrics.emplace(n, ControlMetric::make(n, model.dof(), j.segment.trajectory.dt(),
                                                   MetricVariant::goal_set, cfg.sigma,
                                                   model.noise_scales()));
    }

    std::vector<IocRecord> records(jobs.size());
    std::vector<bool> ok(jobs.size(), false);
    parallel_for(static_cast<int>(jobs.size()), cfg.threads, [&](int idx) {
        const Job& job = jobs[idx];
        const Trajectory& traj = job.segment.trajectory;
        const ControlMetric& metric = metrics.at(traj.size());
        IocRecord& rec = records[idx];
        rec.demo = job.demo;
        rec.segment_start = job.segment.start_index;
        rec.boundary = job.segment.boundary;
        rec.timing = {demos[job.demo].time_origin + job.segment.start_index * traj.dt(), true};
        rec.demo_features = compute_feature_vector(traj, model, scene, cfg.features, rec.timing).values;

        GoalSet goal;
        goal.frame = cfg.features.task_frame;
        goal.epsilon = cfg.goal_epsilon;
        goal.target = forward_kinematics(model, traj.back(), goal.frame).position;

        Configuration passive_q;
        if (scene.passive) passive_q = scene.passive->configuration_at(rec.timing.time_origin);
        const std::uint64_t seed = segment_seed(cfg.seed, job.demo, job.segment.start_index);

        std::vector<Eigen::VectorXd> accepted;
        for (int k = 0; k < cfg.samples; ++k) {
            Trajectory t = traj;
            t.waypoints() += sample_perturbation(metric, seed, static_cast<std::uint64_t>(k));
            t = project_to_joint_limits(t, metric, model);
            ProjectionResult p = limit_aware_goal_projection(t, metric, model, goal, cfg.projection);
            bool keep = p.converged;
            if (keep && cfg.reject_collisions) {
                for (int i = 0; i < p.trajectory.size() && keep; ++i)
                    keep = !waypoint_in_collision(model, p.trajectory.waypoint(i), scene,
                                                  scene.passive ? &passive_q : nullptr);
            }
            if (!keep) {
                ++rec.rejected;
                continue;
            }
            accepted.push_back(compute_feature_vector(p.trajectory, model, scene, cfg.features, rec.timing).values);
        }
        if (accepted.empty()) return;
        rec.sample_features.resize(static_cast<int>(accepted.size()), rec.demo_features.size());
        for (std::size_t s = 0; s < accepted.size(); ++s) rec.sample_features.row(s) = accepted[s].transpose();
        ok[idx] = true;
    });

    IocDataset ds;
    ds.labels = feature_labels(cfg.features, model);
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (ok[i]) {
            ds.records.push_back(std::move(records[i]));
        } else {
            std::ostringstream msg;
            msg << "demo " << jobs[i].demo << " segment at waypoint " << jobs[i].segment.start_index
                << ": all " << cfg.samples << " samples rejected";
            ds.dropped.push_back(msg.str());
        }
    }
    if (ds.records.empty()) throw NumericalError("every dataset record was dropped");
    ds.normalize();
    return ds;
}

double piirl_loss(const Eigen::VectorXd& w, const IocDataset& dataset, Eigen::VectorXd* gradient) {
    if (w.size() != dataset.feature_count()) throw std::invalid_argument("weight length does not match dataset");
    if (dataset.records.empty()) throw std::invalid_argument("dataset is empty");
    if (gradient) *gradient = Eigen::VectorXd::Zero(w.size());
    double total = 0.0;
    for (std::size_t r = 0; r < dataset.records.size(); ++r) {
        const Eigen::VectorXd& demo = dataset.demo_normalized[r];
        const Eigen::MatrixXd& samples = dataset.samples_normalized[r];
        if (!demo.allFinite() || !samples.allFinite()) throw NumericalError("non-finite features in dataset");
        const double s0 = w.dot(demo);
        const Eigen::VectorXd s = samples * w;
        const double m = std::min(s0, s.size() ? s.minCoeff() : s0);
        const Eigen::VectorXd e = (m - s.array()).exp();
        const double e0 = std::exp(m - s0);
        const double z = e0 + e.sum();
        total += s0 - m + std::log(z);
        if (gradient) {
            *gradient += demo - (e0 * demo + samples.transpose() * e) / z;
        }
    }
    return total;
}

LearnResult learn_weights(const IocDataset& dataset, const IocConfig& cfg) {
    if (cfg.l1_strength < 0.0) throw std::invalid_argument("l1 strength must be non-negative");
    const int f = dataset.feature_count();
    const double lambda = cfg.l1_strength;
    auto objective = [&](const Eigen::VectorXd& w, Eigen::VectorXd* g) {
        const double v = piirl_loss(w, dataset, g) + lambda * w.sum();
        if (g) g->array() += lambda;
        return v;
    };

    Eigen::VectorXd w = Eigen::VectorXd::Zero(f);
    Eigen::VectorXd g;
    double fw = objective(w, &g);
    double t = 1.0 / std::max(1.0, static_cast<double>(dataset.records.size()));
    LearnResult result;
    const double tol = cfg.tolerance * std::max(1.0, double(dataset.records.size()));

    for (int it = 0; it < cfg.max_iterations; ++it) {
        result.iterations = it + 1;
        // Stationarity of the bound-constrained problem.
        const Eigen::VectorXd pg = w - (w - g).cwiseMax(0.0);
        if (pg.lpNorm<Eigen::Infinity>() <= tol) {
            result.converged = true;
            break;
        }
        Eigen::VectorXd w_new, g_new;
        double f_new = 0.0;
        for (int bt = 0; bt < 60; ++bt) {
            w_new = (w - t * g).cwiseMax(0.0);
            f_new = objective(w_new, &g_new);
            const Eigen::VectorXd step = w_new - w;
            if (f_new <= fw + g.dot(step) + step.squaredNorm() / (2.0 * t) + 1e-12 * std::abs(fw)) break;
            t *= 0.5;
        }
        const Eigen::VectorXd s = w_new - w;
        const Eigen::VectorXd y = g_new - g;
        w = std::move(w_new);
        g = std::move(g_new);
        fw = f_new;
        const double sy = s.dot(y);
        t = sy > 1e-300 ? s.squaredNorm() / sy : t * 2.0;
        t = std::clamp(t, 1e-12, 1e12);
    }

    result.weights.labels = dataset.labels;
    result.weights.values = w;
    result.weights.ranges = dataset.ranges;
    result.objective = fw;
    return result;
}

std::vector<double> default_regularizer_grid() {
    return {1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 3e-1, 1.0, 3.0};
}

CrossValidation cross_validate_regularizer(const IocDataset& dataset, const std::vector<double>& grid,
                                           int folds, const IocConfig& cfg) {
    if (grid.empty()) throw std::invalid_argument("regularizer grid is empty");
    if (folds < 2) throw std::invalid_argument("cross validation needs at least 2 folds");
    const int n = static_cast<int>(dataset.records.size());
    if (n < folds) throw std::invalid_argument("fewer records than folds");

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(cfg.seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> fold_of(n);
    for (int i = 0; i < n; ++i) fold_of[order[i]] = i % folds;

    // Folds share the full dataset normalization so scores are comparable.
    auto pick = [&](bool train, int fold) {
        IocDataset d;
        d.labels = dataset.labels;
        d.ranges = dataset.ranges;
        for (int i = 0; i < n; ++i) {
            if ((fold_of[i] != fold) == train) {
                d.records.push_back(dataset.records[i]);
                d.demo_normalized.push_back(dataset.demo_normalized[i]);
                d.samples_normalized.push_back(dataset.samples_normalized[i]);
            }
        }
        return d;
    };

    CrossValidation cv;
    cv.grid = grid;
    double best_score = std::numeric_limits<double>::infinity();
    for (double l1 : grid) {
        IocConfig c = cfg;
        c.l1_strength = l1;
        double held_out = 0.0;
        for (int k = 0; k < folds; ++k) {
            const IocDataset train = pick(true, k);
            const IocDataset test = pick(false, k);
            held_out += piirl_loss(learn_weights(train, c).weights.values, test);
        }
        const double score = held_out / n;
        cv.scores.push_back(score);
        if (score < best_score) {
            best_score = score;
            cv.best = l1;
        }
    }
    return cv;
}

}  // namespace reachpred
