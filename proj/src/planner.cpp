#include "reachpred/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

namespace reachpred {

namespace {

struct Scored {
    Trajectory traj;
    Eigen::VectorXd per_waypoint;
    double total = 0.0;
};

class CostModel {
  public:
    CostModel(const KinematicModel& model, const Scene& scene, const WeightVector& w,
              const PlannerConfig& cfg, const PassiveTiming& timing)
        : model_(model), scene_(scene), cfg_(cfg), timing_(timing) {
        w.check_labels(feature_labels(cfg.features, model));
        raw_ = w.raw_weights();
        offset_ = -w.values.dot(w.ranges.lo.cwiseProduct(w.ranges.scale()));
    }

    Scored score(Trajectory traj) const {
        Scored s;
        s.per_waypoint = feature_contributions(traj, model_, scene_, cfg_.features, timing_) * raw_;
        if (cfg_.w_obs != 0.0)
            s.per_waypoint += cfg_.w_obs * obstacle_contributions(traj, model_, scene_, cfg_.clearance);
        s.total = s.per_waypoint.sum() + offset_;
        s.traj = std::move(traj);
        return s;
    }

  private:
    const KinematicModel& model_;
    const Scene& scene_;
    const PlannerConfig& cfg_;
    PassiveTiming timing_;
    Eigen::VectorXd raw_;
    double offset_ = 0.0;
};

// Projects onto the limits, then the goal set; nullopt when the goal is not reached.
std::optional<Trajectory> project(const Trajectory& t, const ControlMetric& metric,
                                  const KinematicModel& model, const GoalSet& goal,
                                  const ProjectionOptions& options) {
    ProjectionResult r =
        limit_aware_goal_projection(project_to_joint_limits(t, metric, model), metric, model, goal, options);
    if (!r.converged) return std::nullopt;
    return std::move(r.trajectory);
}

}  // namespace

double trajectory_cost(const Trajectory& traj, const KinematicModel& model, const Scene& scene,
                       const WeightVector& w, double w_obs, const FeatureSetConfig& features,
                       const PassiveTiming& timing, double clearance) {
    w.check_labels(feature_labels(features, model));
    double c = w.cost(compute_feature_vector(traj, model, scene, features, timing).values);
    if (w_obs != 0.0) c += w_obs * obstacle_cost(traj, model, scene, clearance);
    return c;
}

Eigen::MatrixXd buffer_from_boundary(const Configuration& q0, const BoundaryState& boundary, double dt) {
    const Eigen::VectorXd b1 = q0 - boundary.velocity * dt;
    const Eigen::VectorXd b2 = boundary.acceleration * dt * dt - q0 + 2.0 * b1;
    const Eigen::VectorXd b3 = q0 - 3.0 * b1 + 3.0 * b2 - boundary.jerk * dt * dt * dt;
    Eigen::MatrixXd b(3, q0.size());
    b.row(0) = b3.transpose();
    b.row(1) = b2.transpose();
    b.row(2) = b1.transpose();
    return b;
}

PlanResult goalset_stomp(const KinematicModel& model, const Scene& scene, const Configuration& q_start,
                         const Eigen::MatrixXd& buffer, const GoalSet& goal, const WeightVector& w,
                         const PlannerConfig& cfg, const PassiveTiming& timing, const Trajectory* initial) {
    if (cfg.iterations < 1) throw std::invalid_argument("planner needs at least one iteration");
    if (cfg.rollouts < 2) throw std::invalid_argument("planner needs at least two rollouts");
    if (cfg.w_obs < 0.0) throw std::invalid_argument("obstacle weight must be non-negative");
    if (!within_limits(model, q_start, 1e-9)) throw std::invalid_argument("start configuration violates joint limits");
    const CostModel costs(model, scene, w, cfg, timing);

    const int n = initial ? initial->size() : cfg.waypoints;
    const double dt = initial ? initial->dt() : cfg.dt;
    const int m = model.dof();
    const ControlMetric metric =
        ControlMetric::make(n, m, dt, MetricVariant::goal_set, cfg.sigma, model.noise_scales());

    Trajectory seed_traj;
    if (initial) {
        if (initial->dof() != m || (initial->front() - q_start).cwiseAbs().maxCoeff() > 1e-12)
            throw std::invalid_argument("initial trajectory does not start at q_start");
        seed_traj = Trajectory(initial->waypoints(), dt, buffer);
    } else {
        IkOptions ik = cfg.ik;
        ik.frame = goal.frame;
        ik.tolerance = std::min(ik.tolerance, goal.epsilon);
        const IkResult seed = ik_seed(model, q_start, goal.target, ik);
        if (!seed.success) throw NumericalError("inverse kinematics found no goal configuration");
        seed_traj = min_acceleration_interpolation(q_start, buffer, seed.q, n, dt);
    }
    std::optional<Trajectory> start = project(seed_traj, metric, model, goal, cfg.projection);
    if (!start) throw NumericalError("initial trajectory could not be projected onto the goal set");

    Scored current = costs.score(std::move(*start));
    Scored best = current;

    // Smoothing operator: R^-1 on the free waypoints, each column normalized to unit sum.
    const int f = metric.free_count();
    Eigen::MatrixXd smooth = metric.free_inverse();
    for (int c = 0; c < f; ++c) smooth.col(c) /= smooth.col(c).sum();

    PlanResult result;
    std::vector<Scored> elites;
    for (int it = 0; it < cfg.iterations; ++it) {
        const double noise = std::max(cfg.min_noise, std::pow(cfg.noise_decay, it));
        const ControlMetric sampler = metric.with_sigma(cfg.sigma * noise);

        std::vector<Scored> cands;
        for (int k = 0; k < cfg.rollouts; ++k) {
            Trajectory t = current.traj;
            t.waypoints() += sample_perturbation(sampler, cfg.seed,
                                                 static_cast<std::uint64_t>(it) * cfg.rollouts + k);
            if (auto p = project(t, metric, model, goal, cfg.projection)) cands.push_back(costs.score(std::move(*p)));
        }
        for (auto& e : elites) cands.push_back(std::move(e));
        elites.clear();
        if (cands.size() < 2) {
            ++result.skipped_iterations;
            result.cost_trace.push_back(best.total);
            continue;
        }

        // Per-waypoint probabilities from the cost-to-go of each candidate.
        const int kc = static_cast<int>(cands.size());
        Eigen::MatrixXd togo(n, kc);
        for (int k = 0; k < kc; ++k) {
            double acc = 0.0;
            for (int i = n - 1; i >= 0; --i) togo(i, k) = acc += cands[k].per_waypoint[i];
        }
        Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(f, m);
        for (int i = 1; i < n; ++i) {
            const double lo = togo.row(i).minCoeff();
            const double hi = togo.row(i).maxCoeff();
            Eigen::VectorXd p(kc);
            for (int k = 0; k < kc; ++k)
                p[k] = hi - lo > 1e-300 ? std::exp(-cfg.temperature * (togo(i, k) - lo) / (hi - lo)) : 1.0;
            p /= p.sum();
            for (int k = 0; k < kc; ++k)
                delta.row(i - 1) += p[k] * (cands[k].traj.waypoints().row(i) - current.traj.waypoints().row(i));
        }

        Trajectory next = current.traj;
        next.waypoints().middleRows(1, f) += smooth * delta;
        if (auto p = project(next, metric, model, goal, cfg.projection)) {
            current = costs.score(std::move(*p));
            if (current.total < best.total) best = current;
        }
        std::sort(cands.begin(), cands.end(), [](const Scored& a, const Scored& b) { return a.total < b.total; });
        if (cands.front().total < best.total) best = cands.front();
        for (int k = 0; k < std::min<int>(cfg.reuse, kc); ++k) elites.push_back(std::move(cands[k]));
        result.cost_trace.push_back(best.total);
    }

    result.trajectory = std::move(best.traj);
    result.cost = best.total;
    result.goal_error = goal_error(result.trajectory, model, goal);
    result.converged = result.goal_error < goal.epsilon;
    return result;
}

PlanResult goalset_stomp(const KinematicModel& model, const Scene& scene, const Configuration& q_start,
                         const BoundaryState& boundary, const GoalSet& goal, const WeightVector& w,
                         const PlannerConfig& cfg, const PassiveTiming& timing) {
    return goalset_stomp(model, scene, q_start, buffer_from_boundary(q_start, boundary, cfg.dt), goal, w,
                         cfg, timing);
}

ReplanResult replan_loop(const KinematicModel& model, const Scene& scene, const Configuration& q_start,
                         const Eigen::MatrixXd& buffer, const GoalSet& goal, const WeightVector& w,
                         const PlannerConfig& cfg, double tick, double horizon, double time_origin,
                         int min_length) {
    if (!(tick > 0.0)) throw std::invalid_argument("tick must be positive");
    const double dt = cfg.dt;
    const int total = horizon > 0.0 ? static_cast<int>(std::lround(horizon / dt)) + 1 : cfg.waypoints;
    const int step = std::max(1, static_cast<int>(std::lround(tick / dt)));
    min_length = std::max(min_length, 5);

    // History before the motion, oldest first; extended as ticks execute.
    Eigen::MatrixXd history = Trajectory(rest_buffer(q_start, 2), dt, buffer).padded(3).topRows(3);
    std::vector<Eigen::RowVectorXd> executed;
    ReplanResult out;
    Configuration q = q_start;
    std::optional<Trajectory> warm;

    for (int start = 0;;) {
        const int remaining = total - start;
        PlannerConfig c = cfg;
        c.waypoints = remaining;
        c.seed = cfg.seed + 7919ull * static_cast<std::uint64_t>(out.planning_calls);
        const PassiveTiming timing{time_origin + start * dt, true};
        PlanResult plan;
        try {
            plan = goalset_stomp(model, scene, q, history, goal, w, c, timing, warm ? &*warm : nullptr);
        } catch (const NumericalError&) {
            out.failed = true;
            break;
        }
        ++out.planning_calls;
        out.tick_starts.push_back(start);
        const bool last = remaining - step < min_length;
        const int run = last ? remaining : step;
        for (int i = 0; i < run; ++i) executed.push_back(plan.trajectory.waypoints().row(i));
        if (last) break;

        Eigen::MatrixXd h(3 + run, model.dof());
        h.topRows(3) = history;
        for (int i = 0; i < run; ++i) h.row(3 + i) = plan.trajectory.waypoints().row(i);
        history = h.bottomRows(3);
        q = plan.trajectory.waypoint(step);
        warm = Trajectory(plan.trajectory.waypoints().bottomRows(remaining - step), dt);
        start += step;
    }

    if (executed.size() < 2) {
        out.failed = true;
        Eigen::MatrixXd w0(2, model.dof());
        w0.row(0) = q_start.transpose();
        w0.row(1) = q_start.transpose();
        out.trajectory = Trajectory(w0, dt, buffer);
        return out;
    }
    Eigen::MatrixXd wp(static_cast<int>(executed.size()), model.dof());
    for (std::size_t i = 0; i < executed.size(); ++i) wp.row(i) = executed[i];
    out.trajectory = Trajectory(std::move(wp), dt, buffer);
    return out;
}

WeightVector baseline_weights(BaselineKind kind, const FeatureSetConfig& features,
                              const KinematicModel& model, const std::optional<FeatureRanges>& ranges) {
    WeightVector w;
    w.labels = feature_labels(features, model);
    w.values = Eigen::VectorXd::Zero(static_cast<int>(w.labels.size()));
    w.ranges = ranges ? *ranges : FeatureRanges::identity(static_cast<int>(w.labels.size()));
    if (w.ranges.size() != static_cast<int>(w.labels.size()))
        throw std::invalid_argument("baseline ranges do not match the feature set");
    bool found_acc = false;
    for (std::size_t f = 0; f < w.labels.size(); ++f) {
        const std::string& l = w.labels[f];
        if (l == "smooth_config_acc") {
            w.values[f] = 1.0;
            found_acc = true;
        }
        if (kind == BaselineKind::baseline1 && l.rfind("dist_", 0) == 0) w.values[f] = 1.0;
    }
    if (!found_acc) throw std::invalid_argument("baselines need the smoothness feature group");
    if (kind == BaselineKind::baseline1 && !features.link_distances)
        throw std::invalid_argument("baseline1 needs the link distance feature group");
    return w;
}

}  // namespace reachpred
