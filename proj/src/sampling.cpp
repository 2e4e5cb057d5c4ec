#include "reachpred/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace reachpred {

namespace {

void check_shape(const Trajectory& traj, const ControlMetric& metric) {
    if (traj.size() != metric.waypoints() || traj.dof() != metric.dof())
        throw TrajectoryError("trajectory shape does not match control metric");
}

}  // namespace

Eigen::MatrixXd sample_perturbation(const ControlMetric& metric, std::uint64_t seed,
                                    std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(stream >> 32)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);

    const int f = metric.free_count();
    const int m = metric.dof();
    Eigen::MatrixXd z(f, m);
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < f; ++i) z(i, j) = normal(rng);
    // R_f = L L^T, so L^-T z has covariance R_f^-1.
    const Eigen::MatrixXd y = metric.free_factor().matrixU().solve(z);

    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(metric.waypoints(), m);
    for (int j = 0; j < m; ++j)
        out.col(j).segment(metric.free_begin(), f) = metric.sigma() * metric.dof_scale()[j] * y.col(j);
    return out;
}

SampleBatch sample_trajectories(const Trajectory& nominal, const ControlMetric& metric, int count,
                                std::uint64_t seed) {
    check_shape(nominal, metric);
    SampleBatch batch;
    batch.seed = seed;
    batch.samples.reserve(count);
    for (int k = 0; k < count; ++k) {
        Trajectory t = nominal;
        t.waypoints() += sample_perturbation(metric, seed, static_cast<std::uint64_t>(k));
        batch.samples.push_back(std::move(t));
    }
    batch.accepted.assign(count, true);
    return batch;
}

double goal_error(const Trajectory& traj, const KinematicModel& model, const GoalSet& goal) {
    return (forward_kinematics(model, traj.back(), goal.frame).position - goal.target).norm();
}

namespace {

ProjectionResult project_goal(const Trajectory& traj, const ControlMetric& metric,
                              const KinematicModel& model, const GoalSet& goal,
                              const ProjectionOptions& options, bool respect_limits) {
    check_shape(traj, metric);
    if (metric.variant() != MetricVariant::goal_set)
        throw TrajectoryError("goal-set projection requires the goal-set control metric");
    if (!(goal.epsilon > 0.0)) throw TrajectoryError("goal epsilon must be positive");
    if (traj.dof() != model.dof()) throw ModelError("trajectory and model DoF differ");

    const int frame = model.frame_index(goal.frame);
    const int m = model.dof();
    const int f = metric.free_count();
    const int first = metric.free_begin();
    // Every update is (column of R^-1 for q_N) x (per-DoF step), so only q_N is iterated
    // explicitly and the whole trajectory is shifted once at the end.
    const Eigen::VectorXd c = metric.free_inverse().col(f - 1);
    const double r_nn = c[f - 1];
    const Eigen::VectorXd s2 = metric.dof_scale().array().square();

    Eigen::VectorXd vmin = Eigen::VectorXd::Constant(m, -std::numeric_limits<double>::infinity());
    Eigen::VectorXd vmax = Eigen::VectorXd::Constant(m, std::numeric_limits<double>::infinity());
    if (respect_limits) {
        const double tol = 1e-12;
        for (int j = 0; j < m; ++j) {
            const double lo = model.joints()[j].lower;
            const double hi = model.joints()[j].upper;
            for (int i = 0; i < f; ++i) {
                const double x = traj.waypoints()(first + i, j);
                const double ci = c[i];
                if (std::abs(ci) < 1e-300) continue;
                double a = (lo - x) / ci;
                double b = (hi - x) / ci;
                if (ci < 0.0) std::swap(a, b);
                vmin[j] = std::max(vmin[j], std::min(a, 0.0) - tol);
                vmax[j] = std::min(vmax[j], std::max(b, 0.0) + tol);
            }
        }
    }

    ProjectionResult result;
    result.blocked_iterations.assign(m, 0);
    const Eigen::VectorXd q_last = traj.back();
    Eigen::VectorXd total = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd q = q_last;
    std::vector<bool> blocked(m, false);

    int it = 0;
    double err = 0.0;
    for (;; ++it) {
        const ChainTransforms chain = chain_transforms(model, q);
        const Eigen::Vector3d h = frame_position(model, chain, frame) - goal.target;
        err = h.norm();
        if (err < goal.epsilon || it >= options.max_iterations) break;
        Eigen::Matrix3Xd J = jacobian(model, chain, frame);

        std::fill(blocked.begin(), blocked.end(), false);
        Eigen::VectorXd u(m);
        for (int pass = 0; pass <= m; ++pass) {
            Eigen::Matrix3Xd Jm = J;
            for (int j = 0; j < m; ++j)
                if (blocked[j]) Jm.col(j).setZero();
            const Eigen::Matrix3Xd JS = Jm * s2.asDiagonal();
            Eigen::Matrix3d A = r_nn * JS * Jm.transpose();
            A.diagonal().array() += options.regularization * r_nn * s2.maxCoeff();
            const Eigen::Vector3d y = A.ldlt().solve(h);
            u = -(JS.transpose() * y);
            if (!respect_limits) break;
            bool changed = false;
            for (int j = 0; j < m; ++j) {
                if (blocked[j]) continue;
                const double next = total[j] + options.eta * u[j];
                if (next < vmin[j] || next > vmax[j]) {
                    blocked[j] = true;
                    changed = true;
                }
            }
            if (!changed) break;
        }
        for (int j = 0; j < m; ++j) {
            if (blocked[j]) {
                u[j] = 0.0;
                ++result.blocked_iterations[j];
            }
        }
        total += options.eta * u;
        q = q_last + r_nn * total;
    }

    Eigen::MatrixXd w = traj.waypoints();
    w.middleRows(first, f).noalias() += c * total.transpose();
    result.trajectory = Trajectory(std::move(w), traj.dt(), traj.buffer());
    result.iterations = it;
    result.goal_error = err;
    result.converged = err < goal.epsilon;
    return result;
}

// Primal active-set method for min 1/2 d^T H d subject to lo <= d <= hi.
Eigen::VectorXd box_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& lo,
                       const Eigen::VectorXd& hi) {
    const int n = static_cast<int>(H.rows());
    enum Side : signed char { none = 0, lower = -1, upper = 1 };
    std::vector<Side> work(n, none);
    Eigen::VectorXd d = Eigen::VectorXd::Zero(n).cwiseMax(lo).cwiseMin(hi);
    for (int i = 0; i < n; ++i) {
        if (d[i] == lo[i] && lo[i] > 0.0) work[i] = lower;
        if (d[i] == hi[i] && hi[i] < 0.0) work[i] = upper;
    }
    const double scale = H.diagonal().maxCoeff();
    const double step_tol = 1e-13 * std::max(1.0, (hi - lo).cwiseAbs().maxCoeff());

    for (int iter = 0; iter < 20 * n + 20; ++iter) {
        std::vector<int> free_idx;
        for (int i = 0; i < n; ++i)
            if (work[i] == none) free_idx.push_back(i);
        const Eigen::VectorXd g = H * d;
        const int nf = static_cast<int>(free_idx.size());
        Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
        if (nf > 0) {
            Eigen::MatrixXd Hf(nf, nf);
            Eigen::VectorXd gf(nf);
            for (int a = 0; a < nf; ++a) {
                gf[a] = g[free_idx[a]];
                for (int b = 0; b < nf; ++b) Hf(a, b) = H(free_idx[a], free_idx[b]);
            }
            const Eigen::VectorXd pf = Hf.llt().solve(-gf);
            for (int a = 0; a < nf; ++a) p[free_idx[a]] = pf[a];
        }
        if (p.cwiseAbs().maxCoeff() <= step_tol) {
            int worst = -1;
            double worst_value = 1e-12 * scale * std::max(1.0, d.cwiseAbs().maxCoeff());
            for (int i = 0; i < n; ++i) {
                double violation = 0.0;
                if (work[i] == upper) violation = g[i];   // multiplier -g must be >= 0
                if (work[i] == lower) violation = -g[i];  // multiplier g must be >= 0
                if (violation > worst_value) {
                    worst_value = violation;
                    worst = i;
                }
            }
            if (worst < 0) break;
            work[worst] = none;
            continue;
        }
        double alpha = 1.0;
        int blocking = -1;
        Side blocking_side = none;
        for (int i : free_idx) {
            if (p[i] > 0.0) {
                const double a = (hi[i] - d[i]) / p[i];
                if (a < alpha) { alpha = a; blocking = i; blocking_side = upper; }
            } else if (p[i] < 0.0) {
                const double a = (lo[i] - d[i]) / p[i];
                if (a < alpha) { alpha = a; blocking = i; blocking_side = lower; }
            }
        }
        d += std::max(alpha, 0.0) * p;
        if (blocking >= 0) {
            work[blocking] = blocking_side;
            d[blocking] = blocking_side == upper ? hi[blocking] : lo[blocking];
        }
    }
    return d.cwiseMax(lo).cwiseMin(hi);
}

}  // namespace

ProjectionResult project_to_goal_set(const Trajectory& traj, const ControlMetric& metric,
                                     const KinematicModel& model, const GoalSet& goal,
                                     const ProjectionOptions& options) {
    return project_goal(traj, metric, model, goal, options, false);
}

ProjectionResult limit_aware_goal_projection(const Trajectory& traj, const ControlMetric& metric,
                                             const KinematicModel& model, const GoalSet& goal,
                                             const ProjectionOptions& options) {
    return project_goal(traj, metric, model, goal, options, true);
}

Trajectory project_to_joint_limits(const Trajectory& traj, const ControlMetric& metric,
                                   const KinematicModel& model) {
    check_shape(traj, metric);
    if (traj.dof() != model.dof()) throw ModelError("trajectory and model DoF differ");
    const int f = metric.free_count();
    const int first = metric.free_begin();
    // Scale-free copy of the metric keeps the active-set tolerances meaningful.
    const double dt2 = metric.dt() * metric.dt();
    const Eigen::MatrixXd H = metric.free_block() * (dt2 * dt2);

    Eigen::MatrixXd w = traj.waypoints();
    for (int j = 0; j < model.dof(); ++j) {
        const double lo = model.joints()[j].lower;
        const double hi = model.joints()[j].upper;
        const auto x = w.col(j).segment(first, f);
        if (x.minCoeff() >= lo && x.maxCoeff() <= hi) continue;
        const Eigen::VectorXd dlo = (Eigen::VectorXd::Constant(f, lo) - x).eval();
        const Eigen::VectorXd dhi = (Eigen::VectorXd::Constant(f, hi) - x).eval();
        const Eigen::VectorXd d = box_qp(H, dlo, dhi);
        Eigen::VectorXd corrected = (x + d).cwiseMax(lo).cwiseMin(hi);
        w.col(j).segment(first, f) = corrected;
    }
    return Trajectory(std::move(w), traj.dt(), traj.buffer());
}

bool trajectory_within_limits(const Trajectory& traj, const KinematicModel& model, double tol) {
    for (int i = 0; i < traj.size(); ++i)
        if (!within_limits(model, traj.waypoint(i), tol)) return false;
    return true;
}

}  // namespace reachpred
