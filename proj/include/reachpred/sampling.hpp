#pragma once

#include "reachpred/kinematics.hpp"
#include "reachpred/trajectory.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace reachpred {

// Final configuration must put `frame` at `target` (free orientation).
struct GoalSet {
    Eigen::Vector3d target = Eigen::Vector3d::Zero();
    std::string frame = "hand";
    double epsilon = 1e-3;
};

struct SampleBatch {
    std::vector<Trajectory> samples;
    std::uint64_t seed = 0;
    std::vector<bool> accepted;
};

// Draws perturbation matrices (N x M) from N(0, sigma^2 R^-1) on the free waypoints;
// fixed waypoints get exactly zero.
Eigen::MatrixXd sample_perturbation(const ControlMetric& metric, std::uint64_t seed,
                                    std::uint64_t stream);

SampleBatch sample_trajectories(const Trajectory& nominal, const ControlMetric& metric,
                                int count, std::uint64_t seed);

struct ProjectionOptions {
    double eta = 0.01;
    int max_iterations = 500;
    double regularization = 1e-8;  // relative to r_nn * max scale^2
};

struct ProjectionResult {
    Trajectory trajectory;
    bool converged = false;
    int iterations = 0;
    double goal_error = 0.0;
    // Number of iterations in which each joint's Jacobian column was zeroed.
    std::vector<int> blocked_iterations;
};

// Iterated linearized-Lagrangian projection of the final waypoint onto the goal set,
// minimal in the R metric at every step.
ProjectionResult project_to_goal_set(const Trajectory& traj, const ControlMetric& metric,
                                     const KinematicModel& model, const GoalSet& goal,
                                     const ProjectionOptions& options = {});

// Same, but Jacobian columns of joints whose update would leave the joint limits are zeroed.
ProjectionResult limit_aware_goal_projection(const Trajectory& traj, const ControlMetric& metric,
                                             const KinematicModel& model, const GoalSet& goal,
                                             const ProjectionOptions& options = {});

// min ||d||_R subject to the joint limits on every free waypoint (box-constrained QP per DoF).
Trajectory project_to_joint_limits(const Trajectory& traj, const ControlMetric& metric,
                                   const KinematicModel& model);

bool trajectory_within_limits(const Trajectory& traj, const KinematicModel& model,
                              double tol = 1e-9);

double goal_error(const Trajectory& traj, const KinematicModel& model, const GoalSet& goal);

}  // namespace reachpred
