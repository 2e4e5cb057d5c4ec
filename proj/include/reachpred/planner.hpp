#pragma once

#include "reachpred/features.hpp"
#include "reachpred/sampling.hpp"
#include "reachpred/weights.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace reachpred {

struct PlannerConfig {
    int iterations = 100;
    int rollouts = 10;
    int reuse = 5;  // best rollouts of the previous iteration kept in the update
    double sigma = ControlMetric::kDefaultSigma;
    double noise_decay = 0.998;  // per iteration, floored at min_noise
    double min_noise = 0.3;      // fraction of sigma
    double temperature = 10.0;  // exponent scale on range-normalized cost-to-go
    double w_obs = 1.0;
    double clearance = kDefaultClearance;
    int waypoints = 100;
    double dt = 0.01;
    double goal_epsilon = 1e-3;
    std::uint64_t seed = 1;
    FeatureSetConfig features;
    ProjectionOptions projection;
    IkOptions ik;
};

struct PlanResult {
    Trajectory trajectory;
    std::vector<double> cost_trace;  // best-so-far cost after each iteration
    double cost = 0.0;
    bool converged = false;
    double goal_error = 0.0;
    int skipped_iterations = 0;
};

// w . normalized(phi) + w_obs * obstacle_cost
double trajectory_cost(const Trajectory& traj, const KinematicModel& model, const Scene& scene,
                       const WeightVector& w, double w_obs, const FeatureSetConfig& features,
                       const PassiveTiming& timing = {}, double clearance = kDefaultClearance);

// Three-row buffer reproducing the given boundary derivatives at q0 by backward differences.
Eigen::MatrixXd buffer_from_boundary(const Configuration& q0, const BoundaryState& boundary, double dt);

// `buffer` holds the configurations preceding q_start (see Trajectory). `initial`, when
// given, replaces the minimum-acceleration seed; its first waypoint must equal q_start.
PlanResult goalset_stomp(const KinematicModel& model, const Scene& scene, const Configuration& q_start,
                         const Eigen::MatrixXd& buffer, const GoalSet& goal, const WeightVector& w,
                         const PlannerConfig& cfg, const PassiveTiming& timing = {},
                         const Trajectory* initial = nullptr);

PlanResult goalset_stomp(const KinematicModel& model, const Scene& scene, const Configuration& q_start,
                         const BoundaryState& boundary, const GoalSet& goal, const WeightVector& w,
                         const PlannerConfig& cfg, const PassiveTiming& timing = {});

struct ReplanResult {
    Trajectory trajectory;  // executed motion, buffer = the buffer planning started from
    int planning_calls = 0;
    bool failed = false;
    std::vector<int> tick_starts;
};

// Plans, executes `tick` seconds, and replans the remaining horizon from the executed state
// with the passive agent frozen at the current time. horizon <= 0 means cfg.waypoints.
ReplanResult replan_loop(const KinematicModel& model, const Scene& scene, const Configuration& q_start,
                         const Eigen::MatrixXd& buffer, const GoalSet& goal, const WeightVector& w,
                         const PlannerConfig& cfg, double tick, double horizon = 0.0,
                         double time_origin = 0.0, int min_length = 20);

enum class BaselineKind { baseline0, baseline1 };

// Unit weights on config-space squared acceleration (baseline0) plus the link distances
// (baseline1). Normalization ranges are taken from `ranges` when given.
WeightVector baseline_weights(BaselineKind kind, const FeatureSetConfig& features,
                              const KinematicModel& model,
                              const std::optional<FeatureRanges>& ranges = std::nullopt);

}  // namespace reachpred
