#pragma once

#include "reachpred/kinematics.hpp"
#include "reachpred/scene.hpp"
#include "reachpred/trajectory.hpp"

#include <string>
#include <utility>
#include <vector>

namespace reachpred {

// (active frame, passive frame) over {wrist, elbow, shoulder, pelvis}^2.
std::vector<std::pair<std::string, std::string>> default_distance_pairs();

struct FeatureSetConfig {
    bool link_distances = true;
    bool smoothness = true;
    bool posture = true;
    std::vector<std::pair<std::string, std::string>> distance_pairs = default_distance_pairs();
    double kernel_range = 0.8;  // meters, support of the distance kernel
    std::string task_frame = "hand";
};

// Ordered labels: dist_<a>_<p>..., smooth_{config,task}_{length,vel,acc,jerk}, posture_<joint>.
std::vector<std::string> feature_labels(const FeatureSetConfig& config, const KinematicModel& model);

struct FeatureVector {
    Eigen::VectorXd values;
    std::vector<std::string> names;
    bool passive_missing = false;  // distance group zero-filled
};

// max(0, 1 - d / range)^2
double distance_kernel(double d, double range);

FeatureVector link_distance_features(const Trajectory& traj, const KinematicModel& model,
                                     const Scene& scene, const PassiveTiming& timing,
                                     const FeatureSetConfig& config = {});
FeatureVector smoothness_features(const Trajectory& traj, const KinematicModel& model,
                                  const FeatureSetConfig& config = {});
FeatureVector posture_features(const Trajectory& traj, const KinematicModel& model,
                               const Configuration& q_rest);

FeatureVector compute_feature_vector(const Trajectory& traj, const KinematicModel& model,
                                     const Scene& scene, const FeatureSetConfig& config = {},
                                     const PassiveTiming& timing = {});

// Per-waypoint terms (N x F); column sums equal compute_feature_vector. Each squared
// difference is attributed to the waypoint it ends on.
Eigen::MatrixXd feature_contributions(const Trajectory& traj, const KinematicModel& model,
                                      const Scene& scene, const FeatureSetConfig& config,
                                      const PassiveTiming& timing, bool* passive_missing = nullptr);

constexpr double kDefaultClearance = 0.03;

// Penetration cost of the model's collision spheres against the static obstacles,
// per waypoint (N-vector) and summed.
Eigen::VectorXd obstacle_contributions(const Trajectory& traj, const KinematicModel& model,
                                       const Scene& scene, double clearance = kDefaultClearance);
double obstacle_cost(const Trajectory& traj, const KinematicModel& model, const Scene& scene,
                     double clearance = kDefaultClearance);

// Exact contact checks (no grid). A waypoint collides when a collision sphere of the
// active model overlaps a static obstacle or a sphere of the passive agent.
bool waypoint_in_collision(const KinematicModel& model, const Configuration& q, const Scene& scene,
                           const Configuration* passive_q);
std::vector<int> colliding_waypoints(const Trajectory& traj, const KinematicModel& model,
                                     const Scene& scene, const PassiveTiming& timing);

// Per-feature affine map onto [0, 1] from sample min/max.
struct FeatureRanges {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
    std::vector<bool> constant;

    int size() const { return static_cast<int>(lo.size()); }
    Eigen::VectorXd apply(const Eigen::VectorXd& raw) const;
    // 1 / (hi - lo), 0 for constant features: d(normalized)/d(raw).
    Eigen::VectorXd scale() const;

    static FeatureRanges identity(int size);
    static FeatureRanges from_samples(const std::vector<Eigen::VectorXd>& samples);
};

struct NormalizedFeatures {
    std::vector<Eigen::VectorXd> demos;
    std::vector<Eigen::VectorXd> samples;
    FeatureRanges ranges;
};

NormalizedFeatures normalize_features(const std::vector<Eigen::VectorXd>& demos,
                                      const std::vector<Eigen::VectorXd>& samples);

}  // namespace reachpred
