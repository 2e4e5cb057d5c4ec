#pragma once

#include "reachpred/kinematics.hpp"
#include "reachpred/trajectory.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace reachpred {

enum class MetricKind { joint_centers, task_space };

struct DistanceMetric {
    MetricKind kind = MetricKind::task_space;
    std::vector<std::string> joints = {"pelvis", "torso", "shoulder", "elbow", "wrist"};
    double quaternion_weight = 0.1;
    std::string frame = "hand";  // task_space
};

// |p1 - p2| + weight * acos(|<v1, v2>|)
double pose_distance(const Pose& a, const Pose& b, double quaternion_weight = 0.1);

double config_distance(const Configuration& q1, const Configuration& q2, const KinematicModel& model,
                       const DistanceMetric& metric);

struct DtwResult {
    double cost = 0.0;
    int path_length = 0;
};

// Classic DTW, steps (1,0), (0,1), (1,1), both endpoints matched.
template <class T, class Dist>
DtwResult dtw(const std::vector<T>& a, const std::vector<T>& b, Dist&& dist) {
    if (a.empty() || b.empty()) throw std::invalid_argument("dtw needs non-empty sequences");
    const std::size_t n = a.size(), m = b.size();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> cost((n + 1) * (m + 1), inf);
    std::vector<int> len((n + 1) * (m + 1), 0);
    auto at = [&](std::size_t i, std::size_t j) { return i * (m + 1) + j; };
    cost[at(0, 0)] = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            std::size_t prev = at(i - 1, j - 1);
            if (cost[at(i - 1, j)] < cost[prev]) prev = at(i - 1, j);
            if (cost[at(i, j - 1)] < cost[prev]) prev = at(i, j - 1);
            cost[at(i, j)] = cost[prev] + dist(a[i - 1], b[j - 1]);
            len[at(i, j)] = len[prev] + 1;
        }
    }
    return {cost[at(n, m)], len[at(n, m)]};
}

DtwResult dtw(const Trajectory& a, const Trajectory& b, const KinematicModel& model,
              const DistanceMetric& metric);

struct SpeedProfile {
    std::vector<double> samples;
    double dt = 0.01;
};

// Speed of the hand frame, or the summed speeds of the joint centers.
SpeedProfile speed_profile(const Trajectory& traj, const KinematicModel& model, const DistanceMetric& metric);

// Negative arc length of the max-normalized magnitude spectrum up to cutoff_hz, with the
// profile zero padded to max(padding, length) points.
double spectral_arc_length(const SpeedProfile& profile, double cutoff_hz = 20.0, int padding = 1000);

struct ScoreRecord {
    std::string pair_id;
    double dtw_task = 0.0;
    double dtw_joints = 0.0;
    double sal_pred = 0.0;
    double sal_obs = 0.0;
    double sal_diff_pct = 0.0;  // positive = prediction smoother
    int path_task = 0;
    int path_joints = 0;
};

ScoreRecord score_report(const Trajectory& pred, const Trajectory& observed, const KinematicModel& model,
                         const std::string& pair_id = "");

struct ColumnStats {
    double mean = 0.0;
    double stddev = 0.0;  // population
    double min = 0.0;
    double max = 0.0;
};

// Statistics of dtw_task, dtw_joints, sal_pred, sal_obs, sal_diff_pct (in that order).
std::vector<ColumnStats> aggregate(const std::vector<ScoreRecord>& records);

// Per-pair rows followed by mean/std/min/max rows.
std::string report_csv(const std::vector<ScoreRecord>& records);

}  // namespace reachpred
