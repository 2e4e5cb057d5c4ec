#pragma once

#include "reachpred/features.hpp"
#include "reachpred/sampling.hpp"
#include "reachpred/weights.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace reachpred {

struct IocConfig {
    int samples = 50;  // per segment
    double sigma = ControlMetric::kDefaultSigma;
    double l1_strength = 0.01;
    double advance = 0.1;  // seconds between segment starts
    int min_length = 20;
    double tolerance = 1e-7;  // on the projected-gradient step
    int max_iterations = 5000;
    std::uint64_t seed = 1;
    int threads = 0;  // 0 = all hardware threads
    bool reject_collisions = true;
    double goal_epsilon = 1e-3;
    FeatureSetConfig features;
    ProjectionOptions projection;
};

struct DemoInput {
    Trajectory trajectory;
    double time_origin = 0.0;  // passive-agent time at the first waypoint
};

struct IocRecord {
    int demo = 0;
    int segment_start = 0;
    BoundaryState boundary;
    PassiveTiming timing;
    Eigen::VectorXd demo_features;    // raw
    Eigen::MatrixXd sample_features;  // raw, one accepted sample per row
    int rejected = 0;
};

struct IocDataset {
    std::vector<std::string> labels;
    std::vector<IocRecord> records;
    std::vector<std::string> dropped;  // one line per dropped segment
    FeatureRanges ranges;

    // Normalized copies of the record features under `ranges`.
    std::vector<Eigen::VectorXd> demo_normalized;
    std::vector<Eigen::MatrixXd> samples_normalized;

    int feature_count() const { return static_cast<int>(labels.size()); }

    // Recomputes ranges from all sample features and refreshes the normalized copies.
    void normalize();
    // Records whose demo index passes `keep`, renormalized on their own samples.
    IocDataset subset(const std::function<bool(const IocRecord&)>& keep) const;
};

IocDataset build_dataset(const std::vector<DemoInput>& demos, const KinematicModel& model,
                         const Scene& scene, const IocConfig& cfg);

// Negative log-likelihood with the demonstration inside the partition estimate.
double piirl_loss(const Eigen::VectorXd& w, const IocDataset& dataset,
                  Eigen::VectorXd* gradient = nullptr);

struct LearnResult {
    WeightVector weights;
    bool converged = false;
    int iterations = 0;
    double objective = 0.0;
};

// min loss(w) + l1 * |w|_1 subject to w >= 0, by projected proximal gradient.
LearnResult learn_weights(const IocDataset& dataset, const IocConfig& cfg);

std::vector<double> default_regularizer_grid();

struct CrossValidation {
    double best = 0.0;
    std::vector<double> grid;
    std::vector<double> scores;  // mean held-out loss per record
};

CrossValidation cross_validate_regularizer(const IocDataset& dataset, const std::vector<double>& grid,
                                           int folds, const IocConfig& cfg);

}  // namespace reachpred
