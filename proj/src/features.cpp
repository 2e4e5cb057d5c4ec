#include "reachpred/features.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <limits>

namespace reachpred {

namespace {

const char* const kLinkFrames[] = {"wrist", "elbow", "shoulder", "pelvis"};
const char* const kSmoothNames[] = {"length", "vel", "acc", "jerk"};

std::atomic<bool> warned_outside_grid{false};

int distance_count(const FeatureSetConfig& c) {
    return c.link_distances ? static_cast<int>(c.distance_pairs.size()) : 0;
}
int smooth_count(const FeatureSetConfig& c) { return c.smoothness ? 8 : 0; }
int posture_count(const FeatureSetConfig& c, const KinematicModel& m) { return c.posture ? m.dof() : 0; }

}  // namespace

std::vector<std::pair<std::string, std::string>> default_distance_pairs() {
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const char* a : kLinkFrames)
        for (const char* p : kLinkFrames) pairs.emplace_back(a, p);
    return pairs;
}

std::vector<std::string> feature_labels(const FeatureSetConfig& config, const KinematicModel& model) {
    std::vector<std::string> labels;
    if (config.link_distances)
        for (const auto& [a, p] : config.distance_pairs) labels.push_back("dist_" + a + "_" + p);
    if (config.smoothness)
        for (const char* space : {"config", "task"})
            for (const char* n : kSmoothNames) labels.push_back(std::string("smooth_") + space + "_" + n);
    if (config.posture)
        for (const auto& j : model.joints()) labels.push_back("posture_" + j.name);
    return labels;
}

double distance_kernel(double d, double range) {
    const double u = std::max(0.0, 1.0 - d / range);
    return u * u;
}

Eigen::MatrixXd feature_contributions(const Trajectory& traj, const KinematicModel& model,
                                      const Scene& scene, const FeatureSetConfig& config,
                                      const PassiveTiming& timing, bool* passive_missing) {
    if (traj.dof() != model.dof()) throw ModelError("trajectory and model DoF differ");
    const int n = traj.size();
    const double dt = traj.dt();
    const int nd = distance_count(config);
    const int ns = smooth_count(config);
    const int np = posture_count(config, model);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, nd + ns + np);
    if (passive_missing) *passive_missing = false;

    // Frames needed on the active side.
    std::vector<int> active_frames, passive_frames;
    const bool have_passive = scene.passive.has_value();
    if (nd > 0) {
        for (const auto& [a, p] : config.distance_pairs) {
            active_frames.push_back(model.frame_index(a));
            if (have_passive) passive_frames.push_back(scene.passive->model.frame_index(p));
        }
        if (!have_passive && passive_missing) *passive_missing = true;
    }
    const int task_frame = ns > 0 ? model.frame_index(config.task_frame) : -1;

    const Eigen::MatrixXd P = traj.padded(3);
    std::vector<Eigen::Vector3d> hand(ns > 0 ? n + 3 : 0);
    std::vector<Eigen::Vector3d> passive_pos;
    for (int k = 0; k < n + 3; ++k) {
        const bool waypoint = k >= 3;
        const bool need_distances = waypoint && nd > 0 && have_passive;
        if (ns == 0 && !need_distances) continue;
        const ChainTransforms chain = chain_transforms(model, P.row(k).transpose());
        if (ns > 0) hand[k] = frame_position(model, chain, task_frame);
        if (!need_distances) continue;
        const int i = k - 3;
        if (i == 0 || !timing.frozen) {
            const ChainTransforms pc = chain_transforms(
                scene.passive->model, scene.passive->configuration_at(timing.time_of(i, dt)));
            passive_pos.resize(passive_frames.size());
            for (std::size_t f = 0; f < passive_frames.size(); ++f)
                passive_pos[f] = frame_position(scene.passive->model, pc, passive_frames[f]);
        }
        for (int f = 0; f < nd; ++f) {
            const double d = (frame_position(model, chain, active_frames[f]) - passive_pos[f]).norm();
            out(i, f) = distance_kernel(d, config.kernel_range) * dt;
        }
    }

    if (ns > 0) {
        const double dt2 = dt * dt, dt3 = dt2 * dt;
        for (int i = 0; i < n; ++i) {
            const int k = i + 3;
            const Eigen::VectorXd dq = P.row(k) - P.row(k - 1);
            const Eigen::Vector3d dx = hand[k] - hand[k - 1];
            out(i, nd + 0) = dq.norm();
            out(i, nd + 1) = dq.squaredNorm() / dt2 * dt;
            out(i, nd + 4) = dx.norm();
            out(i, nd + 5) = dx.squaredNorm() / dt2 * dt;
            if (i == 0) continue;
            // second and third differences ending on waypoint i
            const Eigen::VectorXd d1 = P.row(k - 1) - P.row(k - 2), d2 = P.row(k - 2) - P.row(k - 3);
            const Eigen::VectorXd a = dq - d1;
            const Eigen::VectorXd j = a - (d1 - d2);
            const Eigen::Vector3d x1 = hand[k - 1] - hand[k - 2], x2 = hand[k - 2] - hand[k - 3];
            const Eigen::Vector3d ax = dx - x1;
            const Eigen::Vector3d jx = ax - (x1 - x2);
            out(i, nd + 2) = a.squaredNorm() / (dt2 * dt2) * dt;
            out(i, nd + 3) = j.squaredNorm() / (dt3 * dt3) * dt;
            out(i, nd + 6) = ax.squaredNorm() / (dt2 * dt2) * dt;
            out(i, nd + 7) = jx.squaredNorm() / (dt3 * dt3) * dt;
        }
    }

    if (np > 0) {
        if (scene.rest_posture.size() != model.dof())
            throw ModelError("scene rest posture does not match the model DoF");
        for (int i = 0; i < n; ++i)
            out.row(i).segment(nd + ns, np) =
                (traj.waypoints().row(i) - scene.rest_posture.transpose()).array().square() * dt;
    }
    return out;
}

FeatureVector compute_feature_vector(const Trajectory& traj, const KinematicModel& model,
                                     const Scene& scene, const FeatureSetConfig& config,
                                     const PassiveTiming& timing) {
    FeatureVector fv;
    fv.values = feature_contributions(traj, model, scene, config, timing, &fv.passive_missing)
                    .colwise()
                    .sum()
                    .transpose();
    fv.names = feature_labels(config, model);
    return fv;
}

FeatureVector link_distance_features(const Trajectory& traj, const KinematicModel& model,
                                     const Scene& scene, const PassiveTiming& timing,
                                     const FeatureSetConfig& config) {
    FeatureSetConfig c = config;
    c.link_distances = true;
    c.smoothness = false;
    c.posture = false;
    return compute_feature_vector(traj, model, scene, c, timing);
}

FeatureVector smoothness_features(const Trajectory& traj, const KinematicModel& model,
                                  const FeatureSetConfig& config) {
    FeatureSetConfig c = config;
    c.link_distances = false;
    c.smoothness = true;
    c.posture = false;
    return compute_feature_vector(traj, model, Scene{}, c, {});
}

FeatureVector posture_features(const Trajectory& traj, const KinematicModel& model,
                               const Configuration& q_rest) {
    FeatureSetConfig c;
    c.link_distances = false;
    c.smoothness = false;
    c.posture = true;
    Scene s;
    s.rest_posture = q_rest;
    return compute_feature_vector(traj, model, s, c, {});
}

Eigen::VectorXd obstacle_contributions(const Trajectory& traj, const KinematicModel& model,
                                       const Scene& scene, double clearance) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(traj.size());
    if (scene.obstacles.empty()) return out;
    const DistanceField& field = scene.distance_field();
    bool any_outside = false;
    for (int i = 0; i < traj.size(); ++i) {
        const WorldSpheres spheres = collision_spheres(model, chain_transforms(model, traj.waypoint(i)));
        double cost = 0.0;
        for (std::size_t s = 0; s < spheres.centers.size(); ++s) {
            bool outside = false;
            const double sd = field.query(spheres.centers[s], &outside);
            any_outside |= outside;
            if (outside) continue;
            cost += std::max(0.0, clearance - (sd - spheres.radii[s]));
        }
        out[i] = cost * traj.dt();
    }
    if (any_outside && !warned_outside_grid.exchange(true))
        std::cerr << "warning: collision sphere outside the distance field grid, treated as free space\n";
    return out;
}

double obstacle_cost(const Trajectory& traj, const KinematicModel& model, const Scene& scene,
                     double clearance) {
    return obstacle_contributions(traj, model, scene, clearance).sum();
}

bool waypoint_in_collision(const KinematicModel& model, const Configuration& q, const Scene& scene,
                           const Configuration* passive_q) {
    const WorldSpheres mine = collision_spheres(model, chain_transforms(model, q));
    for (std::size_t s = 0; s < mine.centers.size(); ++s)
        if (signed_distance(scene.obstacles, mine.centers[s]) < mine.radii[s]) return true;
    if (passive_q && scene.passive) {
        const WorldSpheres other =
            collision_spheres(scene.passive->model, chain_transforms(scene.passive->model, *passive_q));
        for (std::size_t a = 0; a < mine.centers.size(); ++a)
            for (std::size_t b = 0; b < other.centers.size(); ++b)
                if ((mine.centers[a] - other.centers[b]).norm() < mine.radii[a] + other.radii[b])
                    return true;
    }
    return false;
}

std::vector<int> colliding_waypoints(const Trajectory& traj, const KinematicModel& model,
                                     const Scene& scene, const PassiveTiming& timing) {
    std::vector<int> out;
    for (int i = 0; i < traj.size(); ++i) {
        Configuration pq;
        if (scene.passive) pq = scene.passive->configuration_at(timing.time_of(i, traj.dt()));
        if (waypoint_in_collision(model, traj.waypoint(i), scene, scene.passive ? &pq : nullptr))
            out.push_back(i);
    }
    return out;
}

Eigen::VectorXd FeatureRanges::apply(const Eigen::VectorXd& raw) const {
    if (raw.size() != lo.size()) throw std::invalid_argument("feature vector length does not match ranges");
    Eigen::VectorXd out(raw.size());
    for (int f = 0; f < raw.size(); ++f)
        out[f] = constant[f] ? 0.0 : (raw[f] - lo[f]) / (hi[f] - lo[f]);
    return out;
}

Eigen::VectorXd FeatureRanges::scale() const {
    Eigen::VectorXd s(lo.size());
    for (int f = 0; f < lo.size(); ++f) s[f] = constant[f] ? 0.0 : 1.0 / (hi[f] - lo[f]);
    return s;
}

FeatureRanges FeatureRanges::identity(int size) {
    FeatureRanges r;
    r.lo = Eigen::VectorXd::Zero(size);
    r.hi = Eigen::VectorXd::Ones(size);
    r.constant.assign(size, false);
    return r;
}

FeatureRanges FeatureRanges::from_samples(const std::vector<Eigen::VectorXd>& samples) {
    if (samples.empty()) throw std::invalid_argument("feature normalization needs at least one sample");
    const int f = static_cast<int>(samples.front().size());
    FeatureRanges r;
    r.lo = Eigen::VectorXd::Constant(f, std::numeric_limits<double>::infinity());
    r.hi = -r.lo;
    for (const auto& s : samples) {
        if (s.size() != f) throw std::invalid_argument("feature vectors differ in length");
        r.lo = r.lo.cwiseMin(s);
        r.hi = r.hi.cwiseMax(s);
    }
    r.constant.resize(f);
    for (int k = 0; k < f; ++k)
        r.constant[k] = !(r.hi[k] - r.lo[k] > 1e-12 * std::max(1.0, std::abs(r.hi[k])));
    return r;
}

NormalizedFeatures normalize_features(const std::vector<Eigen::VectorXd>& demos,
                                      const std::vector<Eigen::VectorXd>& samples) {
    NormalizedFeatures out;
    out.ranges = FeatureRanges::from_samples(samples);
    for (const auto& d : demos) out.demos.push_back(out.ranges.apply(d));
    for (const auto& s : samples) out.samples.push_back(out.ranges.apply(s));
    return out;
}

}  // namespace reachpred
