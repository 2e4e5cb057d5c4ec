#pragma once

#include "reachpred/kinematics.hpp"
#include "reachpred/trajectory.hpp"

#include <memory>
#include <mutex>
#include <optional>
#include <vector>

namespace reachpred {

enum class ObstacleKind { sphere, box };

// Axis-aligned box (half_extents) or sphere (radius) in world coordinates.
struct Obstacle {
    ObstacleKind kind = ObstacleKind::box;
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    Eigen::Vector3d half_extents = Eigen::Vector3d::Zero();
    double radius = 0.0;
};

// Exact signed distance, negative inside.
double signed_distance(const Obstacle& obstacle, const Eigen::Vector3d& p);
double signed_distance(const std::vector<Obstacle>& obstacles, const Eigen::Vector3d& p);

// Sampled signed distance grid with trilinear lookup.
class DistanceField {
  public:
    DistanceField() = default;
    DistanceField(const std::vector<Obstacle>& obstacles, double resolution, double margin);

    bool empty() const { return values_.empty(); }
    double resolution() const { return resolution_; }
    const Eigen::Vector3d& origin() const { return origin_; }
    const Eigen::Vector3i& dims() const { return dims_; }
    bool contains(const Eigen::Vector3d& p) const;

    // Points outside the grid are free space: returns +inf and sets *outside.
    double query(const Eigen::Vector3d& p, bool* outside = nullptr) const;

  private:
    double at(int x, int y, int z) const {
        return values_[(static_cast<std::size_t>(z) * dims_.y() + y) * dims_.x() + x];
    }

    Eigen::Vector3d origin_ = Eigen::Vector3d::Zero();
    Eigen::Vector3i dims_ = Eigen::Vector3i::Zero();
    double resolution_ = 0.0;
    std::vector<float> values_;
};

// Co-present agent replaying a recorded trajectory.
struct PassiveAgent {
    KinematicModel model;
    Trajectory trajectory;

    // Configuration at absolute time t (linear interpolation, held at both ends).
    Configuration configuration_at(double t) const;
};

// When the passive agent is sampled: waypoint i of a trajectory maps to time
// time_origin + i*dt, or to time_origin for every waypoint when frozen.
struct PassiveTiming {
    double time_origin = 0.0;
    bool frozen = false;

    double time_of(int waypoint, double dt) const {
        return frozen ? time_origin : time_origin + waypoint * dt;
    }
};

class Scene {
  public:
    std::vector<Obstacle> obstacles;
    std::optional<PassiveAgent> passive;
    Configuration rest_posture;
    double edt_resolution = 0.02;
    double edt_margin = 0.5;

    // Built on first use from the obstacles present at that moment; thread safe and
    // shared between copies. Call invalidate_field() after editing obstacles.
    const DistanceField& distance_field() const;
    void invalidate_field();

  private:
    struct FieldCache {
        std::once_flag once;
        DistanceField field;
    };
    std::shared_ptr<FieldCache> cache_ = std::make_shared<FieldCache>();
};

}  // namespace reachpred
