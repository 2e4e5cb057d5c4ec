#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace reachpred {

class ModelError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class JointKind { prismatic, hinge };

struct CollisionSphere {
    Eigen::Vector3d center = Eigen::Vector3d::Zero();  // in the joint's child frame
    double radius = 0.0;
};

struct JointSpec {
    std::string name;
    JointKind kind = JointKind::hinge;
    Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
    Eigen::Isometry3d origin = Eigen::Isometry3d::Identity();  // relative to the parent joint frame
    double lower = 0.0;
    double upper = 0.0;
    // Relative spread of sampling noise for this DoF.
    double noise_scale = 1.0;
    std::vector<CollisionSphere> spheres;
};

// A named point rigidly attached to the child frame of `joint` (-1 = model base).
struct FrameSpec {
    std::string name;
    int joint = -1;
    Eigen::Vector3d offset = Eigen::Vector3d::Zero();
};

struct Pose {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
};

using Configuration = Eigen::VectorXd;

// Serial chain of prismatic and hinge joints. Immutable once constructed.
class KinematicModel {
  public:
    KinematicModel() = default;
    KinematicModel(std::vector<JointSpec> joints, std::vector<FrameSpec> frames,
                   const Eigen::Isometry3d& base = Eigen::Isometry3d::Identity());

    int dof() const { return static_cast<int>(joints_.size()); }
    const std::vector<JointSpec>& joints() const { return joints_; }
    const std::vector<FrameSpec>& frames() const { return frames_; }
    const Eigen::Isometry3d& base() const { return base_; }

    bool has_frame(std::string_view name) const;
    int frame_index(std::string_view name) const;  // throws ModelError
    const FrameSpec& frame(int index) const { return frames_.at(index); }

    Eigen::VectorXd lower_limits() const;
    Eigen::VectorXd upper_limits() const;
    Eigen::VectorXd noise_scales() const;

    KinematicModel with_base(const Eigen::Isometry3d& base) const;

  private:
    std::vector<JointSpec> joints_;
    std::vector<FrameSpec> frames_;
    Eigen::Isometry3d base_ = Eigen::Isometry3d::Identity();
};

// World transform of every joint's child frame for configuration q.
using ChainTransforms = std::vector<Eigen::Isometry3d>;
ChainTransforms chain_transforms(const KinematicModel& model, const Configuration& q);

Pose frame_pose(const KinematicModel& model, const ChainTransforms& chain, int frame);
Eigen::Vector3d frame_position(const KinematicModel& model, const ChainTransforms& chain,
                               int frame);

Pose forward_kinematics(const KinematicModel& model, const Configuration& q,
                        std::string_view frame);

// Positional Jacobian (3 x M) of the frame origin.
Eigen::Matrix3Xd jacobian(const KinematicModel& model, const Configuration& q,
                          std::string_view frame);
Eigen::Matrix3Xd jacobian(const KinematicModel& model, const ChainTransforms& chain,
                          int frame);

Configuration clamp_to_limits(const KinematicModel& model, const Configuration& q);
bool within_limits(const KinematicModel& model, const Configuration& q, double tol = 1e-12);

struct IkOptions {
    double tolerance = 1e-3;  // meters
    int max_iterations = 500;
    double damping = 1e-6;
    double max_step = 0.2;
    double nullspace_gain = 0.5;
    std::string frame = "hand";
};

struct IkResult {
    Configuration q;
    bool success = false;
    int iterations = 0;
    double error = 0.0;
};

// Damped least squares IK that stays close (in joint space) to q0.
IkResult ik_seed(const KinematicModel& model, const Configuration& q0,
                 const Eigen::Vector3d& target, const IkOptions& options = {});

// Sphere centers in world coordinates with matching radii.
struct WorldSpheres {
    std::vector<Eigen::Vector3d> centers;
    std::vector<double> radii;
};
WorldSpheres collision_spheres(const KinematicModel& model, const ChainTransforms& chain);

// Planar arm in the xy plane, hinge joints about z, frame "hand" at the tip.
KinematicModel make_planar_arm(const std::vector<double>& link_lengths, double limit = 3.0);

}  // namespace reachpred
