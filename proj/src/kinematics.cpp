#include "reachpred/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace reachpred {

KinematicModel::KinematicModel(std::vector<JointSpec> joints, std::vector<FrameSpec> frames,
                               const Eigen::Isometry3d& base)
    : joints_(std::move(joints)), frames_(std::move(frames)), base_(base) {
    for (const auto& j : joints_) {
        if (!(j.lower <= j.upper))
            throw ModelError("joint '" + j.name + "' has lower limit above upper limit");
        if (std::abs(j.axis.norm() - 1.0) > 1e-9)
            throw ModelError("joint '" + j.name + "' axis is not unit length");
        if (!(j.noise_scale > 0.0))
            throw ModelError("joint '" + j.name + "' noise scale must be positive");
    }
    for (const auto& f : frames_) {
        if (f.joint < -1 || f.joint >= dof())
            throw ModelError("frame '" + f.name + "' references joint out of range");
    }
}

bool KinematicModel::has_frame(std::string_view name) const {
    return std::any_of(frames_.begin(), frames_.end(),
                       [&](const FrameSpec& f) { return f.name == name; });
}

int KinematicModel::frame_index(std::string_view name) const {
    for (std::size_t i = 0; i < frames_.size(); ++i)
        if (frames_[i].name == name) return static_cast<int>(i);
    throw ModelError("unknown frame '" + std::string(name) + "'");
}

Eigen::VectorXd KinematicModel::lower_limits() const {
    Eigen::VectorXd lo(dof());
    for (int i = 0; i < dof(); ++i) lo[i] = joints_[i].lower;
    return lo;
}

Eigen::VectorXd KinematicModel::upper_limits() const {
    Eigen::VectorXd hi(dof());
    for (int i = 0; i < dof(); ++i) hi[i] = joints_[i].upper;
    return hi;
}

Eigen::VectorXd KinematicModel::noise_scales() const {
    Eigen::VectorXd s(dof());
    for (int i = 0; i < dof(); ++i) s[i] = joints_[i].noise_scale;
    return s;
}

KinematicModel KinematicModel::with_base(const Eigen::Isometry3d& base) const {
    KinematicModel m = *this;
    m.base_ = base;
    return m;
}

namespace {

void check_dimension(const KinematicModel& model, const Configuration& q) {
    if (q.size() != model.dof())
        throw ModelError("configuration has " + std::to_string(q.size()) +
                         " entries, model has " + std::to_string(model.dof()) + " DoF");
}

Eigen::Isometry3d joint_motion(const JointSpec& joint, double value) {
    Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
    if (joint.kind == JointKind::hinge)
        t.linear() = Eigen::AngleAxisd(value, joint.axis).toRotationMatrix();
    else
        t.translation() = value * joint.axis;
    return t;
}

// Transform of the parent side of joint i (before its own motion).
Eigen::Isometry3d joint_parent(const KinematicModel& model, const ChainTransforms& chain,
                               int i) {
    const Eigen::Isometry3d& parent = i == 0 ? model.base() : chain[i - 1];
    return parent * model.joints()[i].origin;
}

}  // namespace

ChainTransforms chain_transforms(const KinematicModel& model, const Configuration& q) {
    check_dimension(model, q);
    ChainTransforms chain(model.dof());
    Eigen::Isometry3d current = model.base();
    for (int i = 0; i < model.dof(); ++i) {
        const auto& joint = model.joints()[i];
        current = current * joint.origin * joint_motion(joint, q[i]);
        chain[i] = current;
    }
    return chain;
}

Pose frame_pose(const KinematicModel& model, const ChainTransforms& chain, int frame) {
    const FrameSpec& f = model.frame(frame);
    const Eigen::Isometry3d& t = f.joint < 0 ? model.base() : chain[f.joint];
    Pose pose;
    pose.position = t * f.offset;
    pose.orientation = Eigen::Quaterniond(t.linear()).normalized();
    return pose;
}

Eigen::Vector3d frame_position(const KinematicModel& model, const ChainTransforms& chain,
                               int frame) {
    const FrameSpec& f = model.frame(frame);
    const Eigen::Isometry3d& t = f.joint < 0 ? model.base() : chain[f.joint];
    return t * f.offset;
}

Pose forward_kinematics(const KinematicModel& model, const Configuration& q,
                        std::string_view frame) {
    const int idx = model.frame_index(frame);
    return frame_pose(model, chain_transforms(model, q), idx);
}

Eigen::Matrix3Xd jacobian(const KinematicModel& model, const ChainTransforms& chain, int frame) {
    const FrameSpec& f = model.frame(frame);
    const Eigen::Vector3d p = frame_position(model, chain, frame);
    Eigen::Matrix3Xd J = Eigen::Matrix3Xd::Zero(3, model.dof());
    for (int i = 0; i <= f.joint; ++i) {
        const Eigen::Isometry3d parent = joint_parent(model, chain, i);
        const Eigen::Vector3d axis = parent.linear() * model.joints()[i].axis;
        if (model.joints()[i].kind == JointKind::hinge)
            J.col(i) = axis.cross(p - parent.translation());
        else
            J.col(i) = axis;
    }
    return J;
}

Eigen::Matrix3Xd jacobian(const KinematicModel& model, const Configuration& q,
                          std::string_view frame) {
    const int idx = model.frame_index(frame);
    return jacobian(model, chain_transforms(model, q), idx);
}

Configuration clamp_to_limits(const KinematicModel& model, const Configuration& q) {
    check_dimension(model, q);
    return q.cwiseMax(model.lower_limits()).cwiseMin(model.upper_limits());
}

bool within_limits(const KinematicModel& model, const Configuration& q, double tol) {
    check_dimension(model, q);
    for (int i = 0; i < model.dof(); ++i) {
        if (q[i] < model.joints()[i].lower - tol || q[i] > model.joints()[i].upper + tol)
            return false;
    }
    return true;
}

IkResult ik_seed(const KinematicModel& model, const Configuration& q0,
                 const Eigen::Vector3d& target, const IkOptions& options) {
    check_dimension(model, q0);
    const int frame = model.frame_index(options.frame);
    const int m = model.dof();
    const Eigen::VectorXd lo = model.lower_limits();
    const Eigen::VectorXd hi = model.upper_limits();

    IkResult best;
    best.q = clamp_to_limits(model, q0);
    best.error = std::numeric_limits<double>::infinity();
    double best_distance = std::numeric_limits<double>::infinity();

    Configuration q = best.q;
    for (int it = 0; it < options.max_iterations; ++it) {
        const ChainTransforms chain = chain_transforms(model, q);
        const Eigen::Vector3d e = target - frame_position(model, chain, frame);
        const double err = e.norm();
        Eigen::Matrix3Xd J = jacobian(model, chain, frame);

        // Joints resting on a limit and being pushed outward are frozen for this step.
        const Eigen::Vector3d pull = e;
        for (int j = 0; j < m; ++j) {
            const double push = J.col(j).dot(pull);
            if ((q[j] >= hi[j] && push > 0.0) || (q[j] <= lo[j] && push < 0.0))
                J.col(j).setZero();
        }

        const Eigen::Matrix3d JJt = J * J.transpose() + options.damping * Eigen::Matrix3d::Identity();
        const Eigen::LDLT<Eigen::Matrix3d> solver(JJt);
        const Eigen::MatrixXd pinv = J.transpose() * solver.solve(Eigen::Matrix3d::Identity());
        const Eigen::VectorXd toward_start = q0 - q;
        const Eigen::VectorXd null_step =
            toward_start - pinv * (J * toward_start);

        if (err < options.tolerance) {
            const double dist = (q - q0).norm();
            if (dist < best_distance) {
                best_distance = dist;
                best.q = q;
                best.error = err;
                best.success = true;
                best.iterations = it;
            }
            if (null_step.norm() < 1e-7) break;
        } else if (!best.success && err < best.error) {
            best.q = q;
            best.error = err;
            best.iterations = it;
        }

        auto advance = [&](double gain) {
            Eigen::VectorXd dq = pinv * e + gain * null_step;
            const double step = dq.norm();
            if (step > options.max_step) dq *= options.max_step / step;
            return Configuration((q + dq).cwiseMax(lo).cwiseMin(hi));
        };
        Configuration next = advance(options.nullspace_gain);
        // Clamping can turn the null-space pull against the task; drop it when it does.
        const double next_err = (target - forward_kinematics(model, next, options.frame).position).norm();
        if (next_err > std::max(err, options.tolerance)) next = advance(0.0);
        q = next;
    }
    return best;
}

WorldSpheres collision_spheres(const KinematicModel& model, const ChainTransforms& chain) {
    WorldSpheres out;
    for (int i = 0; i < model.dof(); ++i) {
        for (const auto& s : model.joints()[i].spheres) {
            out.centers.push_back(chain[i] * s.center);
            out.radii.push_back(s.radius);
        }
    }
    return out;
}

KinematicModel make_planar_arm(const std::vector<double>& link_lengths, double limit) {
    std::vector<JointSpec> joints;
    std::vector<FrameSpec> frames;
    double previous = 0.0;
    for (std::size_t i = 0; i < link_lengths.size(); ++i) {
        JointSpec j;
        j.name = "joint" + std::to_string(i);
        j.kind = JointKind::hinge;
        j.axis = Eigen::Vector3d::UnitZ();
        j.origin.translation() = Eigen::Vector3d(previous, 0.0, 0.0);
        j.lower = -limit;
        j.upper = limit;
        joints.push_back(j);
        frames.push_back({"link" + std::to_string(i), static_cast<int>(i), Eigen::Vector3d::Zero()});
        previous = link_lengths[i];
    }
    frames.push_back({"hand", static_cast<int>(link_lengths.size()) - 1,
                      Eigen::Vector3d(previous, 0.0, 0.0)});
    return KinematicModel(std::move(joints), std::move(frames));
}

}  // namespace reachpred
