#pragma once

#include "reachpred/errors.hpp"

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace reachpred {

class TrajectoryError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

// Initial velocity, acceleration and jerk at the first waypoint.
struct BoundaryState {
    Eigen::VectorXd velocity;
    Eigen::VectorXd acceleration;
    Eigen::VectorXd jerk;
};

// N x M waypoint matrix (row i = configuration at time i*dt), plus an optional buffer of
// configurations that preceded the first waypoint (oldest first).
class Trajectory {
  public:
    Trajectory() = default;
    Trajectory(Eigen::MatrixXd waypoints, double dt, Eigen::MatrixXd buffer = {});

    int size() const { return static_cast<int>(waypoints_.rows()); }
    int dof() const { return static_cast<int>(waypoints_.cols()); }
    double dt() const { return dt_; }
    double duration() const { return (size() - 1) * dt_; }

    const Eigen::MatrixXd& waypoints() const { return waypoints_; }
    Eigen::MatrixXd& waypoints() { return waypoints_; }
    const Eigen::MatrixXd& buffer() const { return buffer_; }
    bool has_buffer() const { return buffer_.rows() > 0; }

    Eigen::VectorXd waypoint(int i) const { return waypoints_.row(i).transpose(); }
    Eigen::VectorXd front() const { return waypoint(0); }
    Eigen::VectorXd back() const { return waypoint(size() - 1); }

    // Waypoints preceded by `history` rows taken from the buffer; missing history is
    // filled with the oldest known configuration (the agent was at rest before it).
    Eigen::MatrixXd padded(int history) const;

    BoundaryState boundary_state() const;

    void set_buffer(Eigen::MatrixXd buffer);

  private:
    Eigen::MatrixXd waypoints_;
    Eigen::MatrixXd buffer_;
    double dt_ = 0.01;
};

// Buffer of `rows` copies of q, i.e. the agent at rest in q.
Eigen::MatrixXd rest_buffer(const Eigen::VectorXd& q, int rows = 3);

Trajectory linear_interpolation(const Eigen::VectorXd& start, const Eigen::VectorXd& goal,
                                int waypoints, double dt);

// Endpoints fixed, interior waypoints minimizing the summed squared second differences
// including those that reach into `buffer`. Carries the buffer.
Trajectory min_acceleration_interpolation(const Eigen::VectorXd& start, const Eigen::MatrixXd& buffer,
                                          const Eigen::VectorXd& goal, int waypoints, double dt);

enum class MetricVariant { fixed_goal, goal_set };

// Finite-difference control metric R = K^T K for one DoF, shared by every DoF.
//
// K holds [1 -2 1] / dt^2 rows of second differences of the zero-padded waypoint
// sequence. The fixed-goal variant pads two virtual points on each side; the goal-set
// variant drops the two rows that reach past the final waypoint, so q_N is free.
// Sampling and projections act on the free waypoints only: 1..N-2 (fixed goal) or
// 1..N-1 (goal set). Waypoint 0 is the current configuration and never moves.
class ControlMetric {
  public:
    static constexpr double kDefaultSigma = 0.77;

    static ControlMetric make(int waypoints, int dof, double dt, MetricVariant variant,
                              double sigma = kDefaultSigma,
                              Eigen::VectorXd dof_scale = {});

    int waypoints() const { return n_; }
    int dof() const { return m_; }
    double dt() const { return dt_; }
    double sigma() const { return sigma_; }
    MetricVariant variant() const { return variant_; }

    const Eigen::MatrixXd& K() const { return k_; }
    const Eigen::MatrixXd& R() const { return r_; }

    // Per-DoF multiplier on the sampling standard deviation (the projection metric for
    // DoF j is R / scale_j^2).
    const Eigen::VectorXd& dof_scale() const { return dof_scale_; }

    int free_begin() const { return 1; }
    int free_count() const { return free_count_; }
    bool is_free(int waypoint) const {
        return waypoint >= 1 && waypoint < 1 + free_count_;
    }

    // R restricted to the free waypoints, its Cholesky factor and inverse.
    const Eigen::MatrixXd& free_block() const { return r_free_; }
    const Eigen::LLT<Eigen::MatrixXd>& free_factor() const { return llt_free_; }
    const Eigen::MatrixXd& free_inverse() const { return r_free_inv_; }

    ControlMetric with_sigma(double sigma) const;

  private:
    int n_ = 0;
    int m_ = 0;
    double dt_ = 0.0;
    double sigma_ = kDefaultSigma;
    MetricVariant variant_ = MetricVariant::goal_set;
    int free_count_ = 0;
    Eigen::MatrixXd k_;
    Eigen::MatrixXd r_;
    Eigen::MatrixXd r_free_;
    Eigen::MatrixXd r_free_inv_;
    Eigen::LLT<Eigen::MatrixXd> llt_free_;
    Eigen::VectorXd dof_scale_;
};

// xi^T R xi summed over DoF.
double smoothness_quadratic(const Trajectory& traj, const ControlMetric& metric);
double smoothness_quadratic(const Eigen::MatrixXd& waypoints, const ControlMetric& metric);

// ||a - b||_R
double trajectory_distance(const Trajectory& a, const Trajectory& b, const ControlMetric& metric);

struct Segment {
    Trajectory trajectory;
    BoundaryState boundary;
    int start_index = 0;
};

// Suffixes of `demo` starting every `advance` seconds; each keeps the three preceding
// configurations as its buffer. The full demo is segment 0.
std::vector<Segment> segment_demonstration(const Trajectory& demo, double advance,
                                           int min_length = 20);

Trajectory resample_uniform(const Trajectory& traj, int target_waypoints);

// CSV with header t,q0..q{M-1}; buffer rows carry negative t.
void write_trajectory_csv(const Trajectory& traj, const std::string& path);
std::string trajectory_to_csv(const Trajectory& traj);
Trajectory read_trajectory_csv(const std::string& path);
Trajectory trajectory_from_csv(const std::string& text);

// Shortest round-trip decimal representation.
std::string format_double(double v);

}  // namespace reachpred
