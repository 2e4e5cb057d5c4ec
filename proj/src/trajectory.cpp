#include "reachpred/trajectory.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace reachpred {

Trajectory::Trajectory(Eigen::MatrixXd waypoints, double dt, Eigen::MatrixXd buffer)
    : waypoints_(std::move(waypoints)), dt_(dt) {
    if (waypoints_.rows() < 2) throw TrajectoryError("trajectory needs at least 2 waypoints");
    if (!(dt_ > 0.0)) throw TrajectoryError("trajectory dt must be positive");
    set_buffer(std::move(buffer));
}

void Trajectory::set_buffer(Eigen::MatrixXd buffer) {
    if (buffer.rows() > 0 && buffer.cols() != waypoints_.cols())
        throw TrajectoryError("buffer dimension does not match waypoints");
    buffer_ = std::move(buffer);
}

Eigen::MatrixXd Trajectory::padded(int history) const {
    Eigen::MatrixXd out(history + size(), dof());
    const int available = static_cast<int>(buffer_.rows());
    for (int k = 0; k < history; ++k) {
        // row k corresponds to buffer index available - history + k
        const int b = available - history + k;
        if (b >= 0)
            out.row(k) = buffer_.row(b);
        else
            out.row(k) = available > 0 ? buffer_.row(0) : waypoints_.row(0);
    }
    out.bottomRows(size()) = waypoints_;
    return out;
}

BoundaryState Trajectory::boundary_state() const {
    const Eigen::MatrixXd p = padded(3);
    const Eigen::VectorXd q0 = p.row(3).transpose();
    const Eigen::VectorXd b1 = p.row(2).transpose();
    const Eigen::VectorXd b2 = p.row(1).transpose();
    const Eigen::VectorXd b3 = p.row(0).transpose();
    BoundaryState s;
    s.velocity = (q0 - b1) / dt_;
    const Eigen::VectorXd d0 = q0 - b1, d1 = b1 - b2, d2 = b2 - b3;
    s.acceleration = (d0 - d1) / (dt_ * dt_);
    s.jerk = ((d0 - d1) - (d1 - d2)) / (dt_ * dt_ * dt_);
    return s;
}

Eigen::MatrixXd rest_buffer(const Eigen::VectorXd& q, int rows) {
    Eigen::MatrixXd b(rows, q.size());
    for (int i = 0; i < rows; ++i) b.row(i) = q.transpose();
    return b;
}

Trajectory linear_interpolation(const Eigen::VectorXd& start, const Eigen::VectorXd& goal,
                                int waypoints, double dt) {
    if (start.size() != goal.size()) throw TrajectoryError("interpolation endpoints differ in size");
    Eigen::MatrixXd w(waypoints, start.size());
    for (int i = 0; i < waypoints; ++i) {
        const double u = waypoints == 1 ? 0.0 : double(i) / double(waypoints - 1);
        w.row(i) = (start + u * (goal - start)).transpose();
    }
    w.row(waypoints - 1) = goal.transpose();
    return Trajectory(std::move(w), dt);
}

Trajectory min_acceleration_interpolation(const Eigen::VectorXd& start, const Eigen::MatrixXd& buffer,
                                          const Eigen::VectorXd& goal, int waypoints, double dt) {
    Trajectory t = linear_interpolation(start, goal, waypoints, dt);
    t.set_buffer(buffer);
    const int n = waypoints;
    if (n < 3) return t;
    const Eigen::MatrixXd p = t.padded(1);  // row 0 is the newest buffer row
    // Rows: second differences ending on waypoints 1..n-1. Unknowns: waypoints 1..n-2.
    const int u = n - 2;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n - 1, u);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n - 1, start.size());
    auto term = [&](int row, int i, double c) {
        if (i >= 1 && i <= n - 2)
            A(row, i - 1) += c;
        else
            b.row(row) -= c * p.row(i + 1);
    };
    for (int i = 1; i < n; ++i) {
        term(i - 1, i, 1.0);
        term(i - 1, i - 1, -2.0);
        term(i - 1, i - 2, 1.0);
    }
    const Eigen::MatrixXd x = (A.transpose() * A).ldlt().solve(A.transpose() * b);
    t.waypoints().middleRows(1, u) = x;
    return t;
}

ControlMetric ControlMetric::make(int waypoints, int dof, double dt, MetricVariant variant,
                                  double sigma, Eigen::VectorXd dof_scale) {
    if (waypoints < 5) throw TrajectoryError("control metric needs at least 5 waypoints");
    if (dof < 1) throw TrajectoryError("control metric needs at least one DoF");
    if (!(dt > 0.0)) throw TrajectoryError("control metric dt must be positive");
    ControlMetric c;
    c.n_ = waypoints;
    c.m_ = dof;
    c.dt_ = dt;
    c.sigma_ = sigma;
    c.variant_ = variant;

    const int n = waypoints;
    const int rows = variant == MetricVariant::fixed_goal ? n + 2 : n;
    const double inv_dt2 = 1.0 / (dt * dt);
    c.k_ = Eigen::MatrixXd::Zero(rows, n);
    for (int r = 0; r < rows; ++r) {
        const int cols[3] = {r - 2, r - 1, r};
        const double coeff[3] = {1.0, -2.0, 1.0};
        for (int k = 0; k < 3; ++k)
            if (cols[k] >= 0 && cols[k] < n) c.k_(r, cols[k]) = coeff[k] * inv_dt2;
    }
    c.r_ = c.k_.transpose() * c.k_;

    c.free_count_ = variant == MetricVariant::fixed_goal ? n - 2 : n - 1;
    c.r_free_ = c.r_.block(1, 1, c.free_count_, c.free_count_);
    c.llt_free_.compute(c.r_free_);
    if (c.llt_free_.info() != Eigen::Success)
        throw TrajectoryError("control metric is not positive definite");
    c.r_free_inv_ = c.llt_free_.solve(Eigen::MatrixXd::Identity(c.free_count_, c.free_count_));

    if (dof_scale.size() == 0) dof_scale = Eigen::VectorXd::Ones(dof);
    if (dof_scale.size() != dof) throw TrajectoryError("dof_scale has wrong length");
    if ((dof_scale.array() <= 0.0).any()) throw TrajectoryError("dof_scale must be positive");
    c.dof_scale_ = std::move(dof_scale);
    return c;
}

ControlMetric ControlMetric::with_sigma(double sigma) const {
    ControlMetric c = *this;
    c.sigma_ = sigma;
    return c;
}

double smoothness_quadratic(const Eigen::MatrixXd& waypoints, const ControlMetric& metric) {
    if (waypoints.rows() != metric.waypoints() || waypoints.cols() != metric.dof())
        throw TrajectoryError("trajectory shape does not match control metric");
    const Eigen::MatrixXd kx = metric.K() * waypoints;
    return kx.squaredNorm();
}

double smoothness_quadratic(const Trajectory& traj, const ControlMetric& metric) {
    return smoothness_quadratic(traj.waypoints(), metric);
}

double trajectory_distance(const Trajectory& a, const Trajectory& b, const ControlMetric& metric) {
    if (a.size() != b.size() || a.dof() != b.dof())
        throw TrajectoryError("trajectory shapes differ");
    return std::sqrt(smoothness_quadratic(Eigen::MatrixXd(a.waypoints() - b.waypoints()), metric));
}

std::vector<Segment> segment_demonstration(const Trajectory& demo, double advance,
                                           int min_length) {
    if (advance < demo.dt() * (1.0 - 1e-9))
        throw TrajectoryError("segmentation advance must be at least one timestep");
    const int step = std::max(1, static_cast<int>(std::lround(advance / demo.dt())));
    const int history = 3;
    const Eigen::MatrixXd full = demo.padded(history);

    std::vector<Segment> out;
    for (int start = 0; demo.size() - start >= min_length; start += step) {
        Eigen::MatrixXd buffer;
        if (start == 0) {
            buffer = demo.buffer();
        } else {
            // rows of `full` preceding waypoint `start`
            buffer = full.middleRows(history + start - history, history);
        }
        Segment seg{Trajectory(demo.waypoints().bottomRows(demo.size() - start), demo.dt(),
                               std::move(buffer)),
                    {}, start};
        seg.boundary = seg.trajectory.boundary_state();
        out.push_back(std::move(seg));
    }
    return out;
}

Trajectory resample_uniform(const Trajectory& traj, int target_waypoints) {
    if (target_waypoints < 2) throw TrajectoryError("resampling needs at least 2 waypoints");
    if (target_waypoints == traj.size()) return traj;
    const int n = traj.size();
    const double duration = traj.duration();
    const double new_dt = duration / double(target_waypoints - 1);

    // Continuous timeline over buffer and waypoints.
    const int b = static_cast<int>(traj.buffer().rows());
    Eigen::MatrixXd all(b + n, traj.dof());
    if (b > 0) all.topRows(b) = traj.buffer();
    all.bottomRows(n) = traj.waypoints();
    auto at = [&](double t) -> Eigen::RowVectorXd {
        const double s = t / traj.dt() + b;  // fractional row in `all`
        if (s <= 0.0) return all.row(0);
        if (s >= double(b + n - 1)) return all.row(b + n - 1);
        const int i = static_cast<int>(std::floor(s));
        const double u = s - i;
        return (1.0 - u) * all.row(i) + u * all.row(i + 1);
    };

    Eigen::MatrixXd w(target_waypoints, traj.dof());
    for (int i = 0; i < target_waypoints; ++i) w.row(i) = at(i * new_dt);
    w.row(0) = traj.waypoints().row(0);
    w.row(target_waypoints - 1) = traj.waypoints().row(n - 1);

    Eigen::MatrixXd buffer;
    if (b > 0) {
        buffer.resize(b, traj.dof());
        for (int k = 0; k < b; ++k) buffer.row(k) = at(-(b - k) * new_dt);
    }
    return Trajectory(std::move(w), new_dt, std::move(buffer));
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string trajectory_to_csv(const Trajectory& traj) {
    std::string out = "t";
    for (int j = 0; j < traj.dof(); ++j) out += ",q" + std::to_string(j);
    out += '\n';
    auto row = [&](double t, const Eigen::RowVectorXd& q) {
        out += format_double(t);
        for (int j = 0; j < q.size(); ++j) {
            out += ',';
            out += format_double(q[j]);
        }
        out += '\n';
    };
    const int b = static_cast<int>(traj.buffer().rows());
    for (int k = 0; k < b; ++k) row(-(b - k) * traj.dt(), traj.buffer().row(k));
    for (int i = 0; i < traj.size(); ++i) row(i * traj.dt(), traj.waypoints().row(i));
    return out;
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw IoError("cannot write " + tmp);
        f << trajectory_to_csv(traj);
        if (!f) throw IoError("failed writing " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw IoError("cannot rename " + tmp + " to " + path);
}

Trajectory trajectory_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw TrajectoryError("empty trajectory file");
    int columns = 1;
    for (char c : line) columns += c == ',';
    if (line.rfind("t,", 0) != 0 || columns < 2)
        throw TrajectoryError("trajectory header must be t,q0,...");
    const int m = columns - 1;
    std::vector<double> times;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> values;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        while (p < end) {
            double v = 0.0;
            auto res = std::from_chars(p, end, v);
            if (res.ec != std::errc()) throw TrajectoryError("bad number in trajectory row: " + line);
            values.push_back(v);
            p = res.ptr;
            if (p < end) {
                if (*p != ',') throw TrajectoryError("bad separator in trajectory row: " + line);
                ++p;
            }
        }
        if (static_cast<int>(values.size()) != columns)
            throw TrajectoryError("trajectory row has wrong column count: " + line);
        times.push_back(values[0]);
        rows.emplace_back(values.begin() + 1, values.end());
    }
    int b = 0;
    while (b < static_cast<int>(times.size()) && times[b] < 0.0) ++b;
    const int n = static_cast<int>(times.size()) - b;
    if (n < 2) throw TrajectoryError("trajectory file needs at least 2 waypoints");
    const double dt = times[b + 1] - times[b];
    Eigen::MatrixXd w(n, m), buffer(b, m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) w(i, j) = rows[b + i][j];
    for (int i = 0; i < b; ++i)
        for (int j = 0; j < m; ++j) buffer(i, j) = rows[i][j];
    return Trajectory(std::move(w), dt, std::move(buffer));
}

Trajectory read_trajectory_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return trajectory_from_csv(ss.str());
}

}  // namespace reachpred
