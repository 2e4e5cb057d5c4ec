#include "reachpred/eval.hpp"

#include "reachpred/trajectory.hpp"

#include <algorithm>
#include <complex>
#include <sstream>

namespace reachpred {

namespace {

void check_unit(const Eigen::Quaterniond& q) {
    if (std::abs(q.norm() - 1.0) > 1e-9) throw std::invalid_argument("quaternion is not unit length");
}

// Per-waypoint representation: the task-space pose, or the stacked joint centers.
struct Sample {
    Pose pose;
    std::vector<Eigen::Vector3d> centers;
};

std::vector<Sample> describe(const Trajectory& t, const KinematicModel& model, const DistanceMetric& metric) {
    std::vector<int> frames;
    if (metric.kind == MetricKind::joint_centers)
        for (const auto& j : metric.joints) frames.push_back(model.frame_index(j));
    const int task = metric.kind == MetricKind::task_space ? model.frame_index(metric.frame) : -1;
    std::vector<Sample> out(t.size());
    for (int i = 0; i < t.size(); ++i) {
        const ChainTransforms chain = chain_transforms(model, t.waypoint(i));
        if (task >= 0) out[i].pose = frame_pose(model, chain, task);
        for (int f : frames) out[i].centers.push_back(frame_position(model, chain, f));
    }
    return out;
}

double sample_distance(const Sample& a, const Sample& b, const DistanceMetric& metric) {
    if (metric.kind == MetricKind::task_space) return pose_distance(a.pose, b.pose, metric.quaternion_weight);
    double d = 0.0;
    for (std::size_t k = 0; k < a.centers.size(); ++k) d += (a.centers[k] - b.centers[k]).norm();
    return d;
}

}  // namespace

double pose_distance(const Pose& a, const Pose& b, double quaternion_weight) {
    if (!(quaternion_weight > 0.0)) throw std::invalid_argument("quaternion weight must be positive");
    check_unit(a.orientation);
    check_unit(b.orientation);
    // acos(|<a,b>|) through atan2, which stays accurate near identical orientations
    const Eigen::Vector4d u = a.orientation.coeffs(), v = b.orientation.coeffs();
    const double minus = (u - v).norm(), plus = (u + v).norm();
    const double angle = 2.0 * std::atan2(std::min(minus, plus), std::max(minus, plus));
    return (a.position - b.position).norm() + quaternion_weight * angle;
}

double config_distance(const Configuration& q1, const Configuration& q2, const KinematicModel& model,
                       const DistanceMetric& metric) {
    Eigen::MatrixXd w(2, model.dof());
    w.row(0) = q1.transpose();
    w.row(1) = q2.transpose();
    const auto s = describe(Trajectory(w, 1.0), model, metric);
    return sample_distance(s[0], s[1], metric);
}

DtwResult dtw(const Trajectory& a, const Trajectory& b, const KinematicModel& model,
              const DistanceMetric& metric) {
    const auto sa = describe(a, model, metric);
    const auto sb = describe(b, model, metric);
    return dtw(sa, sb, [&](const Sample& x, const Sample& y) { return sample_distance(x, y, metric); });
}

SpeedProfile speed_profile(const Trajectory& traj, const KinematicModel& model, const DistanceMetric& metric) {
    DistanceMetric m = metric;
    if (m.kind == MetricKind::task_space) {
        m.kind = MetricKind::joint_centers;
        m.joints = {metric.frame};
    }
    const auto s = describe(traj, model, m);
    SpeedProfile p;
    p.dt = traj.dt();
    for (std::size_t i = 1; i < s.size(); ++i) p.samples.push_back(sample_distance(s[i], s[i - 1], m) / traj.dt());
    return p;
}

double spectral_arc_length(const SpeedProfile& profile, double cutoff_hz, int padding) {
    const int len = static_cast<int>(profile.samples.size());
    if (len < 4) throw std::invalid_argument("speed profile needs at least 4 samples");
    if (!(profile.dt > 0.0) || !(cutoff_hz > 0.0)) throw std::invalid_argument("invalid spectral parameters");
    if (std::all_of(profile.samples.begin(), profile.samples.end(), [](double v) { return v == 0.0; }))
        throw std::invalid_argument("speed profile is identically zero");
    const int nfft = std::max(padding, len);
    const double df = 1.0 / (nfft * profile.dt);
    const int bins = std::min(nfft / 2, static_cast<int>(std::floor(cutoff_hz / df + 1e-9)));

    std::vector<double> mag(bins + 1);
    for (int k = 0; k <= bins; ++k) {
        std::complex<double> acc = 0.0;
        const double w = -2.0 * M_PI * k / nfft;
        for (int t = 0; t < len; ++t) acc += profile.samples[t] * std::polar(1.0, w * t);
        mag[k] = std::abs(acc);
    }
    const double peak = *std::max_element(mag.begin(), mag.end());
    double arc = 0.0;
    const double dw = df / cutoff_hz;
    for (int k = 1; k <= bins; ++k) {
        const double dv = (mag[k] - mag[k - 1]) / peak;
        arc += std::sqrt(dw * dw + dv * dv);
    }
    return -arc;
}

ScoreRecord score_report(const Trajectory& pred, const Trajectory& observed, const KinematicModel& model,
                         const std::string& pair_id) {
    DistanceMetric task;
    DistanceMetric joints;
    joints.kind = MetricKind::joint_centers;
    ScoreRecord r;
    r.pair_id = pair_id;
    const DtwResult dt = dtw(pred, observed, model, task);
    const DtwResult dj = dtw(pred, observed, model, joints);
    r.dtw_task = dt.cost;
    r.path_task = dt.path_length;
    r.dtw_joints = dj.cost;
    r.path_joints = dj.path_length;
    r.sal_pred = spectral_arc_length(speed_profile(pred, model, task));
    r.sal_obs = spectral_arc_length(speed_profile(observed, model, task));
    r.sal_diff_pct = (r.sal_pred - r.sal_obs) / std::abs(r.sal_obs) * 100.0;
    return r;
}

std::vector<ColumnStats> aggregate(const std::vector<ScoreRecord>& records) {
    if (records.empty()) throw std::invalid_argument("no records to aggregate");
    std::vector<ColumnStats> out;
    const std::vector<double ScoreRecord::*> cols = {&ScoreRecord::dtw_task, &ScoreRecord::dtw_joints,
                                                     &ScoreRecord::sal_pred, &ScoreRecord::sal_obs,
                                                     &ScoreRecord::sal_diff_pct};
    for (auto c : cols) {
        ColumnStats s;
        s.min = s.max = records.front().*c;
        for (const auto& r : records) {
            s.mean += r.*c;
            s.min = std::min(s.min, r.*c);
            s.max = std::max(s.max, r.*c);
        }
        s.mean /= records.size();
        for (const auto& r : records) s.stddev += (r.*c - s.mean) * (r.*c - s.mean);
        s.stddev = std::sqrt(s.stddev / records.size());
        out.push_back(s);
    }
    return out;
}

std::string report_csv(const std::vector<ScoreRecord>& records) {
    std::ostringstream out;
    out << "pair_id,dtw_task,dtw_joints,sal_pred,sal_obs,sal_diff_pct,path_task,path_joints\n";
    for (const auto& r : records)
        out << r.pair_id << ',' << format_double(r.dtw_task) << ',' << format_double(r.dtw_joints) << ','
            << format_double(r.sal_pred) << ',' << format_double(r.sal_obs) << ',' << format_double(r.sal_diff_pct)
            << ',' << r.path_task << ',' << r.path_joints << '\n';
    if (records.empty()) return out.str();
    const auto stats = aggregate(records);
    const char* names[] = {"mean", "std", "min", "max"};
    for (int k = 0; k < 4; ++k) {
        out << names[k];
        for (const auto& s : stats) {
            const double v = k == 0 ? s.mean : k == 1 ? s.stddev : k == 2 ? s.min : s.max;
            out << ',' << format_double(v);
        }
        out << ",,\n";
    }
    return out.str();
}

}  // namespace reachpred
