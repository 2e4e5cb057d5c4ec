#include "reachpred/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace reachpred {

double signed_distance(const Obstacle& obstacle, const Eigen::Vector3d& p) {
    if (obstacle.kind == ObstacleKind::sphere) return (p - obstacle.center).norm() - obstacle.radius;
    const Eigen::Vector3d q = (p - obstacle.center).cwiseAbs() - obstacle.half_extents;
    const double outside = q.cwiseMax(0.0).norm();
    const double inside = std::min(q.maxCoeff(), 0.0);
    return outside + inside;
}

double signed_distance(const std::vector<Obstacle>& obstacles, const Eigen::Vector3d& p) {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& o : obstacles) d = std::min(d, signed_distance(o, p));
    return d;
}

DistanceField::DistanceField(const std::vector<Obstacle>& obstacles, double resolution,
                             double margin)
    : resolution_(resolution) {
    if (!(resolution > 0.0)) throw std::invalid_argument("distance field resolution must be positive");
    if (obstacles.empty()) return;
    Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector3d hi = -lo;
    for (const auto& o : obstacles) {
        const Eigen::Vector3d ext = o.kind == ObstacleKind::sphere
                                        ? Eigen::Vector3d::Constant(o.radius)
                                        : o.half_extents;
        lo = lo.cwiseMin(o.center - ext);
        hi = hi.cwiseMax(o.center + ext);
    }
    lo.array() -= margin;
    hi.array() += margin;
    origin_ = lo;
    for (int k = 0; k < 3; ++k)
        dims_[k] = static_cast<int>(std::ceil((hi[k] - lo[k]) / resolution)) + 1;
    const double cells = double(dims_.x()) * dims_.y() * dims_.z();
    if (cells > 5e7) throw std::invalid_argument("distance field grid too large; raise its resolution");
    values_.resize(static_cast<std::size_t>(cells));
    for (int z = 0; z < dims_.z(); ++z)
        for (int y = 0; y < dims_.y(); ++y)
            for (int x = 0; x < dims_.x(); ++x) {
                const Eigen::Vector3d p = origin_ + resolution * Eigen::Vector3d(x, y, z);
                values_[(static_cast<std::size_t>(z) * dims_.y() + y) * dims_.x() + x] =
                    static_cast<float>(signed_distance(obstacles, p));
            }
}

bool DistanceField::contains(const Eigen::Vector3d& p) const {
    if (empty()) return false;
    const Eigen::Vector3d s = (p - origin_) / resolution_;
    for (int k = 0; k < 3; ++k)
        if (!(s[k] >= 0.0 && s[k] <= dims_[k] - 1)) return false;
    return true;
}

double DistanceField::query(const Eigen::Vector3d& p, bool* outside) const {
    if (outside) *outside = false;
    if (!contains(p)) {
        if (outside) *outside = true;
        return std::numeric_limits<double>::infinity();
    }
    const Eigen::Vector3d s = (p - origin_) / resolution_;
    int i[3];
    double u[3];
    for (int k = 0; k < 3; ++k) {
        i[k] = std::min(static_cast<int>(std::floor(s[k])), dims_[k] - 2);
        u[k] = s[k] - i[k];
    }
    double v = 0.0;
    for (int c = 0; c < 8; ++c) {
        const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
        const double w = (dx ? u[0] : 1 - u[0]) * (dy ? u[1] : 1 - u[1]) * (dz ? u[2] : 1 - u[2]);
        v += w * at(i[0] + dx, i[1] + dy, i[2] + dz);
    }
    return v;
}

Configuration PassiveAgent::configuration_at(double t) const {
    const int n = trajectory.size();
    const double s = t / trajectory.dt();
    if (s <= 0.0) return trajectory.front();
    if (s >= n - 1) return trajectory.back();
    const int i = static_cast<int>(std::floor(s));
    const double u = s - i;
    if (u == 0.0) return trajectory.waypoint(i);
    return (1.0 - u) * trajectory.waypoint(i) + u * trajectory.waypoint(i + 1);
}

const DistanceField& Scene::distance_field() const {
    FieldCache& c = *cache_;
    std::call_once(c.once, [&] { c.field = DistanceField(obstacles, edt_resolution, edt_margin); });
    return c.field;
}

void Scene::invalidate_field() { cache_ = std::make_shared<FieldCache>(); }

}  // namespace reachpred
