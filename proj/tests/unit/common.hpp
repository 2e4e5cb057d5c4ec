#pragma once

#include "reachpred/experiment.hpp"
#include "reachpred/io.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>
#include <string>

namespace test {

using namespace reachpred;

inline std::filesystem::path data_dir() { return REACHPRED_DATA_DIR; }

inline const KinematicModel& human() {
    static const KinematicModel m = load_model(data_dir() / "human_23dof.json");
    return m;
}

// Scratch directory under the build tree, emptied on creation.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto p = std::filesystem::path(REACHPRED_TEST_TMP) / name;
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline Configuration random_within_limits(const KinematicModel& m, std::mt19937_64& rng, double shrink = 1.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Configuration q(m.dof());
    for (int j = 0; j < m.dof(); ++j) {
        const double lo = m.joints()[j].lower, hi = m.joints()[j].upper;
        const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo) * shrink;
        q[j] = mid - half + 2.0 * half * u(rng);
    }
    return q;
}

inline Eigen::MatrixXd random_matrix(int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Eigen::MatrixXd x(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) x(i, j) = n(rng);
    return x;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace test
