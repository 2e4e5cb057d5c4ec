#include "common.hpp"
#include "../oracles.hpp"

#include <Eigen/Eigenvalues>

using namespace reachpred;

TEST_CASE("interior rows of R follow the 1 -4 6 -4 1 band") {
    const ControlMetric c = ControlMetric::make(7, 1, 1.0, MetricVariant::fixed_goal);
    const Eigen::MatrixXd& R = c.R();
    for (int i = 2; i <= 4; ++i) {
        const double expected[5] = {1, -4, 6, -4, 1};
        for (int k = 0; k < 5; ++k) CHECK(R(i, i - 2 + k) == expected[k]);
        for (int col = 0; col < 7; ++col)
            if (std::abs(col - i) > 2) CHECK(R(i, col) == 0.0);
    }
    CHECK((R - R.transpose()).norm() == 0.0);
}

TEST_CASE("goal-set variant frees the final corner") {
    const ControlMetric c = ControlMetric::make(7, 1, 1.0, MetricVariant::goal_set);
    CHECK(c.R()(6, 6) == 1.0);
    CHECK(c.R()(3, 3) == 6.0);
    CHECK(c.free_count() == 6);
    CHECK(ControlMetric::make(7, 1, 1.0, MetricVariant::fixed_goal).free_count() == 5);
}

TEST_CASE("R restricted to the free waypoints is positive definite") {
    for (auto v : {MetricVariant::fixed_goal, MetricVariant::goal_set}) {
        const ControlMetric c = ControlMetric::make(10, 1, 0.01, v);
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.R());
        CHECK(es.eigenvalues().minCoeff() > 0.0);
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ef(c.free_block());
        CHECK(ef.eigenvalues().minCoeff() > 0.0);
    }
}

TEST_CASE("quadratic form equals directly differenced accelerations") {
    std::mt19937_64 rng(1);
    const double dt = 0.01;
    const ControlMetric fixed = ControlMetric::make(100, 23, dt, MetricVariant::fixed_goal);
    const ControlMetric free = ControlMetric::make(100, 23, dt, MetricVariant::goal_set);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::MatrixXd x = test::random_matrix(100, 23, rng);
        CHECK(test::rel_err(smoothness_quadratic(x, fixed), oracle::direct_acceleration(x, dt, 2, 2)) < 1e-9);
        CHECK(test::rel_err(smoothness_quadratic(x, free), oracle::direct_acceleration(x, dt, 2, 0)) < 1e-9);
    }
}

TEST_CASE("constant-velocity ramp keeps only the boundary terms") {
    const double dt = 0.1;
    const int n = 20;
    const ControlMetric c = ControlMetric::make(n, 1, dt, MetricVariant::goal_set);
    Eigen::MatrixXd x(n, 1);
    for (int i = 0; i < n; ++i) x(i, 0) = 0.3 + 0.05 * i;
    const double q0 = x(0, 0), q1 = x(1, 0);
    const double boundary = (q0 * q0 + (q1 - 2 * q0) * (q1 - 2 * q0)) / std::pow(dt, 4);
    CHECK(test::rel_err(smoothness_quadratic(x, c), boundary) < 1e-12);
}

TEST_CASE("quadratic form scales with the square") {
    std::mt19937_64 rng(4);
    const ControlMetric c = ControlMetric::make(30, 3, 0.02, MetricVariant::goal_set);
    const Eigen::MatrixXd x = test::random_matrix(30, 3, rng);
    CHECK(test::rel_err(smoothness_quadratic(Eigen::MatrixXd(2.5 * x), c), 6.25 * smoothness_quadratic(x, c)) < 1e-12);
}

TEST_CASE("trajectory distance is a metric") {
    std::mt19937_64 rng(9);
    const ControlMetric c = ControlMetric::make(25, 4, 0.01, MetricVariant::goal_set);
    for (int trial = 0; trial < 50; ++trial) {
        const Trajectory a(test::random_matrix(25, 4, rng), 0.01);
        const Trajectory b(test::random_matrix(25, 4, rng), 0.01);
        const Trajectory e(test::random_matrix(25, 4, rng), 0.01);
        CHECK(trajectory_distance(a, a, c) == 0.0);
        CHECK(trajectory_distance(a, b, c) == trajectory_distance(b, a, c));
        CHECK(trajectory_distance(a, e, c) <= trajectory_distance(a, b, c) + trajectory_distance(b, e, c) + 1e-9);
    }
}

TEST_CASE("segmentation of a 100-waypoint demo") {
    std::mt19937_64 rng(2);
    const Eigen::MatrixXd w = test::random_matrix(100, 5, rng);
    const Trajectory demo(w, 0.01, rest_buffer(w.row(0).transpose()));
    const auto segs = segment_demonstration(demo, 0.1, 20);
    REQUIRE(segs.size() == 9);
    for (int s = 0; s < 9; ++s) {
        CHECK(segs[s].start_index == 10 * s);
        CHECK(segs[s].trajectory.waypoints() == w.bottomRows(100 - 10 * s));
        if (s > 0) CHECK(segs[s].trajectory.buffer() == w.middleRows(10 * s - 3, 3));
    }
    CHECK(segs[0].boundary.velocity.isZero(0.0));
    CHECK(segs[0].boundary.acceleration.isZero(0.0));
    CHECK(segs[0].boundary.jerk.isZero(0.0));

    // Buffer from a moving start carries its derivatives into segment 0.
    Eigen::MatrixXd buf(3, 5);
    for (int k = 0; k < 3; ++k) buf.row(k) = w.row(0) - (3 - k) * 0.01 * Eigen::RowVectorXd::Ones(5);
    const auto moving = segment_demonstration(Trajectory(w, 0.01, buf), 0.1, 20);
    CHECK((moving[0].boundary.velocity - Eigen::VectorXd::Ones(5)).norm() < 1e-9);
}

TEST_CASE("resample_uniform") {
    std::mt19937_64 rng(6);
    const Trajectory t(test::random_matrix(40, 3, rng), 0.01);
    CHECK(resample_uniform(t, 40).waypoints() == t.waypoints());

    const Eigen::Vector3d a(0.1, -0.2, 0.3), b(1.0, 0.5, -0.7);
    const Trajectory line = linear_interpolation(a, b, 31, 0.02);
    const Trajectory r = resample_uniform(line, 13);
    CHECK(r.size() == 13);
    for (int i = 0; i < 13; ++i) {
        const double u = double(i) / 12.0;
        CHECK((r.waypoint(i) - ((1 - u) * a + u * b)).norm() < 1e-12);
    }
    const Trajectory rt = resample_uniform(t, 17);
    CHECK(rt.front() == t.front());
    CHECK(rt.back() == t.back());
    CHECK(rt.duration() == doctest::Approx(t.duration()).epsilon(1e-12));
}

TEST_CASE("trajectory csv round trip is exact") {
    std::mt19937_64 rng(8);
    const Trajectory t(test::random_matrix(12, 4, rng), 0.01, test::random_matrix(3, 4, rng));
    const Trajectory back = trajectory_from_csv(trajectory_to_csv(t));
    CHECK(back.waypoints() == t.waypoints());
    CHECK(back.buffer() == t.buffer());
    CHECK(back.dt() == t.dt());

    const auto dir = test::scratch_dir("trajectory_csv");
    write_trajectory_csv(t, (dir / "t.csv").string());
    CHECK(read_trajectory_csv((dir / "t.csv").string()).waypoints() == t.waypoints());
    CHECK_THROWS_AS(read_trajectory_csv((dir / "missing.csv").string()), IoError);
    CHECK_THROWS_AS(trajectory_from_csv("t,q0\n0,1\n"), TrajectoryError);
    CHECK_THROWS_AS(trajectory_from_csv("x,q0\n0,1\n0.1,2\n"), TrajectoryError);
    CHECK_THROWS_AS(trajectory_from_csv("t,q0\n0,1\n0.1,abc\n"), TrajectoryError);
}

TEST_CASE("degenerate trajectories are rejected") {
    CHECK_THROWS_AS(Trajectory(Eigen::MatrixXd::Zero(1, 3), 0.01), TrajectoryError);
    CHECK_THROWS_AS(Trajectory(Eigen::MatrixXd::Zero(4, 3), 0.0), TrajectoryError);
    CHECK_THROWS_AS(Trajectory(Eigen::MatrixXd::Zero(4, 3), 0.01, Eigen::MatrixXd::Zero(3, 2)), TrajectoryError);
    CHECK_THROWS_AS(ControlMetric::make(4, 1, 0.01, MetricVariant::goal_set), TrajectoryError);
}
