#include "common.hpp"

#include <algorithm>

using namespace reachpred;

namespace {

// Records with already-normalized features under identity ranges.
IocDataset raw_dataset(const std::vector<Eigen::VectorXd>& demos, const std::vector<Eigen::MatrixXd>& samples) {
    IocDataset ds;
    const int f = static_cast<int>(demos.front().size());
    for (int k = 0; k < f; ++k) ds.labels.push_back("f" + std::to_string(k));
    ds.ranges = FeatureRanges::identity(f);
    for (std::size_t r = 0; r < demos.size(); ++r) {
        IocRecord rec;
        rec.demo = static_cast<int>(r);
        rec.demo_features = demos[r];
        rec.sample_features = samples[r];
        ds.records.push_back(rec);
        ds.demo_normalized.push_back(demos[r]);
        ds.samples_normalized.push_back(samples[r]);
    }
    return ds;
}

IocDataset random_dataset(int records, int samples, int features, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Eigen::VectorXd> d;
    std::vector<Eigen::MatrixXd> s;
    for (int r = 0; r < records; ++r) {
        d.push_back(Eigen::VectorXd::NullaryExpr(features, [&] { return u(rng); }));
        s.push_back(Eigen::MatrixXd::NullaryExpr(samples, features, [&] { return u(rng); }));
    }
    return raw_dataset(d, s);
}

// Direct evaluation of -sum log softmax without stabilization.
double naive_loss(const Eigen::VectorXd& w, const IocDataset& ds) {
    double total = 0.0;
    for (std::size_t r = 0; r < ds.records.size(); ++r) {
        double z = std::exp(-w.dot(ds.demo_normalized[r]));
        for (int s = 0; s < ds.samples_normalized[r].rows(); ++s)
            z += std::exp(-w.dot(ds.samples_normalized[r].row(s).transpose()));
        total -= std::log(std::exp(-w.dot(ds.demo_normalized[r])) / z);
    }
    return total;
}

std::vector<DemoInput> straight_demos(int count, int waypoints) {
    const KinematicModel& m = test::human();
    std::mt19937_64 rng(31);
    std::vector<DemoInput> out;
    for (int d = 0; d < count; ++d) {
        const Configuration a = test::random_within_limits(m, rng, 0.3);
        const Configuration b = test::random_within_limits(m, rng, 0.3);
        Trajectory t = linear_interpolation(a, b, waypoints, 0.01);
        t.set_buffer(rest_buffer(a));
        out.push_back({t, 0.0});
    }
    return out;
}

}  // namespace

TEST_CASE("identical samples give log(S+1) per record and zero gradient") {
    std::mt19937_64 rng(1);
    std::vector<Eigen::VectorXd> d;
    std::vector<Eigen::MatrixXd> s;
    const int S = 7;
    for (int r = 0; r < 4; ++r) {
        const Eigen::VectorXd phi = test::random_matrix(5, 1, rng);
        d.push_back(phi);
        s.push_back(phi.transpose().replicate(S, 1));
    }
    const IocDataset ds = raw_dataset(d, s);
    for (int trial = 0; trial < 5; ++trial) {
        const Eigen::VectorXd w = test::random_matrix(5, 1, rng).cwiseAbs();
        Eigen::VectorXd g;
        CHECK(piirl_loss(w, ds, &g) == doctest::Approx(4 * std::log(S + 1.0)).epsilon(1e-12));
        CHECK(g.norm() < 1e-12);
    }
}

TEST_CASE("loss matches the unstabilized softmax and is non-negative") {
    std::mt19937_64 rng(2);
    const IocDataset ds = random_dataset(6, 9, 4, rng);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::VectorXd w = 3.0 * test::random_matrix(4, 1, rng);
        const double l = piirl_loss(w, ds);
        CHECK(l >= 0.0);
        CHECK(l == doctest::Approx(naive_loss(w, ds)).epsilon(1e-10));
    }
    // Large weights stay finite.
    CHECK(std::isfinite(piirl_loss(Eigen::VectorXd::Constant(4, 1e4), ds)));
}

TEST_CASE("gradient matches central differences") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const IocDataset ds = random_dataset(1, 1, 6, rng);
        const Eigen::VectorXd w = test::random_matrix(6, 1, rng);
        Eigen::VectorXd g;
        piirl_loss(w, ds, &g);
        Eigen::VectorXd fd(6);
        for (int k = 0; k < 6; ++k) {
            const double h = 1e-5;
            Eigen::VectorXd a = w, b = w;
            a[k] += h;
            b[k] -= h;
            fd[k] = (piirl_loss(a, ds) - piirl_loss(b, ds)) / (2 * h);
        }
        CHECK((g - fd).norm() <= 1e-6 * std::max(1.0, fd.norm()));
    }
}

TEST_CASE("loss is convex along random chords") {
    std::mt19937_64 rng(4);
    const IocDataset ds = random_dataset(5, 12, 5, rng);
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::VectorXd a = 2.0 * test::random_matrix(5, 1, rng);
        const Eigen::VectorXd b = 2.0 * test::random_matrix(5, 1, rng);
        CHECK(piirl_loss(0.5 * (a + b), ds) <= 0.5 * piirl_loss(a, ds) + 0.5 * piirl_loss(b, ds) + 1e-9);
    }
}

TEST_CASE("learning puts the weight on the only separating feature") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.2, 1.0);
    const int F = 5, star = 3;
    std::vector<Eigen::VectorXd> d;
    std::vector<Eigen::MatrixXd> s;
    for (int r = 0; r < 8; ++r) {
        Eigen::VectorXd phi = Eigen::VectorXd::Constant(F, 0.5);
        phi[star] = 0.0;
        Eigen::MatrixXd samples = phi.transpose().replicate(10, 1);
        for (int k = 0; k < 10; ++k) samples(k, star) = u(rng);
        d.push_back(phi);
        s.push_back(samples);
    }
    IocDataset ds = raw_dataset(d, s);
    ds.normalize();
    IocConfig cfg;
    cfg.l1_strength = 0.01;
    const LearnResult r = learn_weights(ds, cfg);
    CHECK(r.converged);
    CHECK(r.weights.values[star] > 1.0);
    for (int k = 0; k < F; ++k)
        if (k != star) CHECK(r.weights.values[k] == 0.0);
    CHECK(r.objective <= piirl_loss(Eigen::VectorXd::Zero(F), ds) + 1e-12);
}

TEST_CASE("strong l1 drives every weight to zero") {
    std::mt19937_64 rng(6);
    const IocDataset ds = random_dataset(4, 6, 5, rng);
    IocConfig cfg;
    cfg.l1_strength = 1e3;
    const LearnResult r = learn_weights(ds, cfg);
    CHECK(r.weights.values.isZero(0.0));
}

TEST_CASE("learned objective never exceeds the zero-weight objective") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const IocDataset ds = random_dataset(5, 8, 6, rng);
        IocConfig cfg;
        cfg.l1_strength = 0.05;
        const LearnResult r = learn_weights(ds, cfg);
        CHECK((r.weights.values.array() >= 0.0).all());
        CHECK(r.objective <= piirl_loss(Eigen::VectorXd::Zero(6), ds) + 1e-12);
        // Projected-gradient optimality against small feasible moves.
        for (int k = 0; k < 6; ++k) {
            Eigen::VectorXd w = r.weights.values;
            w[k] += 1e-4;
            CHECK(r.objective <= piirl_loss(w, ds) + cfg.l1_strength * w.sum() + 1e-9);
        }
    }
}

TEST_CASE("regularizer selection") {
    const auto grid = default_regularizer_grid();
    CHECK(grid.size() == 10);
    CHECK(std::find(grid.begin(), grid.end(), 0.01) != grid.end());
    for (std::size_t k = 1; k < grid.size(); ++k) {
        const double ratio = grid[k] / grid[k - 1];
        CHECK(ratio > 2.9);
        CHECK(ratio < 3.4);
    }
    std::mt19937_64 rng(8);
    const IocDataset ds = random_dataset(12, 6, 4, rng);
    IocConfig cfg;
    CHECK(cross_validate_regularizer(ds, {0.3}, 3, cfg).best == 0.3);
    const CrossValidation a = cross_validate_regularizer(ds, grid, 3, cfg);
    const CrossValidation b = cross_validate_regularizer(ds, grid, 3, cfg);
    CHECK(a.best == b.best);
    CHECK(a.scores == b.scores);
    CHECK(std::find(grid.begin(), grid.end(), a.best) != grid.end());
}

TEST_CASE("dataset construction in an empty scene") {
    const KinematicModel& m = test::human();
    Scene scene;
    scene.rest_posture = Eigen::VectorXd::Zero(m.dof());
    IocConfig cfg;
    cfg.samples = 3;
    cfg.threads = 1;
    const auto demos = straight_demos(7, 60);
    const IocDataset ds = build_dataset(demos, m, scene, cfg);
    // 60 waypoints, advance 10, minimum 20: starts 0..40.
    CHECK(ds.records.size() == 35);
    CHECK(ds.dropped.empty());
    for (const auto& r : ds.records) {
        CHECK(r.rejected == 0);
        CHECK(r.sample_features.rows() == 3);
    }
    CHECK(ds.feature_count() == 47);

    const IocDataset again = build_dataset(demos, m, scene, cfg);
    for (std::size_t r = 0; r < ds.records.size(); ++r) {
        CHECK(again.records[r].demo_features == ds.records[r].demo_features);
        CHECK(again.records[r].sample_features == ds.records[r].sample_features);
    }

    // Leaving a demo out renormalizes on the remaining samples.
    const IocDataset sub = ds.subset([](const IocRecord& r) { return r.demo != 2; });
    CHECK(sub.records.size() == 30);
    for (const auto& r : sub.records) CHECK(r.demo != 2);
}
