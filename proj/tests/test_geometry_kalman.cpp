#include "kfmot/geometry.hpp"
#include "kfmot/kalman.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace kfmot;

namespace {

// Fraction of `n` random points of a's bounding square that land in both / either box.
double mc_iou_bev(const BBox3D& a, const BBox3D& b, int n, std::mt19937_64& rng) {
    const double r = 0.5 * std::hypot(a.l, a.w) + 0.5 * std::hypot(b.l, b.w) + std::hypot(a.cx - b.cx, a.cy - b.cy);
    std::uniform_real_distribution<double> u(-r, r);
    auto inside = [](const BBox3D& bx, double x, double y) {
        const double dx = x - bx.cx, dy = y - bx.cy;
        const double c = std::cos(bx.yaw), s = std::sin(bx.yaw);
        const double fx = c * dx + s * dy, fy = -s * dx + c * dy;
        return std::abs(fx) <= 0.5 * bx.l && std::abs(fy) <= 0.5 * bx.w;
    };
    long both = 0, either = 0;
    for (int i = 0; i < n; ++i) {
        const double x = a.cx + u(rng), y = a.cy + u(rng);
        const bool ia = inside(a, x, y), ib = inside(b, x, y);
        both += ia && ib;
        either += ia || ib;
    }
    return either ? static_cast<double>(both) / either : 0.0;
}

}  // namespace

TEST(Geometry, CenterOfBoxes) {
    EXPECT_EQ(center(BBox2D{0, 0, 2, 2}), Vec2(1, 1));
    EXPECT_EQ(center(BBox3D{3, -1, 0.5, 4, 2, 1.5, 0}), Vec3(3, -1, 0.5));
    EXPECT_EQ(center(BBox2D{1, 1, 1, 1}), Vec2(1, 1));
}

TEST(Geometry, Iou2dExamples) {
    const BBox2D a{0, 0, 2, 2};
    EXPECT_DOUBLE_EQ(iou_2d(a, a), 1.0);
    EXPECT_DOUBLE_EQ(iou_2d(a, BBox2D{5, 5, 6, 6}), 0.0);
    EXPECT_NEAR(iou_2d(a, BBox2D{1, 1, 3, 3}), 1.0 / 7.0, 1e-15);
}

TEST(Geometry, DegenerateBoxes) {
    const BBox2D p{1, 1, 1, 1};
    EXPECT_DOUBLE_EQ(iou_2d(p, p), 1.0);
    EXPECT_DOUBLE_EQ(iou_2d(p, BBox2D{0, 0, 2, 2}), 0.0);
}

TEST(Geometry, IouBevExamples) {
    const BBox3D a{0, 0, 0, 2, 2, 1, 0};
    EXPECT_NEAR(iou_bev(a, a), 1.0, 1e-12);
    BBox3D rot = a;
    rot.yaw = 0.7;
    EXPECT_NEAR(iou_bev(rot, rot), 1.0, 1e-12);
    EXPECT_NEAR(iou_bev(a, BBox3D{1, 1, 0, 2, 2, 1, 0}), 1.0 / 7.0, 1e-12);
    EXPECT_DOUBLE_EQ(iou_bev(a, BBox3D{10, 10, 0, 2, 2, 1, 0.3}), 0.0);
}

TEST(Geometry, IouBevMatchesAxisAligned2d) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> c(-2, 2), e(0.5, 3);
    for (int i = 0; i < 500; ++i) {
        const BBox3D a{c(rng), c(rng), 0, e(rng), e(rng), 1, 0};
        const BBox3D b{c(rng), c(rng), 0, e(rng), e(rng), 1, 0};
        const BBox2D a2{a.cx - a.l / 2, a.cy - a.w / 2, a.cx + a.l / 2, a.cy + a.w / 2};
        const BBox2D b2{b.cx - b.l / 2, b.cy - b.w / 2, b.cx + b.l / 2, b.cy + b.w / 2};
        EXPECT_NEAR(iou_bev(a, b), iou_2d(a2, b2), 1e-9);
    }
}

TEST(Geometry, IouBevAgreesWithPointSampling) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> c(-1.5, 1.5), e(1, 4), y(-3.1, 3.1);
    for (int i = 0; i < 20; ++i) {
        const BBox3D a{c(rng), c(rng), 0, e(rng), e(rng), 1, y(rng)};
        const BBox3D b{c(rng), c(rng), 0, e(rng), e(rng), 1, y(rng)};
        EXPECT_NEAR(iou_bev(a, b), mc_iou_bev(a, b, 400000, rng), 1e-2);
    }
}

TEST(Geometry, IouSymmetricAndBounded) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> c(-2, 2), e(0.2, 3), y(-3.1, 3.1);
    for (int i = 0; i < 2000; ++i) {
        const BBox3D a{c(rng), c(rng), 0, e(rng), e(rng), 1, y(rng)};
        const BBox3D b{c(rng), c(rng), 0, e(rng), e(rng), 1, y(rng)};
        const double ab = iou_bev(a, b), ba = iou_bev(b, a);
        EXPECT_NEAR(ab, ba, 1e-12);
        EXPECT_GE(ab, 0.0);
        EXPECT_LE(ab, 1.0 + 1e-12);
    }
}

TEST(Geometry, YawWrapKeepsIdentity) {
    const BBox3D a{1, 2, 0, 4, 2, 1, 0.4};
    BBox3D b = a;
    b.yaw = wrap_angle(0.4 + 2 * std::numbers::pi);
    EXPECT_NEAR(iou_bev(a, b), 1.0, 1e-9);
    EXPECT_GT(wrap_angle(-std::numbers::pi), 0.0);
}

TEST(Geometry, TranslatedKeepsExtents) {
    const Box b = BBox2D{8, 2, 12, 6};
    Eigen::VectorXd off(2);
    off << 2, 0;
    const auto t = std::get<BBox2D>(translated(b, off));
    EXPECT_EQ(center(t), Vec2(12, 4));
    EXPECT_DOUBLE_EQ(t.width(), 4);
    EXPECT_DOUBLE_EQ(t.height(), 4);
}

// ---------------------------------------------------------------------------

TEST(Kalman, StructureOfModel) {
    const auto m = KfModel::constant_velocity(3, 0.01, 0.25);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) {
            const double want = (i == j) ? 1.0 : ((i % 2 == 0 && j == i + 1) ? 1.0 : 0.0);
            EXPECT_EQ(m.A(i, j), want);
        }
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 6; ++j) EXPECT_EQ(m.H(i, j), j == 2 * i ? 1.0 : 0.0);
}

TEST(Kalman, PredictExamples) {
    const auto m = KfModel::constant_velocity(2, 0.01, 1.0);
    KfState s{Eigen::VectorXd(4), Eigen::MatrixXd::Identity(4, 4)};
    s.s << 1, 2, 3, -1;
    const auto p = predict(s, m);
    Eigen::VectorXd want(4);
    want << 3, 2, 2, -1;
    EXPECT_EQ(p.s, want);

    KfState z{Eigen::VectorXd::Zero(4), Eigen::MatrixXd::Zero(4, 4)};
    z.s[0] = 5;
    EXPECT_EQ(predict(z, m).s, z.s);
    EXPECT_TRUE(predict(z, m).P.isApprox(0.01 * Eigen::MatrixXd::Identity(4, 4)));
}

TEST(Kalman, GainExamples) {
    auto m = KfModel::constant_velocity(2, 0.0, 1.0);
    KfState p{Eigen::VectorXd::Zero(4), Eigen::MatrixXd::Identity(4, 4)};
    EXPECT_TRUE(gain(p, m).isApprox(0.5 * m.H.transpose()));

    p.P.setZero();
    EXPECT_TRUE(gain(p, m).isZero());

    m.R.setZero();
    p.P.setIdentity();
    EXPECT_TRUE(gain(p, m).isApprox(m.H.transpose()));

    p.P.setZero();
    EXPECT_THROW(gain(p, m), SingularInnovation);
}

TEST(Kalman, ResidualExamples) {
    const auto m2 = KfModel::constant_velocity(2, 0.01, 1.0);
    KfState p{Eigen::VectorXd::Zero(4), Eigen::MatrixXd::Identity(4, 4)};
    EXPECT_TRUE(residual(p, Eigen::Vector2d(3, -1), m2).isApprox(Eigen::Vector2d(3, -1)));
    EXPECT_TRUE(residual(p, Eigen::Vector2d(0, 0), m2).isZero());
    const auto m3 = KfModel::constant_velocity(3, 0.01, 1.0);
    KfState p3{Eigen::VectorXd::Zero(6), Eigen::MatrixXd::Identity(6, 6)};
    EXPECT_EQ(residual(p3, Eigen::Vector3d(1, 2, 3), m3).size(), 3);
}

TEST(Kalman, UpdateExamples) {
    const auto m = KfModel::constant_velocity(2, 0.0, 1.0);
    KfState p{Eigen::VectorXd::Zero(4), Eigen::MatrixXd::Identity(4, 4)};
    const auto u = update(p, Eigen::Vector2d(2, 0), m);
    EXPECT_NEAR(u.position()[0], 1.0, 1e-15);
    EXPECT_NEAR(u.position()[1], 0.0, 1e-15);

    const auto same = update(p, Eigen::Vector2d(0, 0), m);
    EXPECT_EQ(same.s, p.s);
    const Eigen::MatrixXd K = gain(p, m);
    EXPECT_TRUE(same.P.isApprox((Eigen::MatrixXd::Identity(4, 4) - K * m.H) * p.P));

    const Modulation clip = [](const Eigen::VectorXd& d) { return d.cwiseMax(-1.0).cwiseMin(1.0); };
    EXPECT_EQ(update(p, Eigen::Vector2d(5, 0), m, clip).s, update(p, Eigen::Vector2d(1, 0), m).s);
}

TEST(Kalman, HiddenFramesDriftLinearly) {
    const auto m = KfModel::constant_velocity(1, 0.01, 1.0);
    KfState s{Eigen::Vector2d(0, 0.7), Eigen::Matrix2d::Identity()};
    for (int n = 1; n <= 10; ++n) {
        s = predict_only_step(s, m);
        EXPECT_NEAR(s.position()[0], 0.7 * n, 1e-12);
    }
    KfState still{Eigen::Vector2d(4, 0), Eigen::Matrix2d::Identity()};
    EXPECT_EQ(predict_only_step(still, m).s, still.s);
}

TEST(Kalman, InitialState) {
    const auto m = KfModel::defaults(3);
    const auto s = initial_state(Eigen::Vector3d(1, 2, 3), m);
    EXPECT_EQ(s.position(), Eigen::Vector3d(1, 2, 3));
    EXPECT_TRUE(s.velocity().isZero());
    EXPECT_DOUBLE_EQ(s.P(0, 0), 0.25);
    EXPECT_DOUBLE_EQ(s.P(1, 1), 2.5);
}

TEST(Kalman, MonotoneTrustInR) {
    const auto lo = KfModel::constant_velocity(2, 0.01, 0.5);
    const auto hi = KfModel::constant_velocity(2, 0.01, 2.0);
    const KfState p{Eigen::VectorXd::Zero(4), 1.5 * Eigen::MatrixXd::Identity(4, 4)};
    const auto kl = gain(p, lo), kh = gain(p, hi);
    EXPECT_GT(kl(0, 0), kh(0, 0));
    EXPECT_GT(kl(2, 1), kh(2, 1));
}

TEST(Kalman, UpdateIsAffineInObservation) {
    const auto m = KfModel::constant_velocity(2, 0.01, 1e-10);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n;
    const KfState p{Eigen::VectorXd::Zero(4), Eigen::MatrixXd::Identity(4, 4)};
    const Eigen::Vector2d z(n(rng), n(rng));
    EXPECT_TRUE(update(p, z, m).position().isApprox(z, 1e-8));
}

TEST(Kalman, CovarianceStaysSymmetricPsd) {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n;
    const auto m = KfModel::defaults(3);
    KfState s = initial_state(Eigen::Vector3d::Zero(), m);
    for (int i = 0; i < 10000; ++i) {
        s = predict(s, m);
        if (i % 7 != 3) s = update(s, Eigen::Vector3d(n(rng), n(rng), n(rng)), m);
        EXPECT_LE((s.P - s.P.transpose()).cwiseAbs().maxCoeff(), 1e-12);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.P);
        ASSERT_GE(es.eigenvalues().minCoeff(), -1e-9);
    }
}

TEST(Kalman, SteadyStateDecayIsPositive) {
    const double beta = steady_state_decay(KfModel::constant_velocity(1, 0.01, 1.0));
    EXPECT_GT(beta, 0.0);
    EXPECT_LT(beta, 5.0);
}
