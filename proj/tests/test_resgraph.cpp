#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "resokam/resgraph.hpp"

using namespace resokam;

namespace {

ConvexModel isotropic_ball(double R = 1.0, double r = 0.25)
{
    ModelDescription d;
    d.domain = Domain::ball(Vec::Zero(2), R);
    d.r = r;
    return build_model(d);
}

ConvexModel anisotropic_box()
{
    ModelDescription d;
    d.family = "anisotropic";
    d.Q = (Mat(2, 2) << 2.0, 0.5, 0.5, 1.0).finished();
    d.domain = Domain::box(Vec::Constant(2, -0.5), Vec::Constant(2, 0.5));
    d.r = 0.1;
    return build_model(d);
}

ConvexModel quartic_square()
{
    ModelDescription d;
    d.family = "quartic";
    d.quartic = 0.1;
    d.domain = Domain::box(Vec::Constant(2, -1), Vec::Constant(2, 1));
    d.r = 0.1;
    return build_model(d);
}

Vec v1(double a) { return (Vec(1) << a).finished(); }

IntMatrix mat2(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d)
{
    IntMatrix A(2, 2);
    A(0, 0) = a, A(0, 1) = b, A(1, 0) = c, A(1, 1) = d;
    return A;
}

// eta for a quadratic h = 1/2 Q y . y: d_slow = yt . (A Q k), so
// eta = (varpi - yhat (A Q k)_2) / (A Q k)_1 with (A Q k)_1 = Q k . k.
double quadratic_eta(const Mat& Q, const IntMatrix& A, const IVec& k, double varpi, double yhat)
{
    double Qk[2], AQk[2];
    for (int i = 0; i < 2; ++i)
        Qk[i] = Q(i, 0) * static_cast<double>(k[0]) + Q(i, 1) * static_cast<double>(k[1]);
    for (int i = 0; i < 2; ++i)
        AQk[i] = static_cast<double>(A(i, 0)) * Qk[0] + static_cast<double>(A(i, 1)) * Qk[1];
    return (varpi - yhat * AQk[1]) / AQk[0];
}

// Distance in rotated coordinates from p to the ellipse A^-T (disk of radius R),
// by dense sampling of the boundary.
double ellipse_distance(const IntMatrix& A, double R, double p0, double p1)
{
    // p inside iff |A^T p| <= R
    const double y0 = static_cast<double>(A(0, 0)) * p0 + static_cast<double>(A(1, 0)) * p1;
    const double y1 = static_cast<double>(A(0, 1)) * p0 + static_cast<double>(A(1, 1)) * p1;
    if (std::hypot(y0, y1) <= R)
        return 0;
    // A^-T for det 1: [[d, -c], [-b, a]]
    const double a = static_cast<double>(A(0, 0)), b = static_cast<double>(A(0, 1)), c = static_cast<double>(A(1, 0)),
                 d = static_cast<double>(A(1, 1));
    double best = 1e300;
    const int N = 20000;
    for (int i = 0; i < N; ++i) {
        const double t = 2 * std::numbers::pi * i / N;
        const double u = R * std::cos(t), v = R * std::sin(t);
        best = std::min(best, std::hypot(p0 - (d * u - c * v), p1 - (-b * u + a * v)));
    }
    return best;
}

} // namespace

TEST(RotatedModel, DerivativesMatchFiniteDifferences)
{
    const auto m = quartic_square();
    const auto rot = build_rotated(m, ResonanceVector(IVec{1, 2}));
    const Vec yt = (Vec(2) << 0.13, -0.07).finished();
    const double h = 1e-5;
    auto shift = [&](double d) {
        Vec z = yt;
        z[0] += d;
        return z;
    };
    EXPECT_NEAR(rot.h0(yt), m.h(rot.to_actions(yt)), 0);
    EXPECT_NEAR(rot.d_slow(yt), (rot.h0(shift(h)) - rot.h0(shift(-h))) / (2 * h), 1e-8);
    EXPECT_NEAR(rot.d2_slow(yt), (rot.d_slow(shift(h)) - rot.d_slow(shift(-h))) / (2 * h), 1e-7);
    // A^T yt reproduces y
    const Vec y = rot.to_actions(yt);
    const auto& A = rot.frame().A;
    EXPECT_DOUBLE_EQ(y[0], A(0, 0) * yt[0] + A(1, 0) * yt[1]);
    EXPECT_DOUBLE_EQ(y[1], A(0, 1) * yt[0] + A(1, 1) * yt[1]);
}

TEST(SolveEta, IsotropicTwoThreeWithSuppliedFrame)
{
    const auto m = isotropic_ball();
    const ResonanceVector k(IVec{2, 3});
    const RotatedModel rot(m, make_frame(k, mat2(2, 3, 1, 2), frame_constants(m)));
    const double w0 = rot.frame().varpi0_k;
    for (double varpi : {-w0, -0.3 * w0, 0.0, 0.7 * w0, w0})
        for (double yh : {-0.05, 0.0, 0.02, 0.06}) {
            const auto s = solve_eta(rot, varpi, v1(yh));
            const double exact = (varpi - 8 * yh) / 13;
            EXPECT_LE(s.residual, 1e-10);
            EXPECT_NEAR(s.eta, exact, 1e-10 * std::max(1.0, std::abs(exact)));
        }
}

TEST(SolveEta, QuadraticClosedFormForDefaultFrames)
{
    for (const auto& m : {isotropic_ball(0.3), anisotropic_box()}) {
        const Mat Q = m.hessian(Vec::Zero(2));
        for (const auto& k : enumerate_generators(2, 6)) {
            const auto rot = build_rotated(m, k);
            const auto cover = cube_decomposition(rot);
            for (std::size_t c = 0; c < cover.J.size(); c += std::max<std::size_t>(1, cover.J.size() / 7)) {
                const double yh = cover.corner(c)[0] + 0.5 * cover.edge;
                for (double f : {-1.0, 0.0, 0.5}) {
                    const double varpi = f * rot.frame().varpi0_k;
                    const auto s = solve_eta(rot, varpi, v1(yh));
                    const double exact = quadratic_eta(Q, rot.frame().A, k.entries(), varpi, yh);
                    EXPECT_LE(s.residual, 1e-10) << k.str();
                    EXPECT_NEAR(s.eta, exact, 1e-10 * std::max(1.0, std::abs(exact))) << k.str();
                }
            }
        }
    }
}

TEST(SolveEta, Errors)
{
    const auto m = isotropic_ball();
    const auto rot = build_rotated(m, ResonanceVector(IVec{1, 1}));
    const double w0 = rot.frame().varpi0_k;
    EXPECT_THROW(solve_eta(rot, 1.01 * w0, v1(0)), BracketingError);
    EXPECT_THROW(solve_eta(rot, 0, v1(50.0)), BracketingError);
    EXPECT_THROW(solve_eta(rot, 0, Vec::Zero(2)), DomainError);
}

TEST(SolveEta, KnownZeroBracket)
{
    const auto m = quartic_square();
    const auto rot = build_rotated(m, ResonanceVector(IVec{1, 0}));
    const double z = solve_eta(rot, 0, v1(0.1)).eta;
    const auto a = solve_eta(rot, 0.5 * rot.frame().varpi0_k, v1(0.1), z);
    const auto b = solve_eta(rot, 0.5 * rot.frame().varpi0_k, v1(0.1));
    EXPECT_NEAR(a.eta, b.eta, 1e-14);
    EXPECT_NEAR(a.hi - a.lo, 2 * rot.frame().frak_r_tilde, 1e-15);
}

TEST(CubeDecomposition, MatchesEllipseOracleOnIsotropicDisk)
{
    const double R = 0.3;
    const auto m = isotropic_ball(R);
    for (const auto& k : enumerate_generators(2, 4)) {
        const auto rot = build_rotated(m, k);
        const auto cover = cube_decomposition(rot);
        const double rho = 1.25 * rot.frame().r_tilde_k;
        const double e = cover.edge;
        const auto& A = rot.frame().A;
        const Mat I = Mat::Identity(2, 2);
        const auto [lo, hi] = rot.domain_tilde().axis_extent(1, rho);
        for (auto j = static_cast<std::int64_t>(std::floor(lo / e)) - 2; j <= static_cast<std::int64_t>(std::floor(hi / e)) + 2; ++j) {
            bool in = false, borderline = false;
            for (double off : {0.0, 0.5, 1.0 - 0x1.0p-20}) {
                const double yh = e * (static_cast<double>(j) + off);
                const double z = quadratic_eta(I, A, k.entries(), 0, yh);
                const double dist = ellipse_distance(A, R, z, yh);
                in = in || dist <= rho;
                borderline = borderline || std::abs(dist - rho) < 1e-6 * rho;
            }
            if (borderline)
                continue;
            const bool listed = cover.locate(v1(e * (static_cast<double>(j) + 0.5))).has_value();
            EXPECT_EQ(listed, in) << k.str() << " j = " << j;
        }
    }
}

TEST(CubeDecomposition, ThreadIndependentAndSorted)
{
    const auto m = anisotropic_box();
    const auto rot = build_rotated(m, ResonanceVector(IVec{1, -2}));
    const auto a = cube_decomposition(rot, 1), b = cube_decomposition(rot, 4);
    EXPECT_EQ(a.J, b.J);
    EXPECT_TRUE(std::is_sorted(a.J.begin(), a.J.end()));
    ASSERT_FALSE(a.J.empty());
    EXPECT_TRUE(a.locate(a.centroid()).has_value());
}

TEST(Graph, IsotropicIncrementBoundAttained)
{
    const auto m = isotropic_ball(0.3);
    for (const auto& k : enumerate_generators(2, 4)) {
        const auto rot = build_rotated(m, k);
        const auto g = build_graph(rot, 9, 2);
        ASSERT_FALSE(g.yhat.empty());
        EXPECT_LE(g.margins.max_residual, 1e-10);
        EXPECT_LE(g.margins.max_inclusion_ratio, 1.0);
        const double slope = k.norm2() * k.norm2();
        for (std::size_t iy = 0; iy < g.yhat.size(); ++iy)
            for (std::size_t iv = 1; iv < g.varpi.size(); ++iv) {
                const double fd = (g.eta_at(iv, iy) - g.eta_at(iv - 1, iy)) / (g.varpi[iv] - g.varpi[iv - 1]);
                EXPECT_NEAR(fd * slope, 1.0, 1e-8);
            }
    }
}

TEST(Graph, QuarticColumnsIncreaseBelowBound)
{
    const auto m = quartic_square();
    const auto rot = build_rotated(m, ResonanceVector(IVec{1, 1}));
    const auto g = build_graph(rot, 7, 1, 2);
    EXPECT_GT(g.margins.min_increment, 0);
    EXPECT_LE(g.margins.max_increment_ratio, 1 + 1e-6);
    for (std::size_t iy = 0; iy < g.yhat.size(); ++iy)
        for (std::size_t iv = 0; iv < g.varpi.size(); ++iv)
            EXPECT_NEAR(rot.d_slow(g.eta_at(iv, iy), g.yhat[iy]), g.varpi[iv], 1e-10);
}

TEST(Graph, PointsInsideTheNeighbourhood)
{
    const double R = 0.3;
    const auto m = isotropic_ball(R);
    const auto rot = build_rotated(m, ResonanceVector(IVec{1, 2}));
    const auto g = build_graph(rot, 5, 2);
    const double rho = 1.5 * rot.frame().r_tilde_k;
    for (std::size_t iy = 0; iy < g.yhat.size(); ++iy)
        for (std::size_t iv = 0; iv < g.varpi.size(); ++iv)
            EXPECT_LE(ellipse_distance(rot.frame().A, R, g.eta_at(iv, iy), g.yhat[iy][0]), rho * (1 + 1e-6));
}

TEST(Graph, RejectsTinyGrids)
{
    const auto m = isotropic_ball();
    const auto rot = build_rotated(m, ResonanceVector(IVec{0, 1}));
    EXPECT_THROW(build_graph(rot, 1, 2), DomainError);
    EXPECT_THROW(build_graph(rot, 5, 0), DomainError);
}

TEST(Contraction, IsotropicConvergesInOneStep)
{
    const auto m = isotropic_ball();
    const auto rot = build_rotated(m, ResonanceVector(IVec{1, 1}));
    const Vec yh = v1(0.1);
    const Vec y0 = RotatedModel::join(solve_eta(rot, 0, yh).eta, yh);
    const auto c = contraction_certificate(rot, y0);
    EXPECT_EQ(c.second_sup, 0);
    EXPECT_TRUE(c.second_pass());
    EXPECT_TRUE(c.first_pass());
    EXPECT_TRUE(c.converged);
    EXPECT_EQ(c.contraction_factor, 0);
    EXPECT_LE(c.max_iterations, 2);
}

// d_slow(yt_1^0, yhat) = (yhat - yhat0) (A k)_2 for the isotropic model, so the
// first sup is |(A k)_2| r_hat; for (2,3) that exceeds 1/2 |k|^2 r_hat / t_k.
TEST(Contraction, FirstEstimateClosedFormForTwoThree)
{
    const auto m = isotropic_ball();
    const ResonanceVector k(IVec{2, 3});
    const auto rot = build_rotated(m, k);
    const auto& A = rot.frame().A;
    const double Ak2 = static_cast<double>(A(1, 0) * 2 + A(1, 1) * 3);
    const Vec yh = v1(0.0);
    const Vec y0 = RotatedModel::join(solve_eta(rot, 0, yh).eta, yh);
    const auto c = contraction_certificate(rot, y0);
    EXPECT_NEAR(c.first_sup, std::abs(Ak2) * c.r_hat, 1e-15);
    EXPECT_NEAR(c.first_bound, 0.5 * 13 * c.r_hat / rot.frame().t_k, 1e-15);
    EXPECT_EQ(c.first_pass(), std::abs(Ak2) * c.r_hat <= c.first_bound);
}

TEST(Contraction, QuarticPassesWithMargins)
{
    const auto m = quartic_square();
    const auto rot = build_rotated(m, ResonanceVector(IVec{1, 0}));
    const Vec yh = v1(0.3);
    const Vec y0 = RotatedModel::join(solve_eta(rot, 0, yh).eta, yh);
    const auto c = contraction_certificate(rot, y0, 41);
    EXPECT_TRUE(c.first_pass());
    EXPECT_TRUE(c.second_pass());
    EXPECT_GT(c.first_margin(), 0);
    EXPECT_GT(c.second_margin(), 0);
    EXPECT_LE(c.contraction_factor, 0.5);
    EXPECT_TRUE(c.iterates_in_ball);

    // dense-sampling oracle over the same balls
    double sup2 = 0;
    for (int i = 0; i <= 400; ++i)
        for (int j = 0; j <= 400; ++j) {
            const double t = y0[0] - c.r1 + 2 * c.r1 * i / 400;
            const double u = 0.3 - c.r_hat + 2 * c.r_hat * j / 400;
            sup2 = std::max(sup2, std::abs(rot.d2_slow(t, v1(u)) - c.d));
        }
    EXPECT_LE(sup2, c.second_bound);
    EXPECT_LE(c.second_sup, sup2 * (1 + 1e-12));
    EXPECT_GE(c.second_sup, 0.95 * sup2);
}

TEST(Contraction, RejectsPointsOffTheGraph)
{
    const auto m = quartic_square();
    const auto rot = build_rotated(m, ResonanceVector(IVec{1, 0}));
    EXPECT_THROW(contraction_certificate(rot, (Vec(2) << 0.2, 0.0).finished()), DomainError);
}

namespace {

CoveringParams small_alpha_params(const ConvexModel& m)
{
    // alpha = 1e-3 at K = 12
    return covering_params(m, std::pow(1e-3 / std::pow(12.0, 11), 2), 12, 2);
}

} // namespace

TEST(Nonresonance, SpotChecksMatchExhaustiveRecomputation)
{
    const auto m = isotropic_ball();
    const auto p = small_alpha_params(m);
    const auto rot = build_rotated(m, ResonanceVector(IVec{0, 1}));
    ASSERT_LE(p.alpha / p.C, rot.frame().varpi0_k);
    const auto rep = check_nonresonance(rot, p, 3000, 17);
    ASSERT_EQ(rep.points.size(), 3000u);
    EXPECT_DOUBLE_EQ(rep.threshold, 2 * p.alpha * std::pow(12.0, 5));

    const auto ells = oracle::generators(2, 12);
    const auto& A = rot.frame().A;
    for (std::size_t idx = 0; idx < rep.points.size(); idx += 300) {
        const auto& pt = rep.points[idx];
        double y[2] = {0, 0}, w[2] = {0, 0};
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                y[i] += static_cast<double>(A(j, i)) * pt.y[j];
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                w[i] += static_cast<double>(A(i, j)) * y[j];
        double best = 1e300;
        for (const auto& l : ells) {
            if (l == oracle::IV{1, 0})
                continue;
            double acc = 0;
            acc += w[0] * static_cast<double>(l[0]);
            acc += w[1] * static_cast<double>(l[1]);
            best = std::min(best, std::abs(acc));
        }
        EXPECT_EQ(pt.min_value, best) << idx;
        EXPECT_EQ(pt.margin, best - rep.threshold) << idx;
        ASSERT_EQ(pt.argmin.size(), 2u);
        double at = 0;
        at += w[0] * static_cast<double>(pt.argmin[0]);
        at += w[1] * static_cast<double>(pt.argmin[1]);
        EXPECT_EQ(std::abs(at), best) << idx;
    }
    double worst = 1e300;
    for (const auto& pt : rep.points)
        worst = std::min(worst, pt.margin);
    EXPECT_EQ(rep.worst_margin, worst);
}

TEST(Nonresonance, SamplesLieInTheNormalSet)
{
    const auto m = quartic_square();
    const auto rot = build_rotated(m, ResonanceVector(IVec{1, 1}));
    const auto p = small_alpha_params(m);
    const auto rep = check_nonresonance(rot, p, 500, 4);
    const auto cover = cube_decomposition(rot);
    for (const auto& pt : rep.points) {
        const Vec yh = pt.y.tail(1);
        ASSERT_TRUE(cover.locate(yh).has_value());
        EXPECT_GE(pt.y[0], solve_eta(rot, -rep.slab_varpi, yh).eta - 1e-12);
        EXPECT_LE(pt.y[0], solve_eta(rot, rep.slab_varpi, yh).eta + 1e-12);
    }
}

TEST(Nonresonance, DeterministicAcrossThreads)
{
    const auto m = isotropic_ball();
    const auto rot = build_rotated(m, ResonanceVector(IVec{1, 0}));
    const auto p = small_alpha_params(m);
    const auto a = check_nonresonance(rot, p, 2500, 8, 1);
    const auto b = check_nonresonance(rot, p, 2500, 8, 3);
    ASSERT_EQ(a.points.size(), b.points.size());
    for (std::size_t i = 0; i < a.points.size(); ++i)
        EXPECT_EQ(a.points[i].y, b.points[i].y);
    EXPECT_EQ(a.worst_margin, b.worst_margin);
}

TEST(Nonresonance, SlabWiderThanGraphIsAParameterError)
{
    const auto m = isotropic_ball();
    const auto rot = build_rotated(m, ResonanceVector(IVec{0, 1}));
    const auto p = covering_params(m, 1e-6, 12, 2);
    ASSERT_GT(p.alpha / p.C, rot.frame().varpi0_k);
    EXPECT_THROW(check_nonresonance(rot, p, 10, 1), ParameterError);
}

TEST(RotatedModel, TwoThreeClosedForms)
{
    const auto m = isotropic_ball();
    const RotatedModel rot(m, make_frame(ResonanceVector(IVec{2, 3}), mat2(2, 3, 1, 2), frame_constants(m)));
    Rng rng(12);
    for (int i = 0; i < 50; ++i) {
        const Vec yt = (Vec(2) << rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)).finished();
        EXPECT_NEAR(rot.d_slow(yt), 13 * yt[0] + 8 * yt[1], 1e-14);
        EXPECT_DOUBLE_EQ(rot.d2_slow(yt), 13);
    }
    const auto q = quartic_square();
    const auto id = build_rotated(q, ResonanceVector(IVec{1, 0}));
    const Vec y = (Vec(2) << 0.4, -0.2).finished();
    EXPECT_EQ(id.d_slow(y), q.omega(y)[0]);
}

namespace {

// random point within distance rho of the rotated domain, by rejection from its bounding box
Vec near_domain(const RotatedModel& rot, double rho, Rng& rng)
{
    const int n = rot.dim();
    Vec p(n);
    while (true) {
        for (int i = 0; i < n; ++i) {
            const auto [lo, hi] = rot.domain_tilde().axis_extent(i, rho);
            p[i] = rng.uniform(lo, hi);
        }
        if (rot.domain_tilde().distance(p) <= rho)
            return p;
    }
}

} // namespace

// The slow derivative is Lipschitz with constant L|k| in the action
// variables y = A^T yt; in yt the frame enters through |A^T (yt - yt0)|.
TEST(RotatedModelProperties, LipschitzMonotoneAndConvex)
{
    Rng rng(404);
    for (const auto& m : {quartic_square(), anisotropic_box(), isotropic_ball()})
        for (const auto& k : enumerate_generators(2, 4)) {
            const auto rot = build_rotated(m, k);
            const double rho = rot.frame().r_tilde_k;
            const double L = m.constants.L, g = m.constants.gamma, kn = k.norm2();
            for (int i = 0; i < 40; ++i) {
                const Vec a = near_domain(rot, rho, rng), b = near_domain(rot, rho, rng);
                const double dy = (rot.to_actions(a) - rot.to_actions(b)).norm();
                EXPECT_LE(std::abs(rot.d_slow(a) - rot.d_slow(b)), L * kn * dy * (1 + 1e-9) + 1e-14) << k.str();
                EXPECT_GE(rot.d2_slow(a), g * kn * kn * (1 - 1e-12)) << k.str();
                Vec c = a;
                c[0] = b[0];
                const auto [hi, lo] = a[0] > c[0] ? std::pair{a, c} : std::pair{c, a};
                EXPECT_GE(rot.d_slow(hi) - rot.d_slow(lo), g * kn * kn * (hi[0] - lo[0]) * (1 - 1e-9) - 1e-14) << k.str();
            }
        }
}

TEST(RotatedModelProperties, LipschitzInRotatedCoordinatesNeedsTheFrame)
{
    // dSlow = 13 yt_1 + 8 yt_2: moving yt_2 alone changes it by 8 |dyt|, above L|k| |dyt| = sqrt(13) |dyt|
    const auto m = isotropic_ball();
    const RotatedModel rot(m, make_frame(ResonanceVector(IVec{2, 3}), mat2(2, 3, 1, 2), frame_constants(m)));
    const Vec a = Vec::Zero(2), b = (Vec(2) << 0.0, 0.01).finished();
    EXPECT_GT(std::abs(rot.d_slow(b) - rot.d_slow(a)), std::sqrt(13.0) * (b - a).norm());
    EXPECT_LE(std::abs(rot.d_slow(b) - rot.d_slow(a)), std::sqrt(13.0) * (rot.to_actions(b) - rot.to_actions(a)).norm() * (1 + 1e-12));
}

TEST(Graph, EveryScannedRootIsOnTheGraph)
{
    const auto m = quartic_square();
    for (const auto& k : {IVec{1, 1}, IVec{2, -1}}) {
        const auto rot = build_rotated(m, ResonanceVector(k));
        const auto g = build_graph(rot, 5, 1);
        const double slope = rot.slope_floor();
        std::size_t roots = 0;
        for (std::size_t iy = 0; iy < g.yhat.size(); iy += std::max<std::size_t>(1, g.yhat.size() / 25)) {
            const auto line = rot.domain_tilde().line_interval(g.yhat[iy], rot.frame().r_tilde_k);
            if (!line)
                continue;
            for (std::size_t iv = 0; iv < g.varpi.size(); ++iv) {
                auto f = [&](double t) { return rot.d_slow(t, g.yhat[iy]) - g.varpi[iv]; };
                const int N = 4000;
                const double h = (line->second - line->first) / N;
                double prev = f(line->first);
                for (int i = 1; i <= N; ++i) {
                    const double t = line->first + i * h, cur = f(t);
                    if ((prev <= 0) != (cur <= 0)) {
                        double lo = t - h, hi = t;
                        for (int it = 0; it < 200 && hi - lo > 1e-17; ++it) {
                            const double mid = (lo + hi) / 2;
                            (f(mid) <= 0 ? lo : hi) = mid;
                        }
                        EXPECT_NEAR(lo, g.eta_at(iv, iy), g.tolerances[iv * g.yhat.size() + iy] / slope + 1e-15);
                        ++roots;
                    }
                    prev = cur;
                }
            }
        }
        EXPECT_GT(roots, 0u);
    }
}

TEST(CubeDecomposition, EmptyWhenTheResonanceMissesTheDomain)
{
    ModelDescription d;
    d.center = (Vec(2) << 3.0, 0.0).finished();
    d.domain = Domain::ball(Vec::Zero(2), 0.5);
    d.r = 0.1;
    const auto m = build_model(d);
    // omega . (1,0) = y_1 - 3 stays below -2.3 on the neighbourhood
    const auto rot = build_rotated(m, ResonanceVector(IVec{1, 0}));
    const auto cover = cube_decomposition(rot);
    EXPECT_TRUE(cover.J.empty());
    const auto g = build_graph(rot, cover, 5, 1);
    EXPECT_TRUE(g.yhat.empty());
}

TEST(CubeDecomposition, CubesAreDisjoint)
{
    const auto m = anisotropic_box();
    const auto rot = build_rotated(m, ResonanceVector(IVec{2, 1}));
    const auto cover = cube_decomposition(rot);
    for (std::size_t c = 0; c < cover.J.size(); ++c) {
        const Vec mid = cover.corner(c).array() + cover.edge / 2;
        ASSERT_EQ(cover.locate(mid), std::optional<std::size_t>(c));
        if (c) {
            EXPECT_LT(cover.J[c - 1], cover.J[c]);
        }
    }
}
