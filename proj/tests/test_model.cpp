#include <gtest/gtest.h>

#include "resokam/model.hpp"

using namespace resokam;

namespace {

ModelDescription isotropic_unit_ball()
{
    ModelDescription d;
    d.family = "isotropic";
    d.dim = 2;
    d.domain = Domain::ball(Vec::Zero(2), 1.0);
    d.r = 0.25;
    return d;
}

ModelDescription quartic_square()
{
    ModelDescription d;
    d.family = "quartic";
    d.dim = 2;
    d.quartic = 0.1;
    d.domain = Domain::box(Vec::Constant(2, -1), Vec::Constant(2, 1));
    d.r = 0.1;
    return d;
}

// Hessian eigenvalue extremes of 1/2|y|^2 + c sum y^4 on a dense grid over
// the 2r collar of [-1,1]^2: diag(1 + 12 c y_i^2).
std::pair<double, double> quartic_grid_oracle(double c, double half_width, int grid)
{
    double lo = 1e300, hi = 0;
    for (int i = 0; i <= grid; ++i) {
        const double u = -half_width + 2 * half_width * i / grid;
        const double e = 1 + 12 * c * u * u;
        lo = std::min(lo, e);
        hi = std::max(hi, e);
    }
    return {lo, hi};
}

} // namespace

TEST(BuildModel, IsotropicClosedForms)
{
    const auto m = build_model(isotropic_unit_ball());
    EXPECT_EQ(m.constants.gamma, 1);
    EXPECT_EQ(m.constants.L, 1);
    EXPECT_EQ(m.constants.Lbar, 1);
    EXPECT_DOUBLE_EQ(m.constants.M, 1.5);
    const Vec y = (Vec(2) << 0.3, -0.4).finished();
    EXPECT_DOUBLE_EQ(m.h(y), 0.125);
    EXPECT_EQ(m.omega(y), y);
}

TEST(BuildModel, AnisotropicEigenvalues)
{
    ModelDescription d;
    d.family = "anisotropic";
    d.dim = 2;
    d.Q = Vec((Vec(2) << 1, 2).finished()).asDiagonal();
    d.domain = Domain::box(Vec::Constant(2, -1), Vec::Constant(2, 1));
    d.r = 0.1;
    const auto m = build_model(d);
    EXPECT_DOUBLE_EQ(m.constants.gamma, 1);
    EXPECT_DOUBLE_EQ(m.constants.L, 2);
    EXPECT_DOUBLE_EQ(m.constants.Lbar, 1);
    // sup |Q y| over the corners is |(1, 2)| = sqrt 5, plus 2 r lambda_max
    EXPECT_DOUBLE_EQ(m.constants.M, std::sqrt(5.0) + 0.4);
}

TEST(BuildModel, QuarticAgainstGridOracle)
{
    const auto m = build_model(quartic_square());
    const auto [lo, hi] = quartic_grid_oracle(0.1, 1.2, 2400);
    EXPECT_NEAR(m.constants.gamma, lo, 1e-12);
    EXPECT_NEAR(m.constants.L, hi, 1e-12);
    EXPECT_NEAR(m.constants.L, 2.728, 1e-12);
}

TEST(BuildModel, RejectsInvalidDescriptions)
{
    auto d = isotropic_unit_ball();
    d.r = 0;
    EXPECT_THROW(build_model(d), ParameterError);
    d = isotropic_unit_ball();
    d.s = (Vec(2) << 1, 0).finished();
    EXPECT_THROW(build_model(d), ParameterError);
    d = isotropic_unit_ball();
    d.gamma = -1;
    EXPECT_THROW(build_model(d), ParameterError);
    d = isotropic_unit_ball();
    d.gamma = 2; // true gamma is 1
    EXPECT_THROW(build_model(d), ParameterError);
    ModelDescription a;
    a.family = "anisotropic";
    a.Q = (Mat(2, 2) << 1, 0, 0, -1).finished();
    EXPECT_THROW(build_model(a), ParameterError);
    auto q = quartic_square();
    q.quartic = -0.1;
    EXPECT_THROW(build_model(q), ParameterError);
}

TEST(ValidateConstants, IsotropicHasNoViolations)
{
    const auto m = build_model(isotropic_unit_ball());
    const auto rep = validate_constants(m, 500, 3);
    EXPECT_TRUE(rep.ok());
    EXPECT_DOUBLE_EQ(rep.min_eigenvalue, 1.0);
    EXPECT_NEAR(rep.min_ratio, 1.0, 1e-12);
    EXPECT_NEAR(rep.max_ratio, 1.0, 1e-12);
}

TEST(ValidateConstants, OverstatedGammaIsFlaggedWithWitness)
{
    auto d = isotropic_unit_ball();
    d.gamma = 2;
    const auto m = build_model(d, false);
    const auto rep = validate_constants(m, 100, 1);
    ASSERT_FALSE(rep.ok());
    EXPECT_EQ(rep.violations.front().constant, "gamma");
    ASSERT_EQ(rep.violations.front().witness.size(), 1u);
    EXPECT_LE(m.domain.distance(rep.violations.front().witness[0]), 2 * m.r + 1e-12);
}

TEST(ValidateConstants, QuarticEmpiricalGammaAboveDeclared)
{
    const auto m = build_model(quartic_square());
    const auto rep = validate_constants(m, 4000, 11);
    EXPECT_TRUE(rep.ok());
    EXPECT_GE(rep.min_eigenvalue, m.constants.gamma);
    EXPECT_LE(rep.min_eigenvalue, m.constants.gamma + 0.05);
    EXPECT_LE(rep.max_eigenvalue, m.constants.L);
}

TEST(ValidateConstants, SeedDeterminesReport)
{
    const auto m = build_model(quartic_square());
    const auto a = validate_constants(m, 300, 5), b = validate_constants(m, 300, 5);
    EXPECT_EQ(a.min_eigenvalue, b.min_eigenvalue);
    EXPECT_EQ(a.max_ratio, b.max_ratio);
    EXPECT_THROW(validate_constants(m, 0, 5), DomainError);
}

TEST(CustomModel, NonConvexSampleIsRejected)
{
    auto h = [](const Vec& y) { return 0.5 * y[0] * y[0] - 0.5 * y[1] * y[1]; };
    auto w = [](const Vec& y) -> Vec { return (Vec(2) << y[0], -y[1]).finished(); };
    auto H = [](const Vec&) -> Mat { return (Mat(2, 2) << 1, 0, 0, -1).finished(); };
    EXPECT_THROW(make_custom_model(2, h, w, H, Domain::ball(Vec::Zero(2), 1), 0.1, Vec::Ones(2), {1, 1, 1, 2}),
                 ModelAssumptionError);
}

TEST(CoveringParams, PlanarConstants)
{
    const auto p = covering_params(2, 1.0, 1.0, 1.0, 1e-6, 12, 2);
    EXPECT_EQ(p.nu, 11);
    EXPECT_EQ(p.b, 28);
    EXPECT_EQ(p.c1, 10);
    EXPECT_EQ(p.C, 240);
    EXPECT_DOUBLE_EQ(p.alpha, std::sqrt(1e-6) * std::pow(12.0, 11));
}

TEST(CoveringParams, ThreeDimensionalConstants)
{
    const auto p = covering_params(3, 1.0, 2.0, 0.5, 1e-8, 12, 2);
    EXPECT_DOUBLE_EQ(p.nu, 15.5);
    EXPECT_EQ(p.b, 39);
    EXPECT_EQ(p.c1, 5.0 * 3 * 4);
    EXPECT_DOUBLE_EQ(p.C, 12 * 60 * 3 * 2.0 / 0.5);
}

TEST(CoveringParams, NamesTheViolatedInequality)
{
    auto message = [](double sh, double K, double K0) {
        try {
            covering_params(2, sh, 1, 1, 1e-6, K, K0);
        } catch (const ParameterError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    EXPECT_NE(message(1, 6, 2).find("K >= 6*sHat*K0"), std::string::npos);
    EXPECT_NE(message(0.5, 12, 2).find("6*sHat*K0 >= 6*K0"), std::string::npos);
    EXPECT_NE(message(1, 12, 1).find("6*K0 >= 12"), std::string::npos);
    EXPECT_THROW(covering_params(2, 1, 1, 1, 1.5, 12, 2), ParameterError);
}

TEST(CoveringParams, AlphaMonotoneInEpsAndK)
{
    double prev = 0;
    for (double eps : {1e-12, 1e-10, 1e-8, 1e-6}) {
        const double a = covering_params(2, 1, 1, 1, eps, 12, 2).alpha;
        EXPECT_GT(a, prev);
        prev = a;
    }
    prev = 0;
    for (double K : {12.0, 13.0, 20.0, 40.0}) {
        const double a = covering_params(2, 1, 1, 1, 1e-10, K, 2).alpha;
        EXPECT_GT(a, prev);
        prev = a;
    }
}

TEST(CoveringParams, FromEps)
{
    const auto m = build_model(isotropic_unit_ball());
    const auto p = covering_params_from_eps(m, 1e-6);
    const double lg = std::log(1e-6);
    EXPECT_EQ(p.K, std::ceil(lg * lg));
    EXPECT_DOUBLE_EQ(p.K0, p.K / 6);
    const auto q = covering_params_from_eps(m, 0.5);
    EXPECT_EQ(q.K, 12);
    EXPECT_EQ(q.K0, 2);
}
