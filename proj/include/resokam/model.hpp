#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "resokam/domain.hpp"
#include "resokam/errors.hpp"
#include "resokam/rng.hpp"

namespace resokam {

/// Constants of the convexity/bi-Lipschitz hypotheses on Re(B_2r).
struct ModelConstants {
    double gamma = 0; ///< lower bound of the Hessian spectrum
    double L = 0;     ///< Lipschitz constant of omega
    double Lbar = 0;  ///< inverse Lipschitz constant: |omega(y) - omega(y0)| >= |y - y0| / Lbar
    double M = 0;     ///< sup |omega| on B_2r
};

/// The integrable part h(y) with its derivatives, domain and analyticity data.
struct ConvexModel {
    std::string family;
    int dim = 0;
    std::function<double(const Vec&)> h;
    std::function<Vec(const Vec&)> omega;
    std::function<Mat(const Vec&)> hessian;
    Domain domain = Domain::box(Vec::Zero(1), Vec::Ones(1));
    double r = 0;
    Vec s;
    ModelConstants constants;

    double s_min() const { return s.minCoeff(); }
    double s_max() const { return s.maxCoeff(); }
    double s_hat() const { return s_max() / s_min(); }
};

/// Built-in families:
///  - "isotropic":   1/2 |y - c|^2
///  - "anisotropic": 1/2 Q (y - c).(y - c), Q symmetric positive definite
///  - "quartic":     1/2 |y - c|^2 + c4 sum (y_i - c_i)^4, c4 >= 0
/// Declared constants, when present, replace the closed forms.
struct ModelDescription {
    std::string family = "isotropic";
    int dim = 2;
    Mat Q;                        ///< anisotropic only
    double quartic = 0;           ///< c4, quartic only
    std::optional<Vec> center;    ///< defaults to the origin
    Domain domain = Domain::ball(Vec::Zero(2), 1.0);
    double r = 0.25;
    std::optional<Vec> s;         ///< defaults to (1, ..., 1)
    std::optional<double> gamma, L, Lbar, M;
};

struct ConstantViolation {
    std::string constant;
    double declared = 0;
    double empirical = 0;
    std::vector<Vec> witness;
};

struct ValidationReport {
    int samples = 0;
    std::uint64_t seed = 0;
    double min_eigenvalue = 0;
    double max_eigenvalue = 0;
    double min_ratio = 0; ///< min |omega(y) - omega(y0)| / |y - y0| over sampled pairs
    double max_ratio = 0;
    double sup_omega = 0;
    double max_asymmetry = 0;
    std::vector<ConstantViolation> violations;

    bool ok() const { return violations.empty(); }
};

inline constexpr int default_validation_samples = 2000;

/// Samples Re(B_2r) (the real 2r-neighbourhood of B) and compares the
/// empirical extremes with the declared constants.
inline ValidationReport validate_constants(const ConvexModel& m, int samples, std::uint64_t seed)
{
    if (samples < 1)
        throw DomainError("validate_constants: samples must be >= 1");
    constexpr double rel = 1e-9;
    ValidationReport rep;
    rep.samples = samples;
    rep.seed = seed;
    rep.min_eigenvalue = std::numeric_limits<double>::infinity();
    rep.max_eigenvalue = -std::numeric_limits<double>::infinity();
    rep.min_ratio = std::numeric_limits<double>::infinity();
    rep.max_ratio = 0;
    Vec w_min_eig, w_max_eig, w_sup;
    std::pair<Vec, Vec> w_min_ratio, w_max_ratio;
    Rng rng(seed, "validate", 0);
    const double pad = 2 * m.r;
    for (int i = 0; i < samples; ++i) {
        const Vec y = m.domain.sample_neighbourhood(rng, pad);
        const Vec y0 = m.domain.sample_neighbourhood(rng, pad);
        const Mat H = m.hessian(y);
        rep.max_asymmetry = std::max(rep.max_asymmetry, (H - H.transpose()).cwiseAbs().maxCoeff());
        Eigen::SelfAdjointEigenSolver<Mat> es((H + H.transpose()) / 2, Eigen::EigenvaluesOnly);
        if (es.eigenvalues()[0] < rep.min_eigenvalue) {
            rep.min_eigenvalue = es.eigenvalues()[0];
            w_min_eig = y;
        }
        if (es.eigenvalues()[m.dim - 1] > rep.max_eigenvalue) {
            rep.max_eigenvalue = es.eigenvalues()[m.dim - 1];
            w_max_eig = y;
        }
        const Vec w = m.omega(y);
        if (w.norm() > rep.sup_omega) {
            rep.sup_omega = w.norm();
            w_sup = y;
        }
        const double dy = (y - y0).norm();
        if (dy > 0) {
            const double ratio = (w - m.omega(y0)).norm() / dy;
            if (ratio < rep.min_ratio) {
                rep.min_ratio = ratio;
                w_min_ratio = {y, y0};
            }
            if (ratio > rep.max_ratio) {
                rep.max_ratio = ratio;
                w_max_ratio = {y, y0};
            }
        }
    }
    const auto& c = m.constants;
    if (rep.min_eigenvalue < c.gamma * (1 - rel))
        rep.violations.push_back({"gamma", c.gamma, rep.min_eigenvalue, {w_min_eig}});
    if (rep.max_ratio > c.L * (1 + rel))
        rep.violations.push_back({"L", c.L, rep.max_ratio, {w_max_ratio.first, w_max_ratio.second}});
    if (rep.min_ratio < (1 / c.Lbar) * (1 - rel))
        rep.violations.push_back({"Lbar", c.Lbar, 1 / rep.min_ratio, {w_min_ratio.first, w_min_ratio.second}});
    if (rep.sup_omega > c.M * (1 + rel))
        rep.violations.push_back({"M", c.M, rep.sup_omega, {w_sup}});
    if (rep.max_asymmetry > 1e-12 * std::max(1.0, std::abs(rep.max_eigenvalue)))
        rep.violations.push_back({"symmetry", 0, rep.max_asymmetry, {}});
    return rep;
}

namespace detail {

inline void check_common(int dim, const Domain& domain, double r, const Vec& s)
{
    if (dim < 1)
        throw ParameterError("model dimension must be >= 1");
    if (domain.dim() != dim)
        throw ParameterError("domain dimension differs from model dimension");
    if (!(r > 0))
        throw ParameterError("r must be > 0");
    if (s.size() != dim)
        throw ParameterError("s must have one width per angle");
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (!(s[i] > 0))
            throw ParameterError("every width s_i must be > 0");
}

inline std::string describe_violation(const ConstantViolation& v)
{
    std::ostringstream os;
    os << "declared " << v.constant << " = " << v.declared << " violated (empirical " << v.empirical << ")";
    if (!v.witness.empty())
        os << " at y = " << v.witness.front().transpose();
    return os.str();
}

} // namespace detail

/// Wraps caller-supplied evaluators; the declared constants are spot-checked
/// on `samples` points.
inline ConvexModel make_custom_model(int dim, std::function<double(const Vec&)> h, std::function<Vec(const Vec&)> omega,
                                     std::function<Mat(const Vec&)> hessian, Domain domain, double r, Vec s,
                                     ModelConstants declared, int samples = default_validation_samples)
{
    detail::check_common(dim, domain, r, s);
    if (!(declared.gamma > 0))
        throw ParameterError("declared gamma must be > 0");
    ConvexModel m{"custom", dim, std::move(h), std::move(omega), std::move(hessian), std::move(domain), r, std::move(s), declared};
    const ValidationReport rep = validate_constants(m, samples, 0);
    if (rep.min_eigenvalue <= 0)
        throw ModelAssumptionError("non-convex sample: Hessian eigenvalue " + std::to_string(rep.min_eigenvalue));
    if (!rep.ok())
        throw ParameterError(detail::describe_violation(rep.violations.front()));
    return m;
}

/// Builds a built-in family with closed-form constants; with `validate` the
/// (possibly declared) constants must pass validate_constants.
inline ConvexModel build_model(const ModelDescription& d, bool validate = true)
{
    const int n = d.dim;
    const Vec s = d.s.value_or(Vec::Ones(n));
    detail::check_common(n, d.domain, d.r, s);
    const Vec c = d.center.value_or(Vec::Zero(n));
    if (c.size() != n)
        throw ParameterError("center has the wrong dimension");
    const double pad = 2 * d.r;

    ConvexModel m;
    m.family = d.family;
    m.dim = n;
    m.domain = d.domain;
    m.r = d.r;
    m.s = s;

    if (d.family == "isotropic") {
        m.h = [c](const Vec& y) { return 0.5 * (y - c).squaredNorm(); };
        m.omega = [c](const Vec& y) -> Vec { return y - c; };
        m.hessian = [n](const Vec&) -> Mat { return Mat::Identity(n, n); };
        m.constants = {1, 1, 1, d.domain.farthest(c) + pad};
    } else if (d.family == "anisotropic") {
        const Mat Q = d.Q;
        if (Q.rows() != n || Q.cols() != n)
            throw ParameterError("Q must be n x n");
        if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 0)
            throw ParameterError("Q must be symmetric");
        Eigen::SelfAdjointEigenSolver<Mat> es(Q, Eigen::EigenvaluesOnly);
        const double lmin = es.eigenvalues()[0], lmax = es.eigenvalues()[n - 1];
        if (!(lmin > 0))
            throw ParameterError("non-convex model: Q is not positive definite");
        m.h = [Q, c](const Vec& y) { return 0.5 * (y - c).dot(Q * (y - c)); };
        m.omega = [Q, c](const Vec& y) -> Vec { return Q * (y - c); };
        m.hessian = [Q](const Vec&) -> Mat { return Q; };
        // sup |Q(y - c)| over B plus the 2r collar
        double supB = 0;
        if (d.domain.kind() == Domain::Kind::box) {
            for (int v = 0; v < (1 << n); ++v) {
                Vec corner(n);
                for (int i = 0; i < n; ++i)
                    corner[i] = (v >> i & 1) ? d.domain.hi()[i] : d.domain.lo()[i];
                supB = std::max(supB, (Q * (corner - c)).norm());
            }
        } else {
            supB = (Q * (d.domain.center_of_ball() - c)).norm() + lmax * d.domain.radius();
        }
        m.constants = {lmin, lmax, 1 / lmin, supB + lmax * pad};
    } else if (d.family == "quartic") {
        const double q = d.quartic;
        if (q < 0)
            throw ParameterError("non-convex model: quartic coefficient must be >= 0");
        m.h = [c, q](const Vec& y) {
            const Vec u = y - c;
            return 0.5 * u.squaredNorm() + q * u.array().pow(4).sum();
        };
        m.omega = [c, q](const Vec& y) -> Vec {
            const Vec u = y - c;
            return (u.array() + 4 * q * u.array().cube()).matrix();
        };
        m.hessian = [c, q](const Vec& y) -> Mat {
            const Vec u = y - c;
            return (1 + 12 * q * u.array().square()).matrix().asDiagonal();
        };
        // per-coordinate extremes over the bounding box of the 2r collar
        const auto [lo, hi] = d.domain.bounding_box(pad);
        double min_sq = std::numeric_limits<double>::infinity(), max_sq = 0;
        Vec max_abs(n);
        for (int i = 0; i < n; ++i) {
            const double a = lo[i] - c[i], b = hi[i] - c[i];
            const double inner = (a <= 0 && b >= 0) ? 0.0 : std::min(a * a, b * b);
            const double outer = std::max(a * a, b * b);
            min_sq = std::min(min_sq, inner);
            max_sq = std::max(max_sq, outer);
            const double t = std::sqrt(outer);
            max_abs[i] = t + 4 * q * t * t * t;
        }
        const double lmin = 1 + 12 * q * min_sq, lmax = 1 + 12 * q * max_sq;
        m.constants = {lmin, lmax, 1 / lmin, max_abs.norm()};
    } else {
        throw ParameterError("unknown model family '" + d.family + "'");
    }

    if (d.gamma) {
        if (!(*d.gamma > 0))
            throw ParameterError("declared gamma must be > 0");
        m.constants.gamma = *d.gamma;
    }
    if (d.L)
        m.constants.L = *d.L;
    if (d.Lbar)
        m.constants.Lbar = *d.Lbar;
    if (d.M)
        m.constants.M = *d.M;
    if (!(m.constants.L > 0) || !(m.constants.Lbar > 0) || !(m.constants.M > 0))
        throw ParameterError("declared L, Lbar, M must be > 0");

    if (validate) {
        const ValidationReport rep = validate_constants(m, default_validation_samples, 0);
        if (!rep.ok())
            throw ParameterError(detail::describe_violation(rep.violations.front()));
    }
    return m;
}

// ------ covering parameters ------ //

/// Fourier scales, small-divisor threshold and the derived covering constants.
struct CoveringParams {
    int n = 0;
    double eps = 0;
    double K = 0;
    double K0 = 0;
    double s_hat = 1;
    double nu = 0;    ///< 9n/2 + 2
    double alpha = 0; ///< sqrt(eps) K^nu
    double c1 = 0;    ///< 5 n (n-1)^(n-1)
    double C = 0;     ///< 12 c1 n L / gamma
    double b = 0;     ///< 11 n + 6
};

inline CoveringParams covering_params(int n, double s_hat, double L, double gamma, double eps, double K, double K0)
{
    if (!(eps >= 0 && eps <= 1))
        throw ParameterError("eps must lie in [0, 1]");
    constexpr double slack = 1e-12;
    if (!(K >= 6 * s_hat * K0 * (1 - slack)))
        throw ParameterError("K >= 6*sHat*K0 violated");
    if (!(6 * s_hat * K0 >= 6 * K0 * (1 - slack)))
        throw ParameterError("6*sHat*K0 >= 6*K0 violated");
    if (!(6 * K0 >= 12 * (1 - slack)))
        throw ParameterError("6*K0 >= 12 violated");
    CoveringParams p;
    p.n = n;
    p.eps = eps;
    p.K = K;
    p.K0 = K0;
    p.s_hat = s_hat;
    p.nu = 4.5 * n + 2;
    p.alpha = std::sqrt(eps) * std::pow(K, p.nu);
    p.c1 = 5.0 * n * std::pow(static_cast<double>(n - 1), n - 1);
    p.C = 12 * p.c1 * n * L / gamma;
    p.b = 11.0 * n + 6;
    return p;
}

inline CoveringParams covering_params(const ConvexModel& m, double eps, double K, double K0)
{
    return covering_params(m.dim, m.s_hat(), m.constants.L, m.constants.gamma, eps, K, K0);
}

/// K = max(12 sHat, ceil(ln(eps)^2)), K0 = K / (6 sHat).
inline CoveringParams covering_params_from_eps(const ConvexModel& m, double eps)
{
    if (!(eps > 0 && eps <= 1))
        throw ParameterError("K_from_eps needs 0 < eps <= 1");
    const double sh = m.s_hat();
    const double lg = std::log(eps);
    const double K = std::max(12 * sh, std::ceil(lg * lg));
    return covering_params(m, eps, K, K / (6 * sh));
}

} // namespace resokam
