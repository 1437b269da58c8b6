#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "resokam/covering.hpp"
#include "resokam/domain.hpp"
#include "resokam/errors.hpp"
#include "resokam/lattice.hpp"
#include "resokam/model.hpp"
#include "resokam/parallel.hpp"
#include "resokam/rng.hpp"

namespace resokam {

/// h in the frame adapted to k: h0(yt) = h(A^T yt), with the slow action yt_1
/// conjugate to the resonant angle k . x.
class RotatedModel {
public:
    RotatedModel(ConvexModel model, UnimodularFrame frame)
        : model_(std::move(model)), frame_(std::move(frame)), At_(frame_.dim(), frame_.dim()), A_(frame_.dim(), frame_.dim()),
          k_(frame_.dim()), tilde_(model_.domain, inverse_transpose(frame_))
    {
        const int n = frame_.dim();
        if (model_.dim != n)
            throw DomainError("frame dimension differs from model dimension");
        for (int i = 0; i < n; ++i) {
            k_[i] = static_cast<double>(frame_.k[i]);
            for (int j = 0; j < n; ++j) {
                A_(i, j) = static_cast<double>(frame_.A(i, j));
                At_(j, i) = A_(i, j);
            }
        }
        slope_floor_ = model_.constants.gamma * k_.squaredNorm();
    }

    const ConvexModel& model() const { return model_; }
    const UnimodularFrame& frame() const { return frame_; }
    int dim() const { return frame_.dim(); }
    const Vec& k() const { return k_; }
    /// The image A^-T B of the action domain.
    const ImageSet& domain_tilde() const { return tilde_; }
    /// gamma |k|^2, the lower bound on d2_slow.
    double slope_floor() const { return slope_floor_; }

    /// y = A^T yt, summed in index order.
    Vec to_actions(const Vec& yt) const
    {
        const int n = dim();
        Vec y = Vec::Zero(n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                y[i] += At_(i, j) * yt[j];
        return y;
    }

    static Vec join(double y1, const Vec& yhat)
    {
        Vec yt(yhat.size() + 1);
        yt[0] = y1;
        yt.tail(yhat.size()) = yhat;
        return yt;
    }

    double h0(const Vec& yt) const { return model_.h(to_actions(yt)); }
    /// d h0 / d yt_1 = omega(A^T yt) . k
    double d_slow(const Vec& yt) const { return model_.omega(to_actions(yt)).dot(k_); }
    double d_slow(double y1, const Vec& yhat) const { return d_slow(join(y1, yhat)); }
    /// d^2 h0 / d yt_1^2 = Hess h(A^T yt) k . k
    double d2_slow(const Vec& yt) const { return k_.dot(model_.hessian(to_actions(yt)) * k_); }
    double d2_slow(double y1, const Vec& yhat) const { return d2_slow(join(y1, yhat)); }

    /// A omega(A^T yt): the frequency vector in the rotated frame, summed in index order.
    Vec rotated_frequency(const Vec& yt) const
    {
        const Vec w = model_.omega(to_actions(yt));
        const int n = dim();
        Vec out = Vec::Zero(n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                out[i] += A_(i, j) * w[j];
        return out;
    }

private:
    static Mat inverse_transpose(const UnimodularFrame& f)
    {
        const int n = f.dim();
        Mat G(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                G(i, j) = static_cast<double>(f.Ainv(j, i));
        return G;
    }

    ConvexModel model_;
    UnimodularFrame frame_;
    Mat At_, A_;
    Vec k_;
    ImageSet tilde_;
    double slope_floor_ = 0;
};

inline FrameConstants frame_constants(const ConvexModel& m, std::optional<double> r_tilde = std::nullopt)
{
    return {m.constants.gamma, m.constants.L, m.r, r_tilde};
}

inline RotatedModel build_rotated(const ConvexModel& model, const ResonanceVector& k, std::optional<double> r_tilde = std::nullopt)
{
    if (k.dim() != model.dim)
        throw DomainError("k has the wrong dimension for this model");
    return RotatedModel(model, unimodular_completion(k, frame_constants(model, r_tilde)));
}

// ------ monotone root finding ------ //

struct SolverOptions {
    double tol_abs = 1e-12; ///< frequency units
    double tol_rel = 1e-12; ///< times gamma |k|^2 times the bracket width
    int max_iterations = 400;
};

struct EtaSolution {
    double eta = 0;
    double residual = 0; ///< |d_slow(eta, yhat) - varpi|
    double lo = 0, hi = 0; ///< bracket used
    int iterations = 0;
};

namespace detail {

inline std::string witness(double varpi, const Vec& yhat)
{
    std::ostringstream os;
    os.precision(17);
    os << "varpi = " << varpi << ", yhat = (";
    for (Eigen::Index i = 0; i < yhat.size(); ++i)
        os << (i ? ", " : "") << yhat[i];
    os << ")";
    return os.str();
}

} // namespace detail

/// Solves d_slow(eta, yhat) = varpi inside [lo, hi] by regula falsi with a
/// bisection step whenever the bracket fails to halve.
inline EtaSolution solve_in_bracket(const RotatedModel& rot, double varpi, const Vec& yhat, double lo, double hi,
                                    const SolverOptions& opt = {})
{
    auto f = [&](double t) { return rot.d_slow(t, yhat) - varpi; };
    double a = lo, b = hi;
    double fa = f(a), fb = f(b);
    if (fa > 0 || fb < 0)
        throw BracketingError("no sign change of d_slow - varpi on [" + std::to_string(lo) + ", " + std::to_string(hi) +
                              "] at " + detail::witness(varpi, yhat));
    const double slope = rot.slope_floor();
    if (fb - fa < slope * (b - a) * (1 - 1e-6))
        throw ModelAssumptionError("d_slow grows slower than gamma |k|^2 across the bracket at " + detail::witness(varpi, yhat));

    EtaSolution sol;
    sol.lo = lo;
    sol.hi = hi;
    const double stop = 1e-15 * (1 + std::abs(varpi));
    double best = std::abs(fa) <= std::abs(fb) ? a : b;
    double best_f = std::min(std::abs(fa), std::abs(fb));
    // rounding in A^T yt leaves d_slow flat at this level
    const double noise = 1e-13 * (1 + std::abs(fa) + std::abs(fb));
    bool bisect = false;
    for (int it = 0; it < opt.max_iterations; ++it) {
        sol.iterations = it + 1;
        if (best_f <= stop)
            break;
        const double width = b - a;
        if (width <= 4 * std::numeric_limits<double>::epsilon() * std::max(std::abs(a), std::abs(b)))
            break;
        double x = a - fa * (b - a) / (fb - fa);
        if (bisect || !(x > a && x < b))
            x = a + width / 2;
        const double fx = f(x);
        if (std::abs(fx) < best_f) {
            best = x;
            best_f = std::abs(fx);
        }
        if (fx < 0) {
            if (fx < fa - noise)
                throw ModelAssumptionError("d_slow is not monotone in yt_1 at " + detail::witness(varpi, yhat));
            a = x;
            fa = fx;
        } else {
            if (fx > fb + noise)
                throw ModelAssumptionError("d_slow is not monotone in yt_1 at " + detail::witness(varpi, yhat));
            b = x;
            fb = fx;
        }
        bisect = (b - a) > 0.5 * width;
    }
    sol.eta = best;
    sol.residual = best_f;
    return sol;
}

inline double residual_tolerance(const RotatedModel& rot, const EtaSolution& s, const SolverOptions& opt = {})
{
    return opt.tol_abs + opt.tol_rel * rot.slope_floor() * (s.hi - s.lo);
}

/// eta(varpi, yhat): the unique yt_1 with d_slow(yt_1, yhat) = varpi. The
/// bracket is the yt_1-slab of Re(B~_{3/2 r~_k}) through yhat, or
/// [z_1 - r_tilde_frak, z_1 + r_tilde_frak] around a known zero z_1.
inline EtaSolution solve_eta(const RotatedModel& rot, double varpi, const Vec& yhat, std::optional<double> known_zero = std::nullopt,
                             const SolverOptions& opt = {})
{
    const auto& fr = rot.frame();
    if (yhat.size() != rot.dim() - 1)
        throw DomainError("yhat must have n-1 entries");
    if (std::abs(varpi) > fr.varpi0_k * (1 + 1e-12))
        throw BracketingError("|varpi| exceeds varpi0_k at " + detail::witness(varpi, yhat));
    double lo, hi;
    if (known_zero) {
        lo = *known_zero - fr.frak_r_tilde;
        hi = *known_zero + fr.frak_r_tilde;
    } else {
        const auto slab = rot.domain_tilde().line_interval(yhat, 1.5 * fr.r_tilde_k);
        if (!slab)
            throw BracketingError("yhat line misses Re(B~_{3/2 r~_k}) at " + detail::witness(varpi, yhat));
        lo = slab->first;
        hi = slab->second;
    }
    EtaSolution s = solve_in_bracket(rot, varpi, yhat, lo, hi, opt);
    if (s.residual > residual_tolerance(rot, s, opt))
        throw BracketingError("root finder stalled above tolerance at " + detail::witness(varpi, yhat));
    return s;
}

/// Tries the bracket around a nearby zero first and falls back to the slab.
inline EtaSolution solve_eta_near(const RotatedModel& rot, double varpi, const Vec& yhat, double zero, const SolverOptions& opt = {})
{
    try {
        return solve_eta(rot, varpi, yhat, zero, opt);
    } catch (const BracketingError&) {
        return solve_eta(rot, varpi, yhat, std::nullopt, opt);
    }
}

// ------ cube decomposition of the adiabatic base ------ //

/// The half-open cubes Q_j = frak_r_k (j + [0,1)^(n-1)) whose projection
/// meets the zero set of d_slow in Re(B~_{5/4 r~_k}).
struct CubeCover {
    double edge = 0;
    int dim = 0; ///< n - 1
    std::vector<std::vector<std::int64_t>> J;
    std::vector<Vec> zero_witness; ///< per cube: a point yt of the zero set with yhat in the cube
    std::size_t candidates = 0;
    int subgrid = 3;
    std::string sampling_note = "membership detected on a 3^(n-1) sub-grid per cube; thinner intersections can be missed";

    Vec corner(std::size_t c) const
    {
        Vec v(dim);
        for (int i = 0; i < dim; ++i)
            v[i] = edge * static_cast<double>(J[c][static_cast<std::size_t>(i)]);
        return v;
    }

    /// Index of the cube containing yhat, if it is one of J.
    std::optional<std::size_t> locate(const Vec& yhat) const
    {
        std::vector<std::int64_t> j(static_cast<std::size_t>(dim));
        for (int i = 0; i < dim; ++i)
            j[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(std::floor(yhat[i] / edge));
        const auto it = std::lower_bound(J.begin(), J.end(), j);
        if (it == J.end() || *it != j)
            return std::nullopt;
        return static_cast<std::size_t>(it - J.begin());
    }

    /// Mean of the cube centres, or, when that falls outside Q, the centre of
    /// the cube closest to it.
    Vec centroid() const
    {
        if (J.empty())
            throw DomainError("empty cube cover has no centroid");
        Vec mean = Vec::Zero(dim);
        for (std::size_t c = 0; c < J.size(); ++c)
            mean += (corner(c).array() + edge / 2).matrix();
        mean /= static_cast<double>(J.size());
        if (locate(mean))
            return mean;
        std::size_t best = 0;
        double dist = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < J.size(); ++c) {
            const double d = (corner(c).array() + edge / 2 - mean.array()).matrix().norm();
            if (d < dist) {
                dist = d;
                best = c;
            }
        }
        return corner(best).array() + edge / 2;
    }
};

inline CubeCover cube_decomposition(const RotatedModel& rot, int threads = 1)
{
    const int m = rot.dim() - 1;
    const auto& fr = rot.frame();
    const double rho = 1.25 * fr.r_tilde_k;
    CubeCover cover;
    cover.edge = fr.frak_r_k;
    cover.dim = m;

    std::vector<std::int64_t> first(static_cast<std::size_t>(m)), count(static_cast<std::size_t>(m));
    std::size_t total = 1;
    for (int i = 0; i < m; ++i) {
        const auto [lo, hi] = rot.domain_tilde().axis_extent(i + 1, rho);
        first[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(std::floor(lo / cover.edge));
        count[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(std::floor(hi / cover.edge)) - first[static_cast<std::size_t>(i)] + 1;
        total *= static_cast<std::size_t>(count[static_cast<std::size_t>(i)]);
    }
    cover.candidates = total;

    const double offsets[3] = {0.0, 0.5, 1.0 - 0x1.0p-20};
    std::size_t sub_total = 1;
    for (int i = 0; i < m; ++i)
        sub_total *= 3;

    std::vector<std::optional<Vec>> found(total);
    parallel_for(total, threads, [&](std::size_t c) {
        std::vector<std::int64_t> j(static_cast<std::size_t>(m));
        std::size_t code = c;
        for (int i = m - 1; i >= 0; --i) {
            j[static_cast<std::size_t>(i)] = first[static_cast<std::size_t>(i)] + static_cast<std::int64_t>(code % static_cast<std::size_t>(count[static_cast<std::size_t>(i)]));
            code /= static_cast<std::size_t>(count[static_cast<std::size_t>(i)]);
        }
        for (std::size_t s = 0; s < sub_total; ++s) {
            Vec yhat(m);
            std::size_t sc = s;
            for (int i = 0; i < m; ++i, sc /= 3)
                yhat[i] = cover.edge * (static_cast<double>(j[static_cast<std::size_t>(i)]) + offsets[sc % 3]);
            const auto slab = rot.domain_tilde().line_interval(yhat, rho);
            if (!slab)
                continue;
            const double flo = rot.d_slow(slab->first, yhat), fhi = rot.d_slow(slab->second, yhat);
            if (flo <= 0 && fhi >= 0) {
                double a = slab->first, b = slab->second;
                for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, std::abs(a)); ++it) {
                    const double mid = (a + b) / 2;
                    (rot.d_slow(mid, yhat) <= 0 ? a : b) = mid;
                }
                found[c] = RotatedModel::join((a + b) / 2, yhat);
                return;
            }
        }
    });
    // candidates are visited in lexicographic order of j, so J comes out sorted
    for (std::size_t c = 0; c < total; ++c) {
        if (!found[c])
            continue;
        std::vector<std::int64_t> j(static_cast<std::size_t>(m));
        std::size_t code = c;
        for (int i = m - 1; i >= 0; --i) {
            j[static_cast<std::size_t>(i)] = first[static_cast<std::size_t>(i)] + static_cast<std::int64_t>(code % static_cast<std::size_t>(count[static_cast<std::size_t>(i)]));
            code /= static_cast<std::size_t>(count[static_cast<std::size_t>(i)]);
        }
        cover.J.push_back(std::move(j));
        cover.zero_witness.push_back(*found[c]);
    }
    return cover;
}

// ------ resonance graphs ------ //

struct GraphMargins {
    double max_residual = 0;
    double residual_tolerance = 0;    ///< smallest tolerance over all solves
    double max_increment_ratio = 0;   ///< max of (d eta) gamma |k|^2 / (d varpi); <= 1 required
    double min_increment = 0;         ///< > 0 required (strictly increasing columns)
    double max_inclusion_ratio = 0;   ///< max dist((eta, yhat), B~) / (3/2 r~_k); <= 1 required
};

/// Sampled graphs eta(varpi, yhat) over a uniform varpi grid and per-cube
/// yhat sub-grids. eta and residuals are stored varpi-major:
/// index = varpi_index * yhat.size() + yhat_index.
struct ResonanceGraph {
    UnimodularFrame frame;
    CubeCover cubes;
    std::vector<double> varpi;
    std::vector<Vec> yhat;
    std::vector<std::size_t> yhat_cube;
    std::vector<double> eta;
    std::vector<double> residuals;
    std::vector<double> tolerances;
    GraphMargins margins;

    double eta_at(std::size_t iv, std::size_t iy) const { return eta[iv * yhat.size() + iy]; }
    double residual_at(std::size_t iv, std::size_t iy) const { return residuals[iv * yhat.size() + iy]; }
};

inline std::vector<Vec> cube_subgrid(const CubeCover& cover, std::size_t c, int per_cube)
{
    const int m = cover.dim;
    std::size_t total = 1;
    for (int i = 0; i < m; ++i)
        total *= static_cast<std::size_t>(per_cube);
    std::vector<Vec> pts;
    const Vec corner = cover.corner(c);
    for (std::size_t s = 0; s < total; ++s) {
        Vec p(m);
        std::size_t code = s;
        for (int i = m - 1; i >= 0; --i, code /= static_cast<std::size_t>(per_cube))
            p[i] = corner[i] + cover.edge * (static_cast<double>(code % static_cast<std::size_t>(per_cube)) + 0.5) / per_cube;
        pts.push_back(p);
    }
    return pts;
}

inline ResonanceGraph build_graph(const RotatedModel& rot, const CubeCover& cover, int n_varpi, int per_cube, int threads = 1,
                                  const SolverOptions& opt = {})
{
    if (n_varpi < 2)
        throw DomainError("build_graph: nVarpi must be >= 2");
    if (per_cube < 1)
        throw DomainError("build_graph: perCube must be >= 1");
    const auto& fr = rot.frame();
    ResonanceGraph g;
    g.frame = fr;
    g.cubes = cover;
    for (int i = 0; i < n_varpi; ++i)
        g.varpi.push_back(-fr.varpi0_k + 2 * fr.varpi0_k * i / (n_varpi - 1));
    for (std::size_t c = 0; c < cover.J.size(); ++c)
        for (auto& p : cube_subgrid(cover, c, per_cube)) {
            g.yhat.push_back(std::move(p));
            g.yhat_cube.push_back(c);
        }
    const std::size_t ny = g.yhat.size(), nv = g.varpi.size();
    g.eta.assign(nv * ny, 0);
    g.residuals.assign(nv * ny, 0);
    g.tolerances.assign(nv * ny, 0);
    if (ny == 0) {
        g.margins.min_increment = std::numeric_limits<double>::infinity();
        return g;
    }
    const double outer = 1.5 * fr.r_tilde_k;
    std::vector<double> inclusion(ny, 0);
    parallel_for(ny, threads, [&](std::size_t iy) {
        const Vec& yh = g.yhat[iy];
        const auto slab = rot.domain_tilde().line_interval(yh, outer);
        if (!slab)
            throw InvariantViolation("graph column outside Re(B~_{3/2 r~_k}) at " + detail::witness(0, yh));
        for (std::size_t iv = 0; iv < nv; ++iv) {
            const EtaSolution s = solve_in_bracket(rot, g.varpi[iv], yh, slab->first, slab->second, opt);
            g.eta[iv * ny + iy] = s.eta;
            g.residuals[iv * ny + iy] = s.residual;
            g.tolerances[iv * ny + iy] = residual_tolerance(rot, s, opt);
            inclusion[iy] = std::max(inclusion[iy], rot.domain_tilde().distance(RotatedModel::join(s.eta, yh)) / outer);
        }
    });

    // invariants, checked in a fixed order so the first witness is deterministic
    GraphMargins& mg = g.margins;
    mg.residual_tolerance = std::numeric_limits<double>::infinity();
    mg.min_increment = std::numeric_limits<double>::infinity();
    const double slope = rot.slope_floor();
    for (std::size_t iy = 0; iy < ny; ++iy) {
        for (std::size_t iv = 0; iv < nv; ++iv) {
            const std::size_t idx = iv * ny + iy;
            mg.max_residual = std::max(mg.max_residual, g.residuals[idx]);
            mg.residual_tolerance = std::min(mg.residual_tolerance, g.tolerances[idx]);
            if (g.residuals[idx] > g.tolerances[idx])
                throw InvariantViolation("residual " + std::to_string(g.residuals[idx]) + " above tolerance at " +
                                         detail::witness(g.varpi[iv], g.yhat[iy]));
            if (iv == 0)
                continue;
            const double d_eta = g.eta[idx] - g.eta[idx - ny];
            const double d_varpi = g.varpi[iv] - g.varpi[iv - 1];
            mg.min_increment = std::min(mg.min_increment, d_eta);
            mg.max_increment_ratio = std::max(mg.max_increment_ratio, d_eta * slope / d_varpi);
            if (!(d_eta > 0))
                throw InvariantViolation("eta not increasing in varpi at " + detail::witness(g.varpi[iv], g.yhat[iy]));
            if (d_eta > d_varpi / slope * (1 + 1e-6))
                throw InvariantViolation("eta increment exceeds d varpi / (gamma |k|^2) at " + detail::witness(g.varpi[iv], g.yhat[iy]));
        }
        mg.max_inclusion_ratio = std::max(mg.max_inclusion_ratio, inclusion[iy]);
        if (inclusion[iy] > 1 + 1e-9)
            throw InvariantViolation("graph point outside Re(B~_{3/2 r~_k}) at " + detail::witness(0, g.yhat[iy]));
    }
    return g;
}

inline ResonanceGraph build_graph(const RotatedModel& rot, int n_varpi, int per_cube, int threads = 1)
{
    return build_graph(rot, cube_decomposition(rot, threads), n_varpi, per_cube, threads);
}

// ------ contraction certificate ------ //

struct ContractionReport {
    Vec y0;
    double d = 0;      ///< d2_slow(y0)
    double r_hat = 0;  ///< radius of the yhat ball
    double r1 = 0;     ///< radius of the yt_1 ball, r_hat / t_k
    // sup over the yhat ball of |d_slow(yt_1^0, yhat)| against 1/2 gamma |k|^2 r1
    double first_sup = 0, first_bound = 0;
    Vec first_witness;
    // sup over the product ball of |d2_slow - d| against 1/2 gamma |k|^2
    double second_sup = 0, second_bound = 0;
    Vec second_witness;
    // fixed-point iteration eta <- eta - d_slow(eta, .) / d from eta = yt_1^0
    double contraction_factor = 0;
    int max_iterations = 0;
    bool iterates_in_ball = true;
    bool converged = true;
    int sample_points = 0;

    double first_margin() const { return first_bound - first_sup; }
    double second_margin() const { return second_bound - second_sup; }
    bool first_pass() const { return first_sup <= first_bound; }
    bool second_pass() const { return second_sup <= second_bound; }
};

/// Grid points of the closed ball of radius `radius` in `dim` dimensions.
inline std::vector<Vec> ball_grid(int dim, double radius, int per_axis)
{
    std::vector<Vec> pts;
    if (dim == 0) {
        pts.emplace_back(0);
        return pts;
    }
    std::size_t total = 1;
    for (int i = 0; i < dim; ++i)
        total *= static_cast<std::size_t>(per_axis);
    for (std::size_t s = 0; s < total; ++s) {
        Vec p(dim);
        std::size_t code = s;
        for (int i = 0; i < dim; ++i, code /= static_cast<std::size_t>(per_axis))
            p[i] = -radius + 2 * radius * static_cast<double>(code % static_cast<std::size_t>(per_axis)) / (per_axis - 1);
        if (p.norm() <= radius * (1 + 1e-12))
            pts.push_back(p);
    }
    if (dim > 1) // axis end points are not on a square grid
        for (int i = 0; i < dim; ++i)
            for (double sgn : {-1.0, 1.0}) {
                Vec p = Vec::Zero(dim);
                p[i] = sgn * radius;
                pts.push_back(p);
            }
    return pts;
}

inline ContractionReport contraction_certificate(const RotatedModel& rot, const Vec& y0, int per_axis = 21, double root_tolerance = 1e-10)
{
    const int n = rot.dim();
    if (y0.size() != n)
        throw DomainError("contraction_certificate: y0 has the wrong dimension");
    if (per_axis < 2)
        throw DomainError("contraction_certificate: need at least 2 points per axis");
    const double at_root = rot.d_slow(y0);
    if (std::abs(at_root) > root_tolerance)
        throw DomainError("contraction_certificate: d_slow(y0) = " + std::to_string(at_root) + " is not a graph point");
    const auto& fr = rot.frame();
    ContractionReport rep;
    rep.y0 = y0;
    rep.d = rot.d2_slow(y0);
    rep.r_hat = fr.r_hat_k;
    rep.r1 = fr.r_hat_k / fr.t_k;
    const double slope = rot.slope_floor();
    rep.first_bound = 0.5 * slope * rep.r1;
    rep.second_bound = 0.5 * slope;

    const double y1 = y0[0];
    const Vec yhat0 = y0.tail(n - 1);
    const auto hat_pts = ball_grid(n - 1, rep.r_hat, per_axis);
    std::vector<double> t_pts;
    for (int i = 0; i < per_axis; ++i)
        t_pts.push_back(y1 - rep.r1 + 2 * rep.r1 * i / (per_axis - 1));

    for (const Vec& dh : hat_pts) {
        const Vec yh = yhat0 + dh;
        const double v = std::abs(rot.d_slow(y1, yh));
        if (v > rep.first_sup || rep.first_witness.size() == 0) {
            rep.first_sup = std::max(rep.first_sup, v);
            rep.first_witness = RotatedModel::join(y1, yh);
        }
        for (double t : t_pts) {
            const double w = std::abs(rot.d2_slow(t, yh) - rep.d);
            if (w > rep.second_sup || rep.second_witness.size() == 0) {
                rep.second_sup = std::max(rep.second_sup, w);
                rep.second_witness = RotatedModel::join(t, yh);
            }
        }
        ++rep.sample_points;

        double eta = y1;
        double prev_step = 0;
        const double floor = 64 * std::numeric_limits<double>::epsilon() * std::max(std::abs(y1), rep.r1);
        int it = 0;
        bool done = false;
        for (; it < 200; ++it) {
            const double step = rot.d_slow(eta, yh) / rep.d;
            eta -= step;
            if (std::abs(eta - y1) > rep.r1 * (1 + 1e-9))
                rep.iterates_in_ball = false;
            if (it > 0 && std::abs(prev_step) > floor)
                rep.contraction_factor = std::max(rep.contraction_factor, std::abs(step) / std::abs(prev_step));
            prev_step = step;
            if (std::abs(step) <= floor) {
                done = true;
                ++it;
                break;
            }
        }
        rep.max_iterations = std::max(rep.max_iterations, it);
        rep.converged = rep.converged && done;
    }
    return rep;
}

// ------ non-resonance of the normal set ------ //

struct NonresSample {
    Vec y;                ///< point of the normal set, rotated coordinates
    double min_value = 0; ///< min over l in G^n_K \ Z e_1 of |A omega(A^T y) . l|
    IVec argmin;          ///< the minimising l
    double margin = 0;    ///< min_value - threshold
};

struct NonresReport {
    double threshold = 0;    ///< 2 alpha K^(n+3) / |k|
    double slab_varpi = 0;   ///< alpha / C
    std::uint64_t samples = 0;
    std::uint64_t seed = 0;
    std::uint64_t passed = 0;
    double pass_fraction = 1;
    double worst_margin = std::numeric_limits<double>::infinity();
    std::size_t worst_index = 0;
    std::vector<NonresSample> points;
    std::size_t cubes = 0;
};

/// |w . l| summed in index order.
inline double lattice_dot(const Vec& w, const IVec& l)
{
    double acc = 0;
    for (std::size_t j = 0; j < l.size(); ++j)
        acc += w[static_cast<Eigen::Index>(j)] * static_cast<double>(l[j]);
    return std::abs(acc);
}

inline constexpr std::uint64_t nonres_shard_size = 1024;

inline NonresReport check_nonresonance(const RotatedModel& rot, const CoveringParams& params, const CubeCover& cover,
                                       std::uint64_t samples, std::uint64_t seed, int threads = 1)
{
    const auto& fr = rot.frame();
    const int n = rot.dim();
    NonresReport rep;
    rep.slab_varpi = params.alpha / params.C;
    if (rep.slab_varpi > fr.varpi0_k)
        throw ParameterError("alpha/C = " + std::to_string(rep.slab_varpi) + " exceeds varpi0_k = " + std::to_string(fr.varpi0_k));
    rep.threshold = 2 * params.alpha * std::pow(params.K, n + 3) / fr.k.norm2();
    rep.seed = seed;
    rep.cubes = cover.J.size();
    if (cover.J.empty())
        return rep;

    std::vector<IVec> ells;
    for (auto& l : enumerate_generators(n, params.K))
        if (!(l.norm1() == 1 && l[0] == 1))
            ells.push_back(l.entries());

    rep.samples = samples;
    rep.points.resize(samples);
    const std::size_t shards = static_cast<std::size_t>((samples + nonres_shard_size - 1) / nonres_shard_size);
    const int m = n - 1;
    parallel_for(shards, threads, [&](std::size_t s) {
        Rng rng(seed, "nonres", s);
        const std::uint64_t begin = s * nonres_shard_size;
        const std::uint64_t end = std::min<std::uint64_t>(samples, begin + nonres_shard_size);
        for (std::uint64_t i = begin; i < end; ++i) {
            const std::size_t c = static_cast<std::size_t>(rng.below(cover.J.size()));
            Vec yh = cover.corner(c);
            for (int a = 0; a < m; ++a)
                yh[a] += cover.edge * rng.uniform();
            const double z1 = cover.zero_witness[c][0];
            const double lo = solve_eta_near(rot, -rep.slab_varpi, yh, z1).eta;
            const double hi = solve_eta_near(rot, rep.slab_varpi, yh, z1).eta;
            NonresSample& p = rep.points[i];
            p.y = RotatedModel::join(rng.uniform(lo, hi), yh);
            const Vec w = rot.rotated_frequency(p.y);
            p.min_value = std::numeric_limits<double>::infinity();
            for (const auto& l : ells) {
                const double v = lattice_dot(w, l);
                if (v < p.min_value) {
                    p.min_value = v;
                    p.argmin = l;
                }
            }
            p.margin = p.min_value - rep.threshold;
        }
    });
    for (std::size_t i = 0; i < rep.points.size(); ++i) {
        const auto& p = rep.points[i];
        if (p.margin >= 0)
            ++rep.passed;
        if (p.margin < rep.worst_margin) {
            rep.worst_margin = p.margin;
            rep.worst_index = i;
        }
    }
    rep.pass_fraction = static_cast<double>(rep.passed) / static_cast<double>(samples);
    return rep;
}

inline NonresReport check_nonresonance(const RotatedModel& rot, const CoveringParams& params, std::uint64_t samples, std::uint64_t seed,
                                       int threads = 1)
{
    return check_nonresonance(rot, params, cube_decomposition(rot, threads), samples, seed, threads);
}

} // namespace resokam
