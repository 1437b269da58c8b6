#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "resokam/errors.hpp"
#include "resokam/rng.hpp"

namespace resokam {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }
inline std::vector<double> to_std(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

/// Action domain B: an axis-aligned box or a Euclidean ball.
class Domain {
public:
    enum class Kind { box, ball };

    static Domain box(Vec lo, Vec hi)
    {
        if (lo.size() != hi.size() || lo.size() == 0)
            throw DomainError("box bounds must be non-empty and of equal length");
        for (Eigen::Index i = 0; i < lo.size(); ++i)
            if (!(lo[i] < hi[i]))
                throw DomainError("box bounds must satisfy lo < hi");
        Domain d;
        d.kind_ = Kind::box;
        d.lo_ = std::move(lo);
        d.hi_ = std::move(hi);
        return d;
    }

    static Domain ball(Vec center, double radius)
    {
        if (center.size() == 0 || !(radius > 0))
            throw DomainError("ball needs a centre and a positive radius");
        Domain d;
        d.kind_ = Kind::ball;
        d.lo_ = std::move(center);
        d.radius_ = radius;
        return d;
    }

    Kind kind() const { return kind_; }
    int dim() const { return static_cast<int>(lo_.size()); }
    const Vec& lo() const { return lo_; }
    const Vec& hi() const { return hi_; }
    const Vec& center_of_ball() const { return lo_; }
    double radius() const { return radius_; }

    Vec centroid() const { return kind_ == Kind::box ? Vec((lo_ + hi_) / 2) : lo_; }

    double volume() const
    {
        if (kind_ == Kind::box)
            return (hi_ - lo_).prod();
        const double n = dim();
        return std::pow(std::numbers::pi, n / 2) / std::tgamma(n / 2 + 1) * std::pow(radius_, n);
    }

    /// Bounding box of the closed pad-neighbourhood.
    std::pair<Vec, Vec> bounding_box(double pad = 0) const
    {
        if (kind_ == Kind::box)
            return {lo_.array() - pad, hi_.array() + pad};
        return {lo_.array() - (radius_ + pad), lo_.array() + (radius_ + pad)};
    }

    /// Euclidean distance from y to B (0 inside).
    double distance(const Vec& y) const
    {
        if (kind_ == Kind::box)
            return (y - y.cwiseMax(lo_).cwiseMin(hi_)).norm();
        return std::max(0.0, (y - lo_).norm() - radius_);
    }

    bool contains(const Vec& y, double tol = 0) const { return y.size() == lo_.size() && distance(y) <= tol; }

    /// sup over B of v . y
    double support(const Vec& v) const
    {
        if (kind_ == Kind::box)
            return (v.array().max(0) * hi_.array() + v.array().min(0) * lo_.array()).sum();
        return v.dot(lo_) + radius_ * v.norm();
    }

    /// Farthest distance from a point to B (sup over B of |y - p|).
    double farthest(const Vec& p) const
    {
        if (kind_ == Kind::ball)
            return (lo_ - p).norm() + radius_;
        Vec far(p.size());
        for (Eigen::Index i = 0; i < p.size(); ++i)
            far[i] = std::max(std::abs(lo_[i] - p[i]), std::abs(hi_[i] - p[i]));
        return far.norm();
    }

    /// Uniform sample of B; balls by rejection from the bounding box.
    Vec sample(Rng& rng) const { return sample_neighbourhood(rng, 0); }

    /// Uniform sample of the closed pad-neighbourhood {y : dist(y, B) <= pad},
    /// by rejection from its bounding box.
    Vec sample_neighbourhood(Rng& rng, double pad) const
    {
        const auto [lo, hi] = bounding_box(pad);
        Vec y(lo.size());
        while (true) {
            for (Eigen::Index i = 0; i < y.size(); ++i)
                y[i] = rng.uniform(lo[i], hi[i]);
            if (kind_ == Kind::box && pad == 0)
                return y;
            if (distance(y) <= pad)
                return y;
        }
    }

private:
    Kind kind_ = Kind::box;
    Vec lo_, hi_;
    double radius_ = 0;
};

/// The linear image G B of a domain under an invertible matrix G, with
/// Euclidean distance queries in image coordinates.
class ImageSet {
public:
    ImageSet(Domain domain, Mat G) : domain_(std::move(domain)), G_(std::move(G))
    {
        if (G_.rows() != domain_.dim() || G_.cols() != domain_.dim())
            throw DomainError("image matrix has the wrong shape");
        lu_ = G_.fullPivLu();
        if (!lu_.isInvertible())
            throw DomainError("image matrix is singular");
        inverse_ = lu_.inverse();
        if (domain_.kind() == Domain::Kind::ball) {
            Eigen::SelfAdjointEigenSolver<Mat> es(G_.transpose() * G_);
            gram_values_ = es.eigenvalues();
            gram_vectors_ = es.eigenvectors();
        } else {
            // least-squares solvers for every proper subset of free coordinates
            const int n = dim();
            face_pinv_.resize(std::size_t{1} << n);
            for (std::size_t mask = 1; mask + 1 < face_pinv_.size(); ++mask) {
                std::vector<int> cols;
                for (int i = 0; i < n; ++i)
                    if (mask >> i & 1)
                        cols.push_back(i);
                Mat sub(n, static_cast<Eigen::Index>(cols.size()));
                for (std::size_t c = 0; c < cols.size(); ++c)
                    sub.col(static_cast<Eigen::Index>(c)) = G_.col(cols[c]);
                face_pinv_[mask] = sub.colPivHouseholderQr().solve(Mat::Identity(n, n));
            }
        }
    }

    const Domain& domain() const { return domain_; }
    const Mat& matrix() const { return G_; }
    int dim() const { return domain_.dim(); }

    /// sup over G B of v . p
    double support(const Vec& v) const { return domain_.support(G_.transpose() * v); }

    /// Euclidean distance from p to G B.
    double distance(const Vec& p) const
    {
        return domain_.kind() == Domain::Kind::box ? box_distance(p) : ball_distance(p);
    }

    /// Extent of coordinate `axis` over the closed rho-neighbourhood of G B.
    std::pair<double, double> axis_extent(int axis, double rho) const
    {
        Vec e = Vec::Zero(dim());
        e[axis] = 1;
        return {-support(-e) - rho, support(e) + rho};
    }

    /// The interval of t with dist((t, tail), G B) <= rho, where t is the
    /// first coordinate; empty when the line misses the neighbourhood.
    std::optional<std::pair<double, double>> line_interval(const Vec& tail, double rho) const
    {
        const auto [tlo, thi] = axis_extent(0, rho);
        Vec p(dim());
        p.tail(dim() - 1) = tail;
        auto g = [&](double t) {
            p[0] = t;
            return distance(p);
        };
        // dist along a line is convex: golden section for the minimiser
        const double phi = (std::sqrt(5.0) - 1) / 2;
        double a = tlo, b = thi;
        double c = b - phi * (b - a), d = a + phi * (b - a);
        double gc = g(c), gd = g(d);
        const double scale = std::max({1.0, std::abs(tlo), std::abs(thi)});
        while (b - a > 1e-13 * scale) {
            if (gc <= rho) { // already inside: stop early
                a = b = c;
                break;
            }
            if (gd <= rho) {
                a = b = d;
                break;
            }
            if (gc < gd) {
                b = d;
                d = c;
                gd = gc;
                c = b - phi * (b - a);
                gc = g(c);
            } else {
                a = c;
                c = d;
                gc = gd;
                d = a + phi * (b - a);
                gd = g(d);
            }
        }
        const double inside = (a + b) / 2;
        if (g(inside) > rho)
            return std::nullopt;
        // Illinois regula falsi on g - rho, keeping `in` inside
        auto edge = [&](double in, double out) {
            double hin = g(in) - rho, hout = g(out) - rho;
            if (hout <= 0)
                return out;
            int side = 0;
            for (int it = 0; it < 200 && std::abs(out - in) > 1e-15 * scale; ++it) {
                double x = in - hin * (out - in) / (hout - hin);
                if (!(std::abs(x - in) < std::abs(out - in)) || !(std::abs(x - out) < std::abs(out - in)))
                    x = (in + out) / 2;
                const double hx = g(x) - rho;
                if (hx <= 0) {
                    in = x;
                    hin = hx;
                    if (side == -1)
                        hout /= 2;
                    side = -1;
                } else {
                    out = x;
                    hout = hx;
                    if (side == 1)
                        hin /= 2;
                    side = 1;
                }
            }
            return in;
        };
        return std::make_pair(edge(inside, tlo), edge(inside, thi));
    }

private:
    // Exact: the minimiser lies in the relative interior of one face of the
    // box, where it is the unconstrained least-squares point over that face.
    double box_distance(const Vec& p) const
    {
        const int n = dim();
        if (domain_.contains(inverse_ * p, 0))
            return 0;
        int faces = 1;
        for (int i = 0; i < n; ++i)
            faces *= 3;
        double best = std::numeric_limits<double>::infinity();
        const Vec& lo = domain_.lo();
        const Vec& hi = domain_.hi();
        Vec y(n);
        for (int f = 0; f < faces; ++f) {
            std::size_t mask = 0;
            int code = f;
            for (int i = 0; i < n; ++i, code /= 3) {
                const int s = code % 3;
                if (s == 2) {
                    y[i] = 0;
                    mask |= std::size_t{1} << i;
                } else {
                    y[i] = s == 0 ? lo[i] : hi[i];
                }
            }
            if (mask + 1 == face_pinv_.size())
                continue; // interior case handled above
            if (mask) {
                const Vec z = face_pinv_[mask] * (p - G_ * y);
                bool feasible = true;
                Eigen::Index c = 0;
                for (int i = 0; i < n && feasible; ++i) {
                    if (!(mask >> i & 1))
                        continue;
                    const double zi = z[c++];
                    feasible = zi >= lo[i] && zi <= hi[i];
                    y[i] = zi;
                }
                if (!feasible)
                    continue;
            }
            best = std::min(best, (p - G_ * y).norm());
        }
        return best;
    }

    // Secular equation |(G^T G + lambda)^-1 G^T q| = R in the form
    // 1/R - 1/|x(lambda)| = 0, by Newton safeguarded with bisection.
    double ball_distance(const Vec& p) const
    {
        const Vec q = p - G_ * domain_.center_of_ball();
        const double R = domain_.radius();
        if ((inverse_ * q).norm() <= R)
            return 0;
        const Vec b = gram_vectors_.transpose() * (G_.transpose() * q);
        const Eigen::Index n = b.size();
        double lo = 0, hi = b.norm() / R, lambda = 0;
        for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
            double sq = 0, cube = 0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double d = gram_values_[i] + lambda;
                sq += b[i] * b[i] / (d * d);
                cube += b[i] * b[i] / (d * d * d);
            }
            const double norm = std::sqrt(sq);
            const double phi = 1 / R - 1 / norm;
            if (phi == 0)
                break;
            (phi > 0 ? lo : hi) = lambda;
            // d phi / d lambda = -cube / norm^3
            double next = lambda + phi * norm * sq / cube;
            if (!(next > lo && next < hi))
                next = (lo + hi) / 2;
            if (std::abs(next - lambda) <= 1e-16 * std::max(1.0, lambda))
                break;
            lambda = next;
        }
        const Vec u = gram_vectors_ * (b.array() / (gram_values_.array() + lambda)).matrix();
        return (q - G_ * u).norm();
    }

    Domain domain_;
    Mat G_;
    Eigen::FullPivLU<Mat> lu_;
    Mat inverse_;
    Vec gram_values_;
    Mat gram_vectors_;
    std::vector<Mat> face_pinv_;
};

} // namespace resokam
