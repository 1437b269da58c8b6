#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "resokam/errors.hpp"
#include "resokam/lattice.hpp"
#include "resokam/resgraph.hpp"

namespace resokam {

using Complex = std::complex<double>;

/// Finite Fourier series f(x) = sum_m c_m exp(i m . x).
class TrigPotential {
public:
    TrigPotential() = default;
    explicit TrigPotential(int dim) : dim_(dim)
    {
        if (dim < 1)
            throw DomainError("potential dimension must be positive");
    }

    int dim() const { return dim_; }
    const std::map<IVec, Complex>& modes() const { return modes_; }

    /// Adds c to the coefficient of mode m.
    void add(const IVec& m, Complex c)
    {
        if (static_cast<int>(m.size()) != dim_)
            throw DomainError("mode has the wrong dimension");
        modes_[m] += c;
    }

    /// Adds a cos(m . x) + b sin(m . x), keeping f real.
    void add_real(const IVec& m, double a, double b = 0)
    {
        IVec neg(m.size());
        for (std::size_t i = 0; i < m.size(); ++i)
            neg[i] = -m[i];
        if (neg == m) {
            add(m, a);
            return;
        }
        add(m, Complex(a / 2, -b / 2));
        add(neg, Complex(a / 2, b / 2));
    }

    /// c_{-m} = conj(c_m) for every stored mode, to relative tolerance.
    bool is_real(double tol = 1e-12) const
    {
        for (const auto& [m, c] : modes_) {
            IVec neg(m.size());
            for (std::size_t i = 0; i < m.size(); ++i)
                neg[i] = -m[i];
            const auto it = modes_.find(neg);
            const Complex partner = it == modes_.end() ? Complex(0) : it->second;
            if (std::abs(partner - std::conj(c)) > tol * std::max(1.0, std::abs(c)))
                return false;
        }
        return true;
    }

    Complex evaluate(const std::vector<double>& x) const
    {
        Complex acc = 0;
        for (const auto& [m, c] : modes_) {
            double phase = 0;
            for (std::size_t i = 0; i < m.size(); ++i)
                phase += static_cast<double>(m[i]) * x[i];
            acc += c * std::polar(1.0, phase);
        }
        return acc;
    }

    double l2_squared() const
    {
        double s = 0;
        for (const auto& [m, c] : modes_)
            s += std::norm(c);
        return s;
    }

    /// Lines "m1,...,mn, re, im"; '#' starts a comment.
    static TrigPotential parse(std::istream& in, const std::string& origin = "potential")
    {
        TrigPotential f;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (const auto hash = line.find('#'); hash != std::string::npos)
                line.erase(hash);
            if (line.find_first_not_of(" \t\r") == std::string::npos)
                continue;
            std::vector<std::string> cells;
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ','))
                cells.push_back(cell);
            const std::string where = origin + ":" + std::to_string(lineno);
            if (cells.size() < 3)
                throw ConfigError(where + ": expected m1,...,mn, re, im");
            const int n = static_cast<int>(cells.size()) - 2;
            if (f.dim_ == 0)
                f.dim_ = n;
            else if (f.dim_ != n)
                throw ConfigError(where + ": mode dimension changed from " + std::to_string(f.dim_));
            IVec m(static_cast<std::size_t>(n));
            try {
                for (int i = 0; i < n; ++i) {
                    std::size_t used = 0;
                    m[static_cast<std::size_t>(i)] = std::stoll(cells[static_cast<std::size_t>(i)], &used);
                    if (cells[static_cast<std::size_t>(i)].find_first_not_of(" \t\r", used) != std::string::npos)
                        throw std::invalid_argument("trailing text");
                }
                f.add(m, Complex(std::stod(cells[static_cast<std::size_t>(n)]), std::stod(cells[static_cast<std::size_t>(n + 1)])));
            } catch (const std::logic_error&) {
                throw ConfigError(where + ": malformed number");
            }
        }
        if (f.dim_ == 0)
            throw ConfigError(origin + ": no modes");
        return f;
    }

    static TrigPotential load(const std::string& path)
    {
        std::ifstream in(path);
        if (!in)
            throw ConfigError("cannot open potential file " + path);
        return parse(in, path);
    }

private:
    int dim_ = 0;
    std::map<IVec, Complex> modes_;
};

/// One-dimensional series j -> coefficient.
using Series1d = std::map<std::int64_t, Complex>;

inline Complex evaluate(const Series1d& s, double theta)
{
    Complex acc = 0;
    for (const auto& [j, c] : s)
        acc += c * std::polar(1.0, static_cast<double>(j) * theta);
    return acc;
}

/// Average of f(A^-1 x~) over the fast angles x~_2..x~_n. A mode m survives
/// exactly when A^-T m lies in Z e_1, i.e. m = j k, and lands at index j.
inline Series1d fast_angle_average(const TrigPotential& f, const UnimodularFrame& frame)
{
    const int n = frame.dim();
    if (f.dim() != n)
        throw DomainError("potential dimension differs from the frame");
    const IntMatrix AinvT = frame.Ainv.transposed();
    Series1d out;
    for (const auto& [m, c] : f.modes()) {
        const IVec u = AinvT.apply(m);
        bool parallel = true;
        for (int i = 1; i < n; ++i)
            parallel = parallel && u[static_cast<std::size_t>(i)] == 0;
        if (parallel && c != Complex(0))
            out[u[0]] += c;
    }
    return out;
}

/// m_k = 1/2 d2_slow at the graph point eta(0, yhat0).
inline double curvature_at(const RotatedModel& rot, const Vec& yhat0)
{
    const double eta = solve_eta(rot, 0, yhat0).eta;
    const double m = 0.5 * rot.d2_slow(eta, yhat0);
    if (!(m > 0))
        throw ModelAssumptionError("non-positive curvature at the graph point");
    return m;
}

struct CriticalPoint {
    double theta = 0;
    double value = 0;
    std::string type; ///< "max", "min" or "degenerate"
};

struct PendulumEnergies {
    double min = 0;
    double max = 0;
    double separatrix = 0;
};

struct StandardFormData {
    ResonanceVector k;
    Vec yhat0;
    double eta0 = 0;
    double eps = 0;
    Series1d f1;
    bool f1_real = true;
    double m_k = 0;
    Series1d G0;
    bool degenerate = false;
    std::vector<CriticalPoint> critical_points;
    std::optional<PendulumEnergies> pendulum;
    std::vector<std::string> not_computed = {"O(|p_hat - p_hat_0|)", "O(|p_1|)", "nu(p, q_1)", "G(p, q_1)"};
};

namespace detail {

inline double series_real(const Series1d& s, double t, int derivative)
{
    double acc = 0;
    for (const auto& [j, c] : s) {
        const double jd = static_cast<double>(j);
        const Complex e = c * std::polar(1.0, jd * t) * std::pow(Complex(0, jd), derivative);
        acc += e.real();
    }
    return acc;
}

/// Critical points of a real trig polynomial on [0, 2 pi): sign changes of the
/// derivative on a dense grid, refined by safeguarded Newton.
inline std::vector<CriticalPoint> trig_critical_points(const Series1d& s, int grid = 4096)
{
    std::vector<CriticalPoint> pts;
    std::int64_t degree = 0;
    for (const auto& [j, c] : s)
        degree = std::max<std::int64_t>(degree, j < 0 ? -j : j);
    if (degree == 0)
        return pts;
    grid = std::max<int>(grid, static_cast<int>(64 * degree));
    const double two_pi = 2 * std::numbers::pi;
    const double h = two_pi / grid;
    auto d1 = [&](double t) { return series_real(s, t, 1); };
    auto d2 = [&](double t) { return series_real(s, t, 2); };
    double prev = d1(0);
    for (int i = 0; i < grid; ++i) {
        const double a = i * h, b = (i + 1) * h;
        const double next = d1(b);
        const bool hit_a = prev == 0;
        const bool change = (prev < 0 && next > 0) || (prev > 0 && next < 0);
        if (hit_a || change) {
            double t = a;
            if (change) {
                double lo = a, hi = b, flo = prev;
                t = (a + b) / 2;
                for (int it = 0; it < 100; ++it) {
                    const double ft = d1(t);
                    if (ft == 0)
                        break;
                    ((ft < 0) == (flo < 0) ? lo : hi) = t;
                    if ((ft < 0) == (flo < 0))
                        flo = ft;
                    const double dd = d2(t);
                    double nt = dd != 0 ? t - ft / dd : lo - 1;
                    if (!(nt > lo && nt < hi))
                        nt = (lo + hi) / 2;
                    if (std::abs(nt - t) <= 1e-15 * two_pi) {
                        t = nt;
                        break;
                    }
                    t = nt;
                }
            }
            const double curv = d2(t);
            const double tol = 1e-9 * std::max(1.0, static_cast<double>(degree * degree));
            pts.push_back({t, series_real(s, t, 0), curv < -tol ? "max" : (curv > tol ? "min" : "degenerate")});
        }
        prev = next;
    }
    return pts;
}

} // namespace detail

/// First-order standard form along the resonance of rot.frame().k.
inline StandardFormData standard_form(const RotatedModel& rot, const TrigPotential& f, std::optional<Vec> yhat0, double eps,
                                      int threads = 1)
{
    if (!(eps >= 0 && eps <= 1))
        throw ParameterError("eps must lie in [0, 1]");
    StandardFormData out;
    out.k = rot.frame().k;
    out.eps = eps;
    out.yhat0 = yhat0 ? *yhat0 : cube_decomposition(rot, threads).centroid();
    out.eta0 = solve_eta(rot, 0, out.yhat0).eta;
    out.m_k = curvature_at(rot, out.yhat0);
    out.f1 = fast_angle_average(f, rot.frame());
    out.f1_real = f.is_real();
    for (const auto& [j, c] : out.f1)
        out.G0[j] = c / out.m_k;

    out.degenerate = std::none_of(out.f1.begin(), out.f1.end(), [](const auto& e) { return e.first != 0; });
    if (out.degenerate || !out.f1_real)
        return out;
    out.critical_points = detail::trig_critical_points(out.G0);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& p : out.critical_points) {
        lo = std::min(lo, p.value * out.m_k);
        hi = std::max(hi, p.value * out.m_k);
    }
    out.pendulum = PendulumEnergies{eps * lo, eps * hi, eps * hi};
    return out;
}

} // namespace resokam
