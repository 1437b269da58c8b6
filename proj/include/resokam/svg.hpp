#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "resokam/covering.hpp"
#include "resokam/errors.hpp"
#include "resokam/resgraph.hpp"
#include "resokam/secular.hpp"

namespace resokam::svg {

class UnsupportedPlot : public DomainError {
public:
    using DomainError::DomainError;
};

namespace detail {

inline std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

inline std::string esc(const std::string& s)
{
    std::string out;
    for (char c : s) {
        if (c == '&')
            out += "&amp;";
        else if (c == '<')
            out += "&lt;";
        else if (c == '>')
            out += "&gt;";
        else
            out += c;
    }
    return out;
}

/// Maps data coordinates into a w x h plot area with a fixed margin.
struct Frame {
    double x0, x1, y0, y1;
    double w = 480, h = 360, margin = 50;

    double px(double x) const { return margin + (x - x0) / (x1 - x0) * w; }
    double py(double y) const { return margin + h - (y - y0) / (y1 - y0) * h; }

    std::string open(const std::string& title, const std::string& xlabel, const std::string& ylabel) const
    {
        std::ostringstream os;
        os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w + 2 * margin) << "\" height=\"" << num(h + 2 * margin)
           << "\">\n";
        os << "<rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        os << "<text x=\"" << num(margin) << "\" y=\"" << num(margin / 2) << "\" font-size=\"14\">" << esc(title) << "</text>\n";
        os << "<rect x=\"" << num(margin) << "\" y=\"" << num(margin) << "\" width=\"" << num(w) << "\" height=\"" << num(h)
           << "\" fill=\"none\" stroke=\"black\"/>\n";
        os << "<text x=\"" << num(margin + w / 2) << "\" y=\"" << num(h + 1.7 * margin) << "\" font-size=\"12\">" << esc(xlabel)
           << "</text>\n";
        os << "<text x=\"8\" y=\"" << num(margin + h / 2) << "\" font-size=\"12\">" << esc(ylabel) << "</text>\n";
        os << "<text x=\"" << num(margin) << "\" y=\"" << num(h + 1.3 * margin) << "\" font-size=\"10\">" << num(x0) << "</text>\n";
        os << "<text x=\"" << num(margin + w - 30) << "\" y=\"" << num(h + 1.3 * margin) << "\" font-size=\"10\">" << num(x1)
           << "</text>\n";
        return os.str();
    }

    std::string polyline(const std::vector<double>& xs, const std::vector<double>& ys, const std::string& colour) const
    {
        std::ostringstream os;
        os << "<polyline fill=\"none\" stroke=\"" << colour << "\" points=\"";
        for (std::size_t i = 0; i < xs.size(); ++i)
            os << (i ? " " : "") << num(px(xs[i])) << "," << num(py(ys[i]));
        os << "\"/>\n";
        return os.str();
    }
};

inline std::pair<double, double> padded_range(double lo, double hi)
{
    if (!(hi > lo)) {
        const double d = std::max(1e-12, std::abs(lo) * 1e-3);
        return {lo - d, hi + d};
    }
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
}

} // namespace detail

inline const char* zone_colour(ZoneCode c)
{
    switch (c) {
    case ZoneCode::r0:
        return "#9ecae1";
    case ZoneCode::r1:
        return "#fdae6b";
    case ZoneCode::r0_and_r1:
        return "#c6dbef";
    case ZoneCode::r2:
        return "#d62728";
    case ZoneCode::outside:
        return "#ffffff";
    }
    return "#000000";
}

/// Zone labels of a 2-D scan, one rectangle per cell.
inline std::string zones2d(const ZoneScan& scan, int dim)
{
    if (dim != 2)
        throw UnsupportedPlot("zones2d plots need a 2-dimensional model");
    if (scan.grid < 1)
        throw UnsupportedPlot("empty scan");
    const double dx = scan.grid > 1 ? scan.xs[1] - scan.xs[0] : 1, dy = scan.grid > 1 ? scan.ys[1] - scan.ys[0] : 1;
    detail::Frame f{scan.xs.front() - dx / 2, scan.xs.back() + dx / 2, scan.ys.front() - dy / 2, scan.ys.back() + dy / 2};
    f.w = f.h = 480;
    std::ostringstream os;
    os << f.open("zones: R0 blue, R1 orange, R0&R1 light blue, R2 red", "y" + std::to_string(scan.axis_i + 1),
                 "y" + std::to_string(scan.axis_j + 1));
    const double cw = f.w / scan.grid, ch = f.h / scan.grid;
    for (int iy = 0; iy < scan.grid; ++iy)
        for (int ix = 0; ix < scan.grid; ++ix) {
            const ZoneCode c = scan.codes[static_cast<std::size_t>(iy * scan.grid + ix)];
            if (c == ZoneCode::outside)
                continue;
            os << "<rect x=\"" << detail::num(f.margin + ix * cw) << "\" y=\"" << detail::num(f.margin + f.h - (iy + 1) * ch)
               << "\" width=\"" << detail::num(cw) << "\" height=\"" << detail::num(ch) << "\" fill=\"" << zone_colour(c)
               << "\"/>\n";
        }
    os << "</svg>\n";
    return os.str();
}

/// eta(varpi, .) over the sampled yhat of a 2-D graph, at the varpi grid
/// point nearest to zero.
inline std::string graph(const ResonanceGraph& g)
{
    if (g.frame.dim() != 2)
        throw UnsupportedPlot("graph plots need n = 2");
    if (g.yhat.empty())
        throw UnsupportedPlot("graph has no sampled columns");
    std::size_t iv = 0;
    for (std::size_t i = 1; i < g.varpi.size(); ++i)
        if (std::abs(g.varpi[i]) < std::abs(g.varpi[iv]))
            iv = i;
    std::vector<std::size_t> order(g.yhat.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return g.yhat[a][0] < g.yhat[b][0]; });
    std::vector<double> xs, ys;
    for (auto i : order) {
        xs.push_back(g.yhat[i][0]);
        ys.push_back(g.eta_at(iv, i));
    }
    const auto [x0, x1] = detail::padded_range(xs.front(), xs.back());
    const auto [y0, y1] = detail::padded_range(*std::min_element(ys.begin(), ys.end()), *std::max_element(ys.begin(), ys.end()));
    detail::Frame f{x0, x1, y0, y1};
    std::ostringstream os;
    os << f.open("resonance graph k = " + g.frame.k.str() + ", varpi = " + detail::num(g.varpi[iv]), "yhat", "eta");
    os << f.polyline(xs, ys, "#1f77b4");
    os << "</svg>\n";
    return os.str();
}

/// G0 over [0, 2 pi] and level sets of m_k p^2 + eps f1(q) through the
/// minimum, the separatrix and above it.
inline std::string g0(const StandardFormData& d, int samples = 512)
{
    if (d.degenerate)
        throw UnsupportedPlot("degenerate resonance: G0 has no pendulum structure");
    const double two_pi = 2 * std::numbers::pi;
    std::vector<double> qs, gs;
    for (int i = 0; i <= samples; ++i) {
        const double q = two_pi * i / samples;
        qs.push_back(q);
        gs.push_back(evaluate(d.G0, q).real());
    }
    const auto [g_lo, g_hi] = detail::padded_range(*std::min_element(gs.begin(), gs.end()), *std::max_element(gs.begin(), gs.end()));
    detail::Frame top{0, two_pi, g_lo, g_hi};
    top.h = 200;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"580\" height=\"640\">\n";
    os << "<rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    auto body = [](const std::string& s) { // drop the nested header and background
        const auto first = s.find('\n');
        const auto second = s.find('\n', first + 1);
        return s.substr(second + 1);
    };
    os << "<g>\n" << body(top.open("G0(q), k = " + d.k.str(), "q", "G0")) << top.polyline(qs, gs, "#1f77b4") << "</g>\n";

    if (d.pendulum && d.m_k > 0) {
        const auto& pe = *d.pendulum;
        const double span = std::max(pe.max - pe.min, 1e-300);
        const double pmax = std::sqrt(1.5 * span / d.m_k);
        detail::Frame bot{0, two_pi, -pmax * 1.05, pmax * 1.05};
        bot.h = 200;
        bot.margin = 50;
        std::string panel = body(bot.open("", "q", "p"));
        os << "<g transform=\"translate(0,300)\">\n" << panel;
        const double levels[] = {pe.min + 0.25 * span, pe.min + 0.6 * span, pe.separatrix, pe.max + 0.4 * span};
        const char* colours[] = {"#2ca02c", "#2ca02c", "#d62728", "#9467bd"};
        for (int l = 0; l < 4; ++l) {
            for (double sign : {1.0, -1.0}) {
                std::vector<double> xs, ys;
                auto flush = [&] {
                    if (xs.size() > 1)
                        os << bot.polyline(xs, ys, colours[l]);
                    xs.clear();
                    ys.clear();
                };
                for (std::size_t i = 0; i < qs.size(); ++i) {
                    const double kinetic = levels[l] - d.eps * gs[i] * d.m_k;
                    if (kinetic < 0) {
                        flush();
                        continue;
                    }
                    xs.push_back(qs[i]);
                    ys.push_back(sign * std::sqrt(kinetic / d.m_k));
                }
                flush();
            }
        }
        os << "</g>\n";
    }
    os << "</svg>\n";
    return os.str();
}

} // namespace resokam::svg
