#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "resokam/domain.hpp"
#include "resokam/errors.hpp"
#include "resokam/lattice.hpp"
#include "resokam/model.hpp"
#include "resokam/parallel.hpp"
#include "resokam/rng.hpp"

namespace resokam {

/// Membership of an action point in the covering {R0, R1k, R2}.
struct ZoneLabel {
    bool in_r0 = false;
    std::vector<ResonanceVector> simple_resonances; ///< every k with y in R1k
    bool in_r2 = false;

    bool in_r1() const { return !simple_resonances.empty(); }
};

/// Thresholds closer than this to a boundary are resolved by the non-strict
/// inequality.
inline constexpr double threshold_tolerance = 1e-12;

/// Above this many high modes the exhaustive l-test gets slow; reported as a warning.
inline constexpr std::size_t high_mode_warning = 1'000'000;

/// Precomputed lattice data for classifying many points of one (model, params).
class Classifier {
public:
    Classifier(const ConvexModel& model, const CoveringParams& params) : model_(&model), params_(params)
    {
        const int n = model.dim;
        low_ = enumerate_generators(n, params.K0);
        high_ = enumerate_generators(n, params.K);
        if (high_.size() > high_mode_warning)
            warnings_.push_back("|G^n_K| = " + std::to_string(high_.size()) + " exceeds 1e6; classification is slow");
        high_mat_.resize(static_cast<Eigen::Index>(high_.size()), n);
        for (std::size_t i = 0; i < high_.size(); ++i)
            for (int j = 0; j < n; ++j)
                high_mat_(static_cast<Eigen::Index>(i), j) = static_cast<double>(high_[i][j]);
        for (const auto& k : low_) {
            LowMode lm;
            lm.k = Vec(n);
            for (int j = 0; j < n; ++j)
                lm.k[j] = static_cast<double>(k[j]);
            lm.norm_sq = lm.k.squaredNorm();
            lm.ell_threshold = 3 * params.alpha * std::pow(params.K, n + 3) / std::sqrt(lm.norm_sq);
            lm.self_index = static_cast<std::size_t>(std::lower_bound(high_.begin(), high_.end(), k) - high_.begin());
            modes_.push_back(lm);
        }
        r0_threshold_ = params.alpha / (2 * params.C);
        r1_threshold_ = params.alpha / params.C;
    }

    const ConvexModel& model() const { return *model_; }
    const CoveringParams& params() const { return params_; }
    const std::vector<ResonanceVector>& low_modes() const { return low_; }
    const std::vector<ResonanceVector>& high_modes() const { return high_; }
    const std::vector<std::string>& warnings() const { return warnings_; }
    double r0_threshold() const { return r0_threshold_; }
    double r1_threshold() const { return r1_threshold_; }
    double ell_threshold(std::size_t low_index) const { return modes_[low_index].ell_threshold; }

    ZoneLabel classify(const Vec& y) const
    {
        if (!model_->domain.contains(y, threshold_tolerance))
            throw DomainError("classify: y lies outside B");
        return classify_frequency(model_->omega(y));
    }

    /// Label from the frequency vector omega(y) alone.
    ZoneLabel classify_frequency(const Vec& w) const
    {
        ZoneLabel z;
        z.in_r0 = true;
        for (std::size_t i = 0; i < modes_.size(); ++i) {
            const LowMode& lm = modes_[i];
            const double wk = std::abs(w.dot(lm.k));
            if (wk < r0_threshold_ - threshold_tolerance)
                z.in_r0 = false;
            if (wk <= r1_threshold_ + threshold_tolerance && passes_ell_test(w, lm))
                z.simple_resonances.push_back(low_[i]);
        }
        z.in_r2 = !z.in_r0 && z.simple_resonances.empty();
        return z;
    }

    /// min over l in G^n_K \ Zk of |proj_k^perp w . l|, with its minimiser.
    std::pair<double, std::size_t> min_ell(const Vec& w, std::size_t low_index) const
    {
        const LowMode& lm = modes_[low_index];
        const Vec p = w - (w.dot(lm.k) / lm.norm_sq) * lm.k;
        const Vec vals = (high_mat_ * p).cwiseAbs();
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = high_.size();
        for (Eigen::Index i = 0; i < vals.size(); ++i) {
            if (static_cast<std::size_t>(i) == lm.self_index)
                continue;
            if (vals[i] < best) {
                best = vals[i];
                arg = static_cast<std::size_t>(i);
            }
        }
        return {best, arg};
    }

private:
    struct LowMode {
        Vec k;
        double norm_sq = 0;
        double ell_threshold = 0;
        std::size_t self_index = 0; ///< position of k inside high_
    };

    bool passes_ell_test(const Vec& w, const LowMode& lm) const
    {
        const Vec p = w - (w.dot(lm.k) / lm.norm_sq) * lm.k;
        const Vec vals = high_mat_ * p;
        const double thr = lm.ell_threshold - threshold_tolerance;
        for (Eigen::Index i = 0; i < vals.size(); ++i)
            if (static_cast<std::size_t>(i) != lm.self_index && std::abs(vals[i]) < thr)
                return false;
        return true;
    }

    const ConvexModel* model_;
    CoveringParams params_;
    std::vector<ResonanceVector> low_, high_;
    Mat high_mat_;
    std::vector<LowMode> modes_;
    std::vector<std::string> warnings_;
    double r0_threshold_ = 0, r1_threshold_ = 0;
};

inline ZoneLabel classify(const ConvexModel& model, const CoveringParams& params, const Vec& y)
{
    return Classifier(model, params).classify(y);
}

// ------ analytic bound on meas(R2) ------ //

struct PairTerm {
    ResonanceVector k;
    ResonanceVector l;
    double bound = 0;
};

struct R2Bound {
    double total = 0;
    std::vector<PairTerm> terms;
};

/// Sum over k in G^n_K0, l in G^n_K \ Zk of the rectangle bound
/// Lbar^n 3 2^n M^(n-2) alpha^2 K^(n+3) / |k| on the pulled-back measure of R2_kl.
inline R2Bound analytic_r2_bound(const ConvexModel& model, const CoveringParams& params)
{
    const int n = model.dim;
    const auto low = enumerate_generators(n, params.K0);
    const auto high = enumerate_generators(n, params.K);
    const double prefactor = std::pow(model.constants.Lbar, n) * 3 * std::pow(2.0, n) * std::pow(model.constants.M, n - 2) *
                             params.alpha * params.alpha * std::pow(params.K, n + 3);
    R2Bound out;
    for (const auto& k : low) {
        const double term = prefactor / k.norm2();
        for (const auto& l : high) {
            if (l == k)
                continue;
            out.terms.push_back({k, l, term});
            out.total += term;
        }
    }
    return out;
}

// ------ Monte Carlo zone measures ------ //

struct MeasureReport {
    std::uint64_t samples = 0;
    std::uint64_t seed = 0;
    double domain_volume = 0;
    std::map<std::string, std::uint64_t> counts;   ///< R0, R1, R2, R0&R1, R1[k]
    std::map<std::string, double> fractions;
    std::map<std::string, double> stderrs;          ///< binomial standard errors
    R2Bound analytic;
    std::vector<std::string> warnings;

    double fraction(const std::string& zone) const { return fractions.at(zone); }
    double standard_error(const std::string& zone) const { return stderrs.at(zone); }
};

/// Samples per independent substream; fixed so results do not depend on threads.
inline constexpr std::uint64_t measure_shard_size = 1u << 16;

inline MeasureReport estimate_measures(const ConvexModel& model, const CoveringParams& params, std::uint64_t samples,
                                       std::uint64_t seed, int threads = 1)
{
    if (samples < 1)
        throw DomainError("estimate_measures: samples must be >= 1");
    const Classifier cls(model, params);
    const auto& low = cls.low_modes();
    const std::size_t shards = static_cast<std::size_t>((samples + measure_shard_size - 1) / measure_shard_size);

    struct Tally {
        std::uint64_t r0 = 0, r1 = 0, r2 = 0, both = 0;
        std::vector<std::uint64_t> per_k;
    };
    std::vector<Tally> tallies(shards);
    parallel_for(shards, threads, [&](std::size_t s) {
        Rng rng(seed, "measure", s);
        Tally& t = tallies[s];
        t.per_k.assign(low.size(), 0);
        const std::uint64_t begin = s * measure_shard_size;
        const std::uint64_t end = std::min<std::uint64_t>(samples, begin + measure_shard_size);
        for (std::uint64_t i = begin; i < end; ++i) {
            const ZoneLabel z = cls.classify_frequency(model.omega(model.domain.sample(rng)));
            t.r0 += z.in_r0;
            t.r1 += z.in_r1();
            t.r2 += z.in_r2;
            t.both += z.in_r0 && z.in_r1();
            for (const auto& k : z.simple_resonances)
                ++t.per_k[static_cast<std::size_t>(std::lower_bound(low.begin(), low.end(), k) - low.begin())];
        }
    });

    MeasureReport rep;
    rep.samples = samples;
    rep.seed = seed;
    rep.domain_volume = model.domain.volume();
    std::vector<std::uint64_t> per_k(low.size(), 0);
    std::uint64_t r0 = 0, r1 = 0, both = 0;
    for (const auto& t : tallies) {
        r0 += t.r0;
        r1 += t.r1;
        both += t.both;
        for (std::size_t i = 0; i < low.size(); ++i)
            per_k[i] += t.per_k[i];
    }
    const std::uint64_t covered = r0 + r1 - both; // R0 union R1
    rep.counts["R0"] = r0;
    rep.counts["R1"] = r1;
    rep.counts["R0&R1"] = both;
    rep.counts["R2"] = samples - covered;
    for (std::size_t i = 0; i < low.size(); ++i)
        rep.counts["R1" + low[i].str()] = per_k[i];
    const double N = static_cast<double>(samples);
    for (const auto& [zone, count] : rep.counts) {
        const double p = static_cast<double>(count) / N;
        rep.fractions[zone] = p;
        rep.stderrs[zone] = std::sqrt(p * (1 - p) / N);
    }
    rep.fractions["R2"] = 1 - static_cast<double>(covered) / N;
    rep.analytic = analytic_r2_bound(model, params);
    rep.warnings = cls.warnings();
    return rep;
}

// ------ 2-D label scans ------ //

enum class ZoneCode { outside = -1, r2 = 0, r1 = 1, r0 = 2, r0_and_r1 = 3 };

inline const char* zone_name(ZoneCode c)
{
    switch (c) {
    case ZoneCode::outside:
        return "outside";
    case ZoneCode::r2:
        return "R2";
    case ZoneCode::r1:
        return "R1";
    case ZoneCode::r0:
        return "R0";
    case ZoneCode::r0_and_r1:
        return "R0&R1";
    }
    return "?";
}

struct ZoneScan {
    int axis_i = 0, axis_j = 1;
    int grid = 0;
    std::vector<double> xs, ys;  ///< cell-centre coordinates along the two axes
    std::vector<ZoneCode> codes; ///< row-major, index = iy * grid + ix
};

/// Labels on a grid x grid lattice of cell centres over the bounding box of B
/// in the plane of (axis_i, axis_j); other coordinates are fixed at `base`.
inline ZoneScan scan2d(const Classifier& cls, int axis_i, int axis_j, int grid, const Vec& base, int threads = 1)
{
    const ConvexModel& m = cls.model();
    if (axis_i < 0 || axis_j < 0 || axis_i >= m.dim || axis_j >= m.dim || axis_i == axis_j)
        throw DomainError("scan2d: invalid axis pair");
    if (grid < 1)
        throw DomainError("scan2d: grid must be >= 1");
    const auto [lo, hi] = m.domain.bounding_box();
    ZoneScan scan;
    scan.axis_i = axis_i;
    scan.axis_j = axis_j;
    scan.grid = grid;
    for (int g = 0; g < grid; ++g) {
        scan.xs.push_back(lo[axis_i] + (hi[axis_i] - lo[axis_i]) * (g + 0.5) / grid);
        scan.ys.push_back(lo[axis_j] + (hi[axis_j] - lo[axis_j]) * (g + 0.5) / grid);
    }
    scan.codes.assign(static_cast<std::size_t>(grid) * grid, ZoneCode::outside);
    parallel_for(static_cast<std::size_t>(grid), threads, [&](std::size_t iy) {
        Vec y = base;
        y[axis_j] = scan.ys[iy];
        for (int ix = 0; ix < grid; ++ix) {
            y[axis_i] = scan.xs[static_cast<std::size_t>(ix)];
            if (!m.domain.contains(y))
                continue;
            const ZoneLabel z = cls.classify_frequency(m.omega(y));
            ZoneCode c = ZoneCode::r2;
            if (z.in_r0 && z.in_r1())
                c = ZoneCode::r0_and_r1;
            else if (z.in_r0)
                c = ZoneCode::r0;
            else if (z.in_r1())
                c = ZoneCode::r1;
            scan.codes[iy * static_cast<std::size_t>(grid) + static_cast<std::size_t>(ix)] = c;
        }
    });
    return scan;
}

} // namespace resokam
