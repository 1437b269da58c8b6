#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "resokam/errors.hpp"

namespace resokam {

using IVec = std::vector<std::int64_t>;

// ------ checked integer arithmetic ------ //

namespace detail {

inline std::int64_t checked_mul(std::int64_t a, std::int64_t b)
{
    std::int64_t out;
    if (__builtin_mul_overflow(a, b, &out))
        throw OverflowError("64-bit overflow in lattice multiplication");
    return out;
}

inline std::int64_t checked_add(std::int64_t a, std::int64_t b)
{
    std::int64_t out;
    if (__builtin_add_overflow(a, b, &out))
        throw OverflowError("64-bit overflow in lattice addition");
    return out;
}

inline std::int64_t narrow(__int128 v)
{
    if (v > std::numeric_limits<std::int64_t>::max() || v < std::numeric_limits<std::int64_t>::min())
        throw OverflowError("lattice value does not fit in 64 bits");
    return static_cast<std::int64_t>(v);
}

inline std::int64_t iabs(std::int64_t v)
{
    if (v == std::numeric_limits<std::int64_t>::min())
        throw OverflowError("|INT64_MIN| is not representable");
    return v < 0 ? -v : v;
}

/// Extended Euclid: returns (g, x, y) with a x + b y = g = gcd(a, b) >= 0.
/// For a, b != 0 the coefficients satisfy |x| <= |b|, |y| <= |a|.
struct Bezout {
    std::int64_t g, x, y;
};

inline Bezout extended_gcd(std::int64_t a, std::int64_t b)
{
    std::int64_t old_r = a, r = b;
    std::int64_t old_s = 1, s = 0;
    std::int64_t old_t = 0, t = 1;
    while (r != 0) {
        const std::int64_t q = old_r / r;
        std::int64_t tmp = old_r - q * r;
        old_r = r;
        r = tmp;
        tmp = old_s - q * s;
        old_s = s;
        s = tmp;
        tmp = old_t - q * t;
        old_t = t;
        t = tmp;
    }
    if (old_r < 0)
        return {-old_r, -old_s, -old_t};
    return {old_r, old_s, old_t};
}

} // namespace detail

inline std::int64_t gcd_of(const IVec& v)
{
    std::int64_t g = 0;
    for (auto x : v)
        g = std::gcd(g, detail::iabs(x));
    return g;
}

// ------ integer matrices ------ //

/// Small dense row-major integer matrix.
class IntMatrix {
public:
    IntMatrix() = default;
    IntMatrix(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows * cols), 0) {}

    static IntMatrix identity(int n)
    {
        IntMatrix m(n, n);
        for (int i = 0; i < n; ++i)
            m(i, i) = 1;
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::int64_t& operator()(int i, int j) { return data_[static_cast<std::size_t>(i * cols_ + j)]; }
    std::int64_t operator()(int i, int j) const { return data_[static_cast<std::size_t>(i * cols_ + j)]; }

    IVec row(int i) const { return IVec(data_.begin() + i * cols_, data_.begin() + (i + 1) * cols_); }

    IntMatrix transposed() const
    {
        IntMatrix t(cols_, rows_);
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j)
                t(j, i) = (*this)(i, j);
        return t;
    }

    /// max_ij |m_ij|; with `from_row` the leading rows are skipped.
    std::int64_t max_abs(int from_row = 0) const
    {
        std::int64_t m = 0;
        for (int i = from_row; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j)
                m = std::max(m, detail::iabs((*this)(i, j)));
        return m;
    }

    IntMatrix operator*(const IntMatrix& o) const
    {
        IntMatrix p(rows_, o.cols_);
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < o.cols_; ++j) {
                std::int64_t acc = 0;
                for (int l = 0; l < cols_; ++l)
                    acc = detail::checked_add(acc, detail::checked_mul((*this)(i, l), o(l, j)));
                p(i, j) = acc;
            }
        return p;
    }

    /// m v with checked arithmetic.
    IVec apply(const IVec& v) const
    {
        IVec out(static_cast<std::size_t>(rows_), 0);
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j)
                out[static_cast<std::size_t>(i)] = detail::checked_add(out[static_cast<std::size_t>(i)], detail::checked_mul((*this)(i, j), v[static_cast<std::size_t>(j)]));
        return out;
    }

    bool operator==(const IntMatrix& o) const = default;

    std::vector<std::vector<std::int64_t>> to_rows() const
    {
        std::vector<std::vector<std::int64_t>> out;
        for (int i = 0; i < rows_; ++i)
            out.push_back(row(i));
        return out;
    }

private:
    int rows_ = 0, cols_ = 0;
    std::vector<std::int64_t> data_;
};

/// Exact determinant by fraction-free (Bareiss) elimination.
inline std::int64_t determinant(const IntMatrix& m)
{
    const int n = m.rows();
    if (n != m.cols())
        throw DomainError("determinant of a non-square matrix");
    if (n == 0)
        return 1;
    std::vector<std::vector<__int128>> a(static_cast<std::size_t>(n), std::vector<__int128>(static_cast<std::size_t>(n)));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            a[i][j] = m(i, j);
    int sign = 1;
    __int128 prev = 1;
    for (int k = 0; k < n - 1; ++k) {
        if (a[k][k] == 0) {
            int p = k + 1;
            while (p < n && a[p][k] == 0)
                ++p;
            if (p == n)
                return 0;
            std::swap(a[k], a[p]);
            sign = -sign;
        }
        for (int i = k + 1; i < n; ++i) {
            for (int j = k + 1; j < n; ++j) {
                __int128 lhs, rhs, diff;
                if (__builtin_mul_overflow(a[i][j], a[k][k], &lhs) || __builtin_mul_overflow(a[i][k], a[k][j], &rhs) ||
                    __builtin_sub_overflow(lhs, rhs, &diff))
                    throw OverflowError("overflow in Bareiss elimination");
                a[i][j] = diff / prev;
                detail::narrow(a[i][j]); // every intermediate is a minor of m
            }
        }
        prev = a[k][k];
    }
    return detail::narrow(sign * a[n - 1][n - 1]);
}

/// Adjugate; equals the inverse when det = 1.
inline IntMatrix adjugate(const IntMatrix& m)
{
    const int n = m.rows();
    IntMatrix adj(n, n);
    if (n == 1) {
        adj(0, 0) = 1;
        return adj;
    }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            IntMatrix minor(n - 1, n - 1);
            for (int r = 0, rr = 0; r < n; ++r) {
                if (r == i)
                    continue;
                for (int c = 0, cc = 0; c < n; ++c) {
                    if (c == j)
                        continue;
                    minor(rr, cc++) = m(r, c);
                }
                ++rr;
            }
            const std::int64_t cof = determinant(minor);
            adj(j, i) = ((i + j) % 2 == 0) ? cof : -cof;
        }
    return adj;
}

// ------ resonance vectors ------ //

/// A primitive integer vector with positive first non-zero entry, i.e. one
/// generator per rational direction of Z^n.
class ResonanceVector {
public:
    ResonanceVector() : ResonanceVector(IVec{1}) {}
    explicit ResonanceVector(IVec entries) : entries_(std::move(entries))
    {
        if (entries_.empty())
            throw DomainError("resonance vector must have at least one entry");
        if (gcd_of(entries_) != 1)
            throw DomainError("resonance vector entries are not coprime");
        const auto first = std::find_if(entries_.begin(), entries_.end(), [](auto v) { return v != 0; });
        if (*first < 0)
            throw DomainError("first non-zero entry of a resonance vector must be positive");
        double sq = 0;
        for (auto v : entries_) {
            norm1_ = detail::checked_add(norm1_, detail::iabs(v));
            norm_inf_ = std::max(norm_inf_, detail::iabs(v));
            sq += static_cast<double>(v) * static_cast<double>(v);
        }
        norm2_ = std::sqrt(sq);
    }

    int dim() const { return static_cast<int>(entries_.size()); }
    const IVec& entries() const { return entries_; }
    std::int64_t operator[](int i) const { return entries_[static_cast<std::size_t>(i)]; }
    std::int64_t norm1() const { return norm1_; }
    std::int64_t norm_inf() const { return norm_inf_; }
    double norm2() const { return norm2_; }

    bool operator==(const ResonanceVector& o) const { return entries_ == o.entries_; }
    bool operator<(const ResonanceVector& o) const { return entries_ < o.entries_; }

    std::string str() const
    {
        std::ostringstream os;
        os << '(';
        for (std::size_t i = 0; i < entries_.size(); ++i)
            os << (i ? "," : "") << entries_[i];
        os << ')';
        return os.str();
    }

private:
    IVec entries_;
    std::int64_t norm1_ = 0;
    std::int64_t norm_inf_ = 0;
    double norm2_ = 0;
};

/// Canonical representative of the line through v (v != 0): divides by the
/// gcd and flips the sign so the first non-zero entry is positive.
inline ResonanceVector primitive_direction(IVec v)
{
    const std::int64_t g = gcd_of(v);
    if (g == 0)
        throw DomainError("zero vector has no direction");
    for (auto& x : v)
        x /= g;
    const auto first = std::find_if(v.begin(), v.end(), [](auto x) { return x != 0; });
    if (*first < 0)
        for (auto& x : v)
            x = -x;
    return ResonanceVector(std::move(v));
}

inline double weighted_norm(const IVec& k, const std::vector<double>& s)
{
    if (k.size() != s.size())
        throw DomainError("weighted_norm: dimension mismatch");
    double acc = 0;
    for (std::size_t i = 0; i < k.size(); ++i) {
        if (!(s[i] > 0))
            throw DomainError("weighted_norm: widths must be positive");
        acc += s[i] * static_cast<double>(detail::iabs(k[i]));
    }
    return acc;
}

enum class NormKind { one, weighted };

/// Every primitive k with positive first non-zero entry and |k|_1 <= K
/// (or |k|_s <= K), in lexicographic order of the entries.
inline std::vector<ResonanceVector> enumerate_generators(int n, double K, NormKind norm = NormKind::one,
                                                         const std::vector<double>& s = {})
{
    if (n < 1)
        throw DomainError("enumerate_generators: n must be >= 1");
    if (!(K >= 1))
        throw DomainError("enumerate_generators: K must be >= 1");
    std::vector<double> w(static_cast<std::size_t>(n), 1.0);
    if (norm == NormKind::weighted) {
        if (static_cast<int>(s.size()) != n)
            throw DomainError("enumerate_generators: width vector has wrong dimension");
        for (double si : s)
            if (!(si > 0))
                throw DomainError("enumerate_generators: widths must be positive");
        w = s;
    }
    // weighted budgets are real; the slack absorbs rounding in the partial sums
    const double slack = norm == NormKind::weighted ? 1e-12 * K : 0.0;

    std::vector<ResonanceVector> out;
    IVec cur(static_cast<std::size_t>(n), 0);
    auto rec = [&](auto&& self, int i, double used, std::int64_t g, bool leading_zero) -> void {
        if (i == n) {
            if (!leading_zero && g == 1)
                out.emplace_back(cur);
            return;
        }
        const double remaining = K - used + slack;
        const auto bound = static_cast<std::int64_t>(std::floor(remaining / w[static_cast<std::size_t>(i)]));
        const std::int64_t lo = leading_zero ? 0 : -bound;
        for (std::int64_t v = lo; v <= bound; ++v) {
            cur[static_cast<std::size_t>(i)] = v;
            self(self, i + 1, used + w[static_cast<std::size_t>(i)] * static_cast<double>(v < 0 ? -v : v),
                 std::gcd(g, v < 0 ? -v : v), leading_zero && v == 0);
        }
        cur[static_cast<std::size_t>(i)] = 0;
    };
    rec(rec, 0, 0.0, 0, true);
    return out;
}

// ------ unimodular frames ------ //

/// Model constants entering the frame radii.
struct FrameConstants {
    double gamma = 1;
    double L = 1;
    double r = 1;
    std::optional<double> r_tilde; ///< defaults to r/(n |k|_inf)
};

/// Outcome of the exact integer checks on a candidate completion.
struct FrameCertificate {
    bool first_row_ok = false;
    bool det_ok = false;
    bool inverse_ok = false;
    bool hat_bound_ok = false;    ///< |A without first row|_inf <= |k|_inf
    bool norm_equal_ok = false;   ///< |A|_inf == |k|_inf
    bool inverse_bound_ok = false; ///< |A^-1|_inf <= (n-1)^((n-1)/2) |k|_inf^(n-1)
    std::int64_t det = 0;

    bool ok() const { return first_row_ok && det_ok && inverse_ok && hat_bound_ok && norm_equal_ok && inverse_bound_ok; }

    std::string first_failure() const
    {
        if (!first_row_ok)
            return "first row of A differs from k";
        if (!det_ok)
            return "det(A) != 1";
        if (!inverse_ok)
            return "A * Ainv != I";
        if (!hat_bound_ok)
            return "|Ahat|_inf > |k|_inf";
        if (!norm_equal_ok)
            return "|A|_inf != |k|_inf";
        if (!inverse_bound_ok)
            return "|Ainv|_inf > (n-1)^((n-1)/2) |k|_inf^(n-1)";
        return "";
    }
};

/// An SL(n, Z) matrix with first row k, its inverse, and the radii derived from it.
struct UnimodularFrame {
    ResonanceVector k;
    IntMatrix A;
    IntMatrix Ainv;
    FrameCertificate certificate;
    double r_tilde_k = 0;   ///< r / (n |k|_inf)
    double r_tilde = 0;     ///< chosen radius, 0 < r_tilde <= r_tilde_k
    double t_k = 0;         ///< gamma |k| / (2 L)
    double t_tilde_k = 0;   ///< min(1, t_k)
    double frak_r_k = 0;    ///< cube edge, t_tilde r / (8 n^(3/2) |k|)
    double frak_r_tilde = 0; ///< bracket half-width 2 sqrt(n) L frak_r / (gamma |k|)
    double varpi0_k = 0;    ///< sqrt(n) L |k| frak_r
    double r_hat_k = 0;     ///< t_tilde^2 r_tilde / (2^9 n)

    int dim() const { return k.dim(); }
};

inline FrameCertificate certify_completion(const ResonanceVector& k, const IntMatrix& A, IntMatrix* inverse_out = nullptr)
{
    const int n = k.dim();
    FrameCertificate c;
    if (A.rows() != n || A.cols() != n)
        throw DomainError("completion matrix has the wrong shape");
    c.first_row_ok = A.row(0) == k.entries();
    c.det = determinant(A);
    c.det_ok = c.det == 1;
    const std::int64_t kinf = k.norm_inf();
    c.hat_bound_ok = A.max_abs(1) <= kinf;
    c.norm_equal_ok = A.max_abs(0) == kinf;
    if (!c.det_ok)
        return c;
    IntMatrix inv = adjugate(A);
    c.inverse_ok = (A * inv) == IntMatrix::identity(n) && (inv * A) == IntMatrix::identity(n);
    // compare squares so the half-integer exponent stays exact
    std::int64_t kpow = 1;
    for (int i = 0; i < n - 1; ++i)
        kpow = detail::checked_mul(kpow, kinf);
    __int128 rhs = 1;
    for (int i = 0; i < n - 1; ++i)
        if (__builtin_mul_overflow(rhs, static_cast<__int128>(n - 1), &rhs))
            throw OverflowError("inverse bound overflows");
    if (__builtin_mul_overflow(rhs, static_cast<__int128>(kpow) * kpow, &rhs))
        throw OverflowError("inverse bound overflows");
    const __int128 lhs = static_cast<__int128>(inv.max_abs()) * inv.max_abs();
    c.inverse_bound_ok = lhs <= rhs;
    if (inverse_out)
        *inverse_out = std::move(inv);
    return c;
}

namespace detail {

/// Completion of a primitive (not necessarily sign-normalized) vector by
/// induction on the leading n-1 entries: with g = gcd(k_1..k_{n-1}),
/// k' = (k_1..k_{n-1})/g completed to A', and g x + k_n y = 1,
///
///     A = [ g k'        k_n ]
///         [ rows 2.. of A'  0 ]
///         [ -y k'        x  ]
///
/// has det A = det A' (g x + k_n y) = 1 and entries bounded by |k|_inf.
inline IntMatrix complete_primitive(const IVec& k)
{
    const int n = static_cast<int>(k.size());
    IntMatrix A(n, n);
    if (n == 1) {
        if (k[0] != 1)
            throw DomainError("a 1-vector completes to SL(1) only when it equals (1)");
        A(0, 0) = 1;
        return A;
    }
    if (n == 2) {
        const auto [g, x, y] = extended_gcd(k[0], k[1]);
        if (g != 1)
            throw DomainError("vector is not primitive");
        A(0, 0) = k[0];
        A(0, 1) = k[1];
        A(1, 0) = -y;
        A(1, 1) = x;
        return A;
    }
    const IVec head(k.begin(), k.end() - 1);
    const std::int64_t g = gcd_of(head);
    const std::int64_t kn = k.back();
    if (g == 0) {
        // k = (0, ..., 0, ±1): cyclic shift of the identity, one row negated
        // to fix the sign of the permutation
        if (iabs(kn) != 1)
            throw DomainError("vector is not primitive");
        A(0, n - 1) = kn;
        for (int i = 1; i < n; ++i)
            A(i, i - 1) = 1;
        if (determinant(A) != 1)
            for (int j = 0; j < n; ++j)
                A(n - 1, j) = -A(n - 1, j);
        return A;
    }
    IVec reduced(head);
    for (auto& v : reduced)
        v /= g;
    const IntMatrix sub = complete_primitive(reduced);
    const auto [d, x, y] = extended_gcd(g, kn);
    if (d != 1)
        throw DomainError("vector is not primitive");
    for (int j = 0; j < n - 1; ++j) {
        A(0, j) = k[static_cast<std::size_t>(j)];
        A(n - 1, j) = checked_mul(-y, reduced[static_cast<std::size_t>(j)]);
    }
    A(0, n - 1) = kn;
    A(n - 1, n - 1) = x;
    for (int i = 1; i < n - 1; ++i)
        for (int j = 0; j < n - 1; ++j)
            A(i, j) = sub(i, j);
    return A;
}

} // namespace detail

/// Bounded exhaustive search over the trailing rows with entries in
/// [-|k|_inf, |k|_inf], in lexicographic order; first certified hit wins.
/// Intended for n <= 3.
inline std::optional<IntMatrix> exhaustive_completion(const ResonanceVector& k)
{
    const int n = k.dim();
    const std::int64_t b = k.norm_inf();
    IntMatrix A(n, n);
    for (int j = 0; j < n; ++j)
        A(0, j) = k[j];
    const int free = (n - 1) * n;
    std::vector<std::int64_t> digits(static_cast<std::size_t>(free), -b);
    while (true) {
        for (int t = 0; t < free; ++t)
            A(1 + t / n, t % n) = digits[static_cast<std::size_t>(t)];
        if (determinant(A) == 1 && certify_completion(k, A).ok())
            return A;
        int t = free - 1;
        while (t >= 0 && digits[static_cast<std::size_t>(t)] == b)
            digits[static_cast<std::size_t>(t--)] = -b;
        if (t < 0)
            return std::nullopt;
        ++digits[static_cast<std::size_t>(t)];
    }
}

/// Fills the real-valued radii of a certified frame.
inline void assign_frame_radii(UnimodularFrame& f, const FrameConstants& c)
{
    if (!(c.gamma > 0) || !(c.L > 0) || !(c.r > 0))
        throw DomainError("frame constants gamma, L, r must be positive");
    const double n = f.dim();
    const double knorm = f.k.norm2();
    f.r_tilde_k = c.r / (n * static_cast<double>(f.k.norm_inf()));
    f.r_tilde = c.r_tilde.value_or(f.r_tilde_k);
    if (!(f.r_tilde > 0) || f.r_tilde > f.r_tilde_k)
        throw DomainError("r_tilde must satisfy 0 < r_tilde <= r/(n |k|_inf)");
    f.t_k = c.gamma * knorm / (2 * c.L);
    f.t_tilde_k = std::min(1.0, f.t_k);
    f.frak_r_k = f.t_tilde_k * c.r / (8 * std::pow(n, 1.5) * knorm);
    f.frak_r_tilde = 2 * std::sqrt(n) * c.L / (c.gamma * knorm) * f.frak_r_k;
    f.varpi0_k = std::sqrt(n) * c.L * knorm * f.frak_r_k;
    f.r_hat_k = f.t_tilde_k * f.t_tilde_k * f.r_tilde / (512 * n);
}

/// Certifies a caller-supplied completion and wraps it as a frame.
inline UnimodularFrame make_frame(const ResonanceVector& k, const IntMatrix& A, const FrameConstants& c)
{
    IntMatrix inv;
    const FrameCertificate cert = certify_completion(k, A, &inv);
    if (!cert.ok())
        throw CertificationError("frame for k = " + k.str() + " fails: " + cert.first_failure());
    UnimodularFrame f{k, A, inv, cert};
    assign_frame_radii(f, c);
    return f;
}

/// Deterministic SL(n, Z) completion of k with certified norm bounds.
inline UnimodularFrame unimodular_completion(const ResonanceVector& k, const FrameConstants& c)
{
    IntMatrix A = detail::complete_primitive(k.entries());
    if (!certify_completion(k, A).ok()) {
        std::optional<IntMatrix> alt;
        if (k.dim() <= 3)
            alt = exhaustive_completion(k);
        if (!alt)
            throw CertificationError("frame for k = " + k.str() + " fails: " + certify_completion(k, A).first_failure());
        A = *alt;
    }
    return make_frame(k, A, c);
}

} // namespace resokam
