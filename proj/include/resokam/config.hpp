#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "resokam/errors.hpp"
#include "resokam/model.hpp"

namespace resokam {

using json = nlohmann::ordered_json;

/// Parses the key-value subset used by model and parameter files:
/// `key = value` lines, `[table]` headers, dotted keys, '#' comments.
/// Values are JSON literals (numbers, "strings", true/false, [arrays]) and
/// must fit on one line.
inline json parse_config(std::istream& in, const std::string& origin = "config")
{
    json root = json::object();
    json* table = &root;
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos)
            return std::string();
        const auto b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
    };
    auto split_key = [&](const std::string& dotted, const std::string& where) {
        std::stringstream ss(dotted);
        std::string part;
        std::vector<std::string> parts;
        while (std::getline(ss, part, '.'))
            parts.push_back(trim(part));
        for (const auto& p : parts)
            if (p.empty())
                throw ConfigError(where + ": empty key in '" + dotted + "'");
        return parts;
    };
    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = origin + ":" + std::to_string(lineno);
        // strip comments outside strings
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"' && (i == 0 || line[i - 1] != '\\'))
                quoted = !quoted;
            else if (line[i] == '#' && !quoted) {
                line.erase(i);
                break;
            }
        }
        line = trim(line);
        if (line.empty())
            continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3)
                throw ConfigError(where + ": malformed table header");
            table = &root;
            for (const auto& p : split_key(trim(line.substr(1, line.size() - 2)), where)) {
                json& next = (*table)[p];
                if (next.is_null())
                    next = json::object();
                if (!next.is_object())
                    throw ConfigError(where + ": '" + p + "' is not a table");
                table = &next;
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(where + ": expected key = value");
        const auto parts = split_key(trim(line.substr(0, eq)), where);
        json* at = table;
        for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
            json& next = (*at)[parts[i]];
            if (next.is_null())
                next = json::object();
            if (!next.is_object())
                throw ConfigError(where + ": '" + parts[i] + "' is not a table");
            at = &next;
        }
        const std::string raw = trim(line.substr(eq + 1));
        json value;
        try {
            value = json::parse(raw);
        } catch (const json::exception&) {
            throw ConfigError(where + ": cannot parse value for '" + parts.back() + "'");
        }
        if (at->contains(parts.back()))
            throw ConfigError(where + ": duplicate key '" + parts.back() + "'");
        (*at)[parts.back()] = value;
    }
    return root;
}

inline json load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file " + path);
    return parse_config(in, path);
}

// ------ typed readers ------ //

namespace detail {

inline double get_number(const json& j, const std::string& field)
{
    if (!j.is_number())
        throw ConfigError(field + ": expected a number");
    return j.get<double>();
}

inline Vec get_vector(const json& j, const std::string& field)
{
    if (!j.is_array() || j.empty())
        throw ConfigError(field + ": expected a non-empty array of numbers");
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
        v[static_cast<Eigen::Index>(i)] = get_number(j[i], field + "[" + std::to_string(i) + "]");
    return v;
}

inline Mat get_matrix(const json& j, const std::string& field)
{
    if (!j.is_array() || j.empty())
        throw ConfigError(field + ": expected an array of rows");
    const std::size_t rows = j.size();
    Mat m;
    for (std::size_t i = 0; i < rows; ++i) {
        const Vec row = get_vector(j[i], field + "[" + std::to_string(i) + "]");
        if (i == 0)
            m.resize(static_cast<Eigen::Index>(rows), row.size());
        else if (row.size() != m.cols())
            throw ConfigError(field + ": rows differ in length");
        m.row(static_cast<Eigen::Index>(i)) = row.transpose();
    }
    return m;
}

inline void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where)
{
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* k : known)
            ok = ok || key == k;
        if (!ok)
            throw ConfigError(where + (where.empty() ? "" : ".") + key + ": unknown key");
    }
}

} // namespace detail

/// Model file keys: family, dim, Q, c (quartic coefficient), center, r, s,
/// [domain] kind = "box" | "ball" with bounds = [[lo, hi], ...] or [[c...], R],
/// [declared] gamma, L, Lbar, M.
inline ModelDescription model_from_json(const json& j)
{
    using namespace detail;
    if (!j.is_object())
        throw ConfigError("model: expected a table");
    reject_unknown(j, {"family", "dim", "Q", "c", "center", "r", "s", "domain", "declared"}, "");
    ModelDescription d;
    if (j.contains("family")) {
        if (!j["family"].is_string())
            throw ConfigError("family: expected a string");
        d.family = j["family"].get<std::string>();
    }
    if (d.family != "isotropic" && d.family != "anisotropic" && d.family != "quartic")
        throw ConfigError("family: unknown model family '" + d.family + "'");
    if (!j.contains("dim") || !j["dim"].is_number_integer() || j["dim"].get<int>() < 1)
        throw ConfigError("dim: expected a positive integer");
    d.dim = j["dim"].get<int>();
    const auto n = static_cast<Eigen::Index>(d.dim);
    if (d.family == "anisotropic") {
        if (!j.contains("Q"))
            throw ConfigError("Q: required for the anisotropic family");
        d.Q = get_matrix(j["Q"], "Q");
        if (d.Q.rows() != n || d.Q.cols() != n)
            throw ConfigError("Q: must be dim x dim");
    } else if (j.contains("Q")) {
        throw ConfigError("Q: only valid for the anisotropic family");
    }
    if (d.family == "quartic")
        d.quartic = j.contains("c") ? get_number(j["c"], "c") : 0.0;
    else if (j.contains("c"))
        throw ConfigError("c: only valid for the quartic family");
    if (j.contains("center")) {
        d.center = get_vector(j["center"], "center");
        if (d.center->size() != n)
            throw ConfigError("center: must have dim entries");
    }
    if (!j.contains("r"))
        throw ConfigError("r: required");
    d.r = get_number(j["r"], "r");
    if (!(d.r > 0))
        throw ConfigError("r: must be > 0");
    if (j.contains("s")) {
        d.s = get_vector(j["s"], "s");
        if (d.s->size() != n)
            throw ConfigError("s: must have dim entries");
    }
    if (!j.contains("domain") || !j["domain"].is_object())
        throw ConfigError("domain: required table");
    const json& dom = j["domain"];
    reject_unknown(dom, {"kind", "bounds"}, "domain");
    if (!dom.contains("kind") || !dom["kind"].is_string())
        throw ConfigError("domain.kind: expected \"box\" or \"ball\"");
    const std::string kind = dom["kind"].get<std::string>();
    if (!dom.contains("bounds") || !dom["bounds"].is_array())
        throw ConfigError("domain.bounds: required array");
    const json& b = dom["bounds"];
    try {
        if (kind == "box") {
            const Mat lh = get_matrix(b, "domain.bounds");
            if (lh.rows() != n || lh.cols() != 2)
                throw ConfigError("domain.bounds: box needs dim pairs [lo, hi]");
            d.domain = Domain::box(lh.col(0), lh.col(1));
        } else if (kind == "ball") {
            if (b.size() != 2)
                throw ConfigError("domain.bounds: ball needs [[centre...], radius]");
            const Vec c = get_vector(b[0], "domain.bounds[0]");
            if (c.size() != n)
                throw ConfigError("domain.bounds: ball centre must have dim entries");
            d.domain = Domain::ball(c, get_number(b[1], "domain.bounds[1]"));
        } else {
            throw ConfigError("domain.kind: expected \"box\" or \"ball\"");
        }
    } catch (const DomainError& e) {
        throw ConfigError(std::string("domain.bounds: ") + e.what());
    }
    if (j.contains("declared")) {
        const json& dc = j["declared"];
        if (!dc.is_object())
            throw ConfigError("declared: expected a table");
        reject_unknown(dc, {"gamma", "L", "Lbar", "M"}, "declared");
        if (dc.contains("gamma"))
            d.gamma = get_number(dc["gamma"], "declared.gamma");
        if (dc.contains("L"))
            d.L = get_number(dc["L"], "declared.L");
        if (dc.contains("Lbar"))
            d.Lbar = get_number(dc["Lbar"], "declared.Lbar");
        if (dc.contains("M"))
            d.M = get_number(dc["M"], "declared.M");
    }
    return d;
}

/// Parameter keys: eps, and either K and K0 or K_from_eps = true.
struct ParamsSpec {
    double eps = 0;
    std::optional<double> K, K0;
    bool from_eps = false;
};

inline ParamsSpec params_from_json(const json& j)
{
    using namespace detail;
    if (!j.is_object())
        throw ConfigError("params: expected a table");
    reject_unknown(j, {"eps", "K", "K0", "K_from_eps"}, "");
    ParamsSpec p;
    if (!j.contains("eps"))
        throw ConfigError("eps: required");
    p.eps = get_number(j["eps"], "eps");
    if (j.contains("K_from_eps")) {
        if (!j["K_from_eps"].is_boolean())
            throw ConfigError("K_from_eps: expected true or false");
        p.from_eps = j["K_from_eps"].get<bool>();
    }
    if (j.contains("K"))
        p.K = get_number(j["K"], "K");
    if (j.contains("K0"))
        p.K0 = get_number(j["K0"], "K0");
    if (p.from_eps && (p.K || p.K0))
        throw ConfigError("K_from_eps: cannot be combined with K or K0");
    if (!p.from_eps && (!p.K || !p.K0))
        throw ConfigError("K: K and K0 are required unless K_from_eps = true");
    return p;
}

inline CoveringParams resolve_params(const ConvexModel& m, const ParamsSpec& p)
{
    if (p.from_eps)
        return covering_params_from_eps(m, p.eps);
    return covering_params(m, p.eps, *p.K, *p.K0);
}

} // namespace resokam
