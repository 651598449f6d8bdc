// Text formats for fields:
//
//   # grid dim=<d> n=<n> length=<l0>[,<l1>]
//   <value>            one per line, row-major (axis 0 slowest)
#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "mctl/error.hpp"
#include "mctl/field.hpp"

namespace mctl {

/// Shortest round-trip decimal representation; stable across runs.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string grid_header(const Grid& g) {
    std::string s = "# grid dim=" + std::to_string(g.dim()) + " n=" + std::to_string(g.n()) +
                    " length=" + format_double(g.length(0));
    if (g.dim() == 2) s += "," + format_double(g.length(1));
    return s;
}

inline void write_field_csv(std::ostream& os, const ScalarField& u) {
    os << grid_header(u.grid()) << '\n';
    for (double v : u.values()) os << format_double(v) << '\n';
}

inline void write_field_csv(const std::string& path, const ScalarField& u) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot open " + path + " for writing");
    write_field_csv(os, u);
}

namespace detail {

inline double parse_double(const std::string& s, const std::string& what) {
    double v = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    while (e > b && (e[-1] == ' ' || e[-1] == '\t' || e[-1] == '\r')) --e;
    const auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc() || res.ptr != e) throw ConfigError("cannot parse number '" + s + "' in " + what);
    return v;
}

inline Grid parse_grid_header(const std::string& line) {
    std::istringstream is(line);
    std::string hash, tag;
    is >> hash >> tag;
    if (hash != "#" || tag != "grid") throw ConfigError("field csv: missing '# grid' header");
    int dim = 0, n = 0;
    std::vector<double> lengths;
    std::string kv;
    while (is >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("field csv: malformed header token '" + kv + "'");
        const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
        if (key == "dim") {
            dim = static_cast<int>(parse_double(val, "header"));
        } else if (key == "n") {
            n = static_cast<int>(parse_double(val, "header"));
        } else if (key == "length") {
            std::istringstream ls(val);
            std::string part;
            while (std::getline(ls, part, ',')) lengths.push_back(parse_double(part, "header"));
        } else {
            throw ConfigError("field csv: unknown header key '" + key + "'");
        }
    }
    return make_grid(dim, n, lengths);
}

}  // namespace detail

inline ScalarField read_field_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("field csv: empty input");
    const Grid g = detail::parse_grid_header(line);
    std::vector<double> values;
    values.reserve(g.size());
    while (std::getline(is, line)) {
        if (line.empty() || line == "\r") continue;
        values.push_back(detail::parse_double(line, "field csv"));
    }
    return ScalarField(g, std::move(values));
}

inline ScalarField read_field_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open field csv " + path);
    return read_field_csv(is);
}

}  // namespace mctl
