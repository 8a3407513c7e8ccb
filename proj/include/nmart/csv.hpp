#pragma once

/// Numeric CSV tables with an optional "# key = value" metadata header,
/// written with 17 significant digits so doubles round-trip exactly.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "nmart/controlled.hpp"
#include "nmart/errors.hpp"
#include "nmart/martingale.hpp"
#include "nmart/value_field.hpp"

namespace nmart {

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    std::map<std::string, std::string> metadata; ///< emitted in key order

    void add_row(std::vector<double> row) {
        if (row.size() != columns.size())
            throw PreconditionError("Table: row has " + std::to_string(row.size()) +
                                    " cells, expected " + std::to_string(columns.size()));
        rows.push_back(std::move(row));
    }
    std::size_t column(const std::string& name) const {
        for (std::size_t c = 0; c < columns.size(); ++c)
            if (columns[c] == name) return c;
        throw PreconditionError("Table: no column '" + name + "'");
    }
};

inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

/// Shortest decimal that reads back to the same double, for messages.
inline std::string format_short(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (first != last && *first == '+') ++first;
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last)
        throw PreconditionError("csv: cannot parse number '" + s + "'");
    return v;
}

inline void write_csv(std::ostream& os, const Table& table) {
    for (const auto& [k, v] : table.metadata) os << "# " << k << " = " << v << '\n';
    for (std::size_t c = 0; c < table.columns.size(); ++c)
        os << (c ? "," : "") << table.columns[c];
    os << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << format_double(row[c]);
        os << '\n';
    }
}

inline void emit_csv(const Table& table, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("emit_csv: cannot open '" + path + "' for writing");
    write_csv(os, table);
    if (!os) throw Error("emit_csv: write to '" + path + "' failed");
}

inline Table read_csv(std::istream& is) {
    Table t;
    std::string line;
    bool header = false;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.rfind("# ", 0) == 0) {
            const auto eq = line.find(" = ");
            if (eq != std::string::npos) t.metadata[line.substr(2, eq - 2)] = line.substr(eq + 3);
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!header) {
            t.columns = std::move(cells);
            header = true;
            continue;
        }
        if (line.empty()) continue;
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) row.push_back(parse_double(c));
        t.add_row(std::move(row));
    }
    return t;
}

inline Table read_csv(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("read_csv: cannot open '" + path + "'");
    return read_csv(is);
}

/// Columns time, X1..Xd, u1..ud, jump1..jumpd; row k carries the control
/// and jump count of the step ending at time k (zeros on row 0).
inline Table path_table(const MartingalePath& path) {
    Table t;
    t.columns.push_back("time");
    for (const char* p : {"X", "u", "jump"})
        for (std::size_t i = 0; i < path.d; ++i) t.columns.push_back(p + std::to_string(i + 1));
    for (std::size_t k = 0; k < path.times.size(); ++k) {
        std::vector<double> row{path.times[k]};
        for (std::size_t i = 0; i < path.d; ++i) row.push_back(path.x(k, i));
        for (std::size_t i = 0; i < path.d; ++i) row.push_back(k ? path.u(k - 1, i) : 0.0);
        for (std::size_t i = 0; i < path.d; ++i)
            row.push_back(k ? static_cast<double>(path.jumps(k - 1, i)) : 0.0);
        t.add_row(std::move(row));
    }
    return t;
}

/// Columns time, Y1..Ym, X1..Xd, then the step's control pi and u.
inline Table controlled_path_table(const ControlledPath& path) {
    Table t;
    t.columns.push_back("time");
    for (std::size_t a = 0; a < path.m; ++a) t.columns.push_back("Y" + std::to_string(a + 1));
    for (std::size_t i = 0; i < path.x.d; ++i) t.columns.push_back("X" + std::to_string(i + 1));
    for (std::size_t a = 0; a < path.pi_dim; ++a) t.columns.push_back("pi" + std::to_string(a + 1));
    for (std::size_t i = 0; i < path.x.d; ++i) t.columns.push_back("u" + std::to_string(i + 1));
    for (std::size_t k = 0; k < path.x.times.size(); ++k) {
        std::vector<double> row{path.x.times[k]};
        for (std::size_t a = 0; a < path.m; ++a) row.push_back(path.y[k * path.m + a]);
        for (std::size_t i = 0; i < path.x.d; ++i) row.push_back(path.x.x(k, i));
        for (std::size_t a = 0; a < path.pi_dim; ++a)
            row.push_back(k ? path.pi[(k - 1) * path.pi_dim + a] : 0.0);
        for (std::size_t i = 0; i < path.x.d; ++i) row.push_back(k ? path.x.u(k - 1, i) : 0.0);
        t.add_row(std::move(row));
    }
    return t;
}

/// One row per slice and node: t, y1..ym, V, control index, pi.., u..;
/// the lattice and control metadata go in the header.
inline Table field_table(const ValueField& f) {
    Table t;
    const std::size_t m = f.space.m;
    const std::size_t pi_dim = f.controls.empty() ? 0 : static_cast<std::size_t>(f.controls[0].pi.size());
    const std::size_t d = f.controls.empty() ? 0 : static_cast<std::size_t>(f.controls[0].u.size());
    t.columns.push_back("t");
    for (std::size_t a = 0; a < m; ++a) t.columns.push_back("y" + std::to_string(a + 1));
    t.columns.push_back("V");
    t.columns.push_back("control");
    for (std::size_t a = 0; a < pi_dim; ++a) t.columns.push_back("pi" + std::to_string(a + 1));
    for (std::size_t i = 0; i < d; ++i) t.columns.push_back("u" + std::to_string(i + 1));

    auto& md = t.metadata;
    md["problem"] = f.problem_tag.empty() ? "-" : f.problem_tag;
    md["m"] = std::to_string(m);
    md["d"] = std::to_string(d);
    md["pi_dim"] = std::to_string(pi_dim);
    md["controls"] = std::to_string(f.controls.size());
    md["t0"] = format_double(f.time.t0);
    md["T"] = format_double(f.time.T);
    md["n_steps"] = std::to_string(f.time.n_steps);
    for (std::size_t a = 0; a < m; ++a) {
        const std::string s = std::to_string(a + 1);
        md["lo" + s] = format_double(f.space.lo[a]);
        md["hi" + s] = format_double(f.space.hi[a]);
        md["cells" + s] = std::to_string(f.space.n[a] - 1);
    }
    md["cfl"] = format_double(f.cfl_number);
    md["range_lo"] = format_double(f.range_lo);
    md["range_hi"] = format_double(f.range_hi);
    md["far_field"] = f.far_field == Extension::Quadratic ? "quadratic" : "constant";

    for (std::size_t k = 0; k < f.slices(); ++k) {
        const double time = f.slice_time(k);
        for (std::size_t j = 0; j < f.space.nodes(); ++j) {
            std::vector<double> row{time};
            const Vec y = f.space.node(j);
            for (std::size_t a = 0; a < m; ++a) row.push_back(y[static_cast<Eigen::Index>(a)]);
            row.push_back(f.values[k][j]);
            const std::uint32_t c = f.policy[k][j];
            row.push_back(static_cast<double>(c));
            const ControlPoint& cp = f.controls[c];
            for (std::size_t a = 0; a < pi_dim; ++a) row.push_back(cp.pi[static_cast<Eigen::Index>(a)]);
            for (std::size_t i = 0; i < d; ++i) row.push_back(cp.u[static_cast<Eigen::Index>(i)]);
            t.add_row(std::move(row));
        }
    }
    return t;
}

inline void save_field(const ValueField& f, const std::string& path) { emit_csv(field_table(f), path); }

inline ValueField field_from_table(const Table& t) {
    auto need = [&](const std::string& key) {
        auto it = t.metadata.find(key);
        if (it == t.metadata.end()) throw PreconditionError("load_field: missing metadata '" + key + "'");
        return it->second;
    };
    auto count = [&](const std::string& key) {
        return static_cast<std::size_t>(std::stoull(need(key)));
    };
    ValueField f;
    f.problem_tag = need("problem") == "-" ? "" : need("problem");
    const std::size_t m = count("m");
    const std::size_t d = count("d");
    const std::size_t pi_dim = count("pi_dim");
    std::array<double, 2> lo{0.0, 0.0}, hi{1.0, 1.0}, sp{1.0, 1.0};
    for (std::size_t a = 0; a < m; ++a) {
        const std::string s = std::to_string(a + 1);
        lo[a] = parse_double(need("lo" + s));
        hi[a] = parse_double(need("hi" + s));
        sp[a] = (hi[a] - lo[a]) / static_cast<double>(count("cells" + s));
    }
    f.space = SpatialGrid::uniform(m, lo, hi, sp);
    f.time = TimeGrid(parse_double(need("t0")), parse_double(need("T")), count("n_steps"));
    f.cfl_number = parse_double(need("cfl"));
    f.range_lo = parse_double(need("range_lo"));
    f.range_hi = parse_double(need("range_hi"));
    f.far_field = need("far_field") == "quadratic" ? Extension::Quadratic : Extension::Constant;
    f.controls.assign(count("controls"), ControlPoint{});

    const std::size_t nodes = f.space.nodes();
    const std::size_t slices = f.time.n_steps + 1;
    if (t.rows.size() != nodes * slices)
        throw PreconditionError("load_field: expected " + std::to_string(nodes * slices) + " rows");
    const std::size_t cv = t.column("V");
    const std::size_t cc = t.column("control");
    f.values.assign(slices, std::vector<double>(nodes));
    f.policy.assign(slices, std::vector<std::uint32_t>(nodes));
    std::vector<bool> seen(f.controls.size(), false);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::size_t k = r / nodes;
        const std::size_t j = r % nodes;
        f.values[k][j] = row[cv];
        const auto c = static_cast<std::uint32_t>(row[cc]);
        if (c >= f.controls.size()) throw PreconditionError("load_field: control index out of range");
        f.policy[k][j] = c;
        if (!seen[c]) {
            seen[c] = true;
            Vec pi(static_cast<Eigen::Index>(pi_dim));
            Vec u(static_cast<Eigen::Index>(d));
            for (std::size_t a = 0; a < pi_dim; ++a) pi[static_cast<Eigen::Index>(a)] = row[cc + 1 + a];
            for (std::size_t i = 0; i < d; ++i) u[static_cast<Eigen::Index>(i)] = row[cc + 1 + pi_dim + i];
            f.controls[c] = ControlPoint(pi, u);
        }
    }
    return f;
}

/// Controls never selected anywhere cannot be recovered from the rows and
/// stay default-constructed.
inline ValueField load_field(const std::string& path) { return field_from_table(read_csv(path)); }

} // namespace nmart
