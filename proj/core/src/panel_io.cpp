#include "starch/panel_io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace starch {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        const auto a = cell.find_first_not_of(" \t\r\"");
        const auto b = cell.find_last_not_of(" \t\r\"");
        out.push_back(a == std::string::npos ? std::string() : cell.substr(a, b - a + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

bool is_na(const std::string& s) { return s.empty() || s == "NA" || s == "na" || s == "NaN"; }

double parse_number(const std::string& s, const std::string& where) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0') throw DataError(where + ": cannot parse number '" + s + "'");
    return v;
}

long parse_integer(const std::string& s, const std::string& where) {
    char* end = nullptr;
    const long v = std::strtol(s.c_str(), &end, 10);
    if (s.empty() || *end != '\0') throw DataError(where + ": cannot parse integer '" + s + "'");
    return v;
}

struct Row {
    std::size_t unit;
    long time;
    double y;
    std::vector<double> x;  // NaN for NA
    int year = 0;
    int month = 0;
    long line = 0;
};

}  // namespace

PanelFile read_panel_csv(const std::filesystem::path& path, const PanelReadOptions& opts) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open panel file: " + path.string());
    const std::string file = path.string();
    std::string line;
    long lineno = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
        header = split_csv(line);
        break;
    }
    if (header.empty()) throw DataError(file + ": missing header");
    int c_unit = -1, c_time = -1, c_y = -1, c_date = -1;
    std::vector<int> c_x;
    PanelFile pf;
    for (int c = 0; c < static_cast<int>(header.size()); ++c) {
        const std::string& h = header[static_cast<std::size_t>(c)];
        if (h == "unit") c_unit = c;
        else if (h == "time") c_time = c;
        else if (h == "y") c_y = c;
        else if (h == "date") c_date = c;
        else {
            c_x.push_back(c);
            pf.x_names.push_back(h);
        }
    }
    if (c_unit < 0 || c_time < 0 || c_y < 0)
        throw DataError(file + ": header must contain unit, time and y columns");
    if ((opts.month_dummies || opts.year_dummies) && c_date < 0)
        throw DataError(file + ": dummies requested but there is no date column");

    std::map<std::string, std::size_t> unit_index;
    std::vector<Row> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
        const std::string where = file + ":" + std::to_string(lineno);
        const auto cells = split_csv(line);
        if (cells.size() != header.size())
            throw DataError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                            std::to_string(cells.size()));
        Row r;
        r.line = lineno;
        const std::string& uid = cells[static_cast<std::size_t>(c_unit)];
        auto [it, inserted] = unit_index.emplace(uid, pf.unit_ids.size());
        if (inserted) pf.unit_ids.push_back(uid);
        r.unit = it->second;
        r.time = parse_integer(cells[static_cast<std::size_t>(c_time)], where);
        r.y = parse_number(cells[static_cast<std::size_t>(c_y)], where);
        for (int c : c_x) {
            const std::string& s = cells[static_cast<std::size_t>(c)];
            r.x.push_back(is_na(s) ? std::numeric_limits<double>::quiet_NaN() : parse_number(s, where));
        }
        if (c_date >= 0) {
            const std::string& d = cells[static_cast<std::size_t>(c_date)];
            if (!is_na(d)) {
                if (d.size() < 7 || d[4] != '-')
                    throw DataError(where + ": date must look like YYYY-MM or YYYY-MM-DD");
                r.year = static_cast<int>(parse_integer(d.substr(0, 4), where));
                r.month = static_cast<int>(parse_integer(d.substr(5, 2), where));
                if (r.month < 1 || r.month > 12) throw DataError(where + ": month out of range");
            }
        }
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw DataError(file + ": no data rows");

    long tmin = rows.front().time, tmax = rows.front().time;
    for (const auto& r : rows) {
        tmin = std::min(tmin, r.time);
        tmax = std::max(tmax, r.time);
    }
    const Index n = static_cast<Index>(pf.unit_ids.size());
    const Index cols = static_cast<Index>(tmax - tmin + 1);
    const int k = static_cast<int>(c_x.size());
    Matrix y = Matrix::Constant(n, cols, std::numeric_limits<double>::quiet_NaN());
    std::vector<Matrix> x(static_cast<std::size_t>(k),
                          Matrix::Constant(n, cols, std::numeric_limits<double>::quiet_NaN()));
    std::vector<int> year(static_cast<std::size_t>(cols), 0), month(static_cast<std::size_t>(cols), 0);
    std::vector<std::vector<long>> seen(static_cast<std::size_t>(n),
                                        std::vector<long>(static_cast<std::size_t>(cols), 0));
    for (const auto& r : rows) {
        const auto t = static_cast<std::size_t>(r.time - tmin);
        long& prev = seen[r.unit][t];
        if (prev != 0)
            throw DataError(file + ":" + std::to_string(r.line) + ": duplicate (unit,time) pair, first seen on line " +
                            std::to_string(prev));
        prev = r.line;
        y(static_cast<Index>(r.unit), static_cast<Index>(t)) = r.y;
        for (int j = 0; j < k; ++j)
            x[static_cast<std::size_t>(j)](static_cast<Index>(r.unit), static_cast<Index>(t)) = r.x[static_cast<std::size_t>(j)];
        if (r.year != 0) {
            year[t] = r.year;
            month[t] = r.month;
        }
    }
    for (Index i = 0; i < n; ++i)
        for (Index t = 0; t < cols; ++t)
            if (seen[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)] == 0)
                throw DataError(file + ": missing record for unit '" + pf.unit_ids[static_cast<std::size_t>(i)] +
                                "' at time " + std::to_string(tmin + t) +
                                " (times must be contiguous and balanced)");

    // Zero outcomes make log(y^2) undefined.
    std::vector<std::string> zero_rows;
    std::set<std::size_t> zero_units;
    for (const auto& r : rows)
        if (r.y == 0.0) {
            zero_rows.push_back(std::to_string(r.line));
            zero_units.insert(r.unit);
        }
    std::vector<Index> keep;
    if (!zero_rows.empty()) {
        if (!opts.drop_zero_units) {
            std::string list;
            for (std::size_t i = 0; i < zero_rows.size() && i < 20; ++i)
                list += (i ? ", " : "") + zero_rows[i];
            if (zero_rows.size() > 20) list += ", ...";
            throw DataError(file + ": " + std::to_string(zero_rows.size()) +
                            " zero outcome(s) on line(s) " + list);
        }
        pf.warnings.push_back("dropped " + std::to_string(zero_units.size()) +
                              " unit(s) with zero outcomes");
    }
    for (Index i = 0; i < n; ++i)
        if (!zero_units.count(static_cast<std::size_t>(i))) keep.push_back(i);
    std::vector<std::string> ids;
    for (Index i : keep) ids.push_back(pf.unit_ids[static_cast<std::size_t>(i)]);
    pf.unit_ids = ids;

    const Index nk = static_cast<Index>(keep.size());
    pf.panel.y.resize(nk, cols);
    for (Index a = 0; a < nk; ++a) pf.panel.y.row(a) = y.row(keep[static_cast<std::size_t>(a)]);
    for (int j = 0; j < k; ++j) {
        Matrix xj(nk, cols - 1);
        for (Index a = 0; a < nk; ++a)
            xj.row(a) = x[static_cast<std::size_t>(j)].row(keep[static_cast<std::size_t>(a)]).tail(cols - 1);
        if (!xj.allFinite())
            throw DataError(file + ": regressor '" + pf.x_names[static_cast<std::size_t>(j)] +
                            "' has NA values after the first period");
        pf.panel.x.push_back(std::move(xj));
    }

    auto add_dummy = [&](const std::string& name, auto&& indicator) {
        Matrix d(nk, cols - 1);
        for (Index t = 1; t < cols; ++t) d.col(t - 1).setConstant(indicator(static_cast<std::size_t>(t)) ? 1.0 : 0.0);
        if (d.maxCoeff() == d.minCoeff()) return;
        pf.panel.x.push_back(std::move(d));
        pf.x_names.push_back(name);
    };
    if (opts.month_dummies || opts.year_dummies) {
        for (Index t = 1; t < cols; ++t)
            if (year[static_cast<std::size_t>(t)] == 0)
                throw DataError(file + ": date missing for time " + std::to_string(tmin + t));
    }
    if (opts.month_dummies)
        for (int mth = 2; mth <= 12; ++mth)
            add_dummy("month" + std::to_string(mth), [&](std::size_t t) { return month[t] == mth; });
    if (opts.year_dummies) {
        std::set<int> years;
        for (Index t = 1; t < cols; ++t) years.insert(year[static_cast<std::size_t>(t)]);
        bool first = true;
        for (int yr : years) {
            if (first) {
                first = false;
                continue;
            }
            add_dummy("year" + std::to_string(yr), [&](std::size_t t) { return year[t] == yr; });
        }
    }
    pf.first_time = tmin;
    pf.panel.validate();
    return pf;
}

void write_panel_csv(const Panel& panel, const std::filesystem::path& path,
                     const std::vector<std::string>& x_names) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write panel file: " + path.string());
    out << "unit,time,y";
    for (int j = 0; j < panel.k(); ++j)
        out << ',' << (j < static_cast<int>(x_names.size()) ? x_names[static_cast<std::size_t>(j)]
                                                          : "x" + std::to_string(j + 1));
    out << '\n';
    char buf[40];
    for (Index i = 0; i < panel.n(); ++i)
        for (Index t = 0; t <= panel.T(); ++t) {
            std::snprintf(buf, sizeof buf, "%.17g", panel.y(i, t));
            out << i << ',' << t << ',' << buf;
            for (int j = 0; j < panel.k(); ++j) {
                if (t == 0) {
                    out << ",NA";
                } else {
                    std::snprintf(buf, sizeof buf, "%.17g", panel.x[static_cast<std::size_t>(j)](i, t - 1));
                    out << ',' << buf;
                }
            }
            out << '\n';
        }
    if (!out) throw DataError("failed writing panel file: " + path.string());
}

}  // namespace starch
