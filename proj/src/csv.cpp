#include "glaves/csv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace glaves {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        // trim surrounding whitespace
        const auto b = field.find_first_not_of(" \t\r");
        const auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

struct CsvFile {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvFile read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open '" + path + "'");
    CsvFile file;
    std::string line;
    if (!std::getline(in, line)) fail("missing header in '" + path + "'");
    file.header = split_line(line);
    if (file.header.empty()) fail("missing header in '" + path + "'");
    while (std::getline(in, line)) {
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto fields = split_line(line);
        if (fields.size() != file.header.size()) {
            fail("row " + std::to_string(file.rows.size() + 1) + " in '" + path + "' has " +
                 std::to_string(fields.size()) + " fields, expected " +
                 std::to_string(file.header.size()));
        }
        file.rows.push_back(std::move(fields));
    }
    return file;
}

double parse_cell(const std::string& text, std::size_t row, const std::string& column) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(text, &pos);
        if (pos != text.size()) throw std::invalid_argument("trailing characters");
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite");
        return v;
    } catch (const std::exception&) {
        fail("non-numeric cell '" + text + "' at row " + std::to_string(row) +
             ", column '" + column + "'");
    }
}

// Maps header names to the expected layout; returns the column index of each
// expected name, erroring on misordered covariates or unknown columns.
std::vector<int> map_columns(const std::vector<std::string>& header,
                             const std::vector<std::string>& leading,
                             bool optional_weight, bool allow_extra, int* p_out,
                             int* weight_col_out) {
    std::vector<int> mapping;
    std::size_t h = 0;
    for (const auto& name : leading) {
        if (h >= header.size() || header[h] != name)
            fail("expected column '" + name + "' at position " + std::to_string(h + 1));
        mapping.push_back(static_cast<int>(h));
        ++h;
    }
    int p = 0;
    while (h < header.size()) {
        const std::string expected = "x" + std::to_string(p + 1);
        if (header[h] == expected) {
            mapping.push_back(static_cast<int>(h));
            ++p;
            ++h;
            continue;
        }
        break;
    }
    *p_out = p;
    *weight_col_out = -1;
    while (h < header.size()) {
        if (optional_weight && header[h] == "weight" && *weight_col_out < 0) {
            *weight_col_out = static_cast<int>(h);
            ++h;
            continue;
        }
        if (header[h].size() > 1 && header[h][0] == 'x' &&
            std::all_of(header[h].begin() + 1, header[h].end(),
                        [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
            fail("covariate columns out of order: found '" + header[h] + "', expected 'x" +
                 std::to_string(p + 1) + "'");
        }
        if (!allow_extra) fail("unknown column '" + header[h] + "' (use --allow-extra to ignore)");
        ++h;
    }
    return mapping;
}

void append_cell(std::string& out, const Cell& cell) {
    if (cell.is_number) {
        out += format_number(cell.number);
    } else {
        out += cell.text;
    }
}

}  // namespace

ExperimentalSample ingest_experimental_csv(const std::string& path, bool allow_extra) {
    const CsvFile file = read_csv(path);
    int p = 0, weight_col = -1;
    const std::vector<int> mapping =
        map_columns(file.header, {"y", "a"}, false, allow_extra, &p, &weight_col);
    if (p < 1) fail("no covariate columns (expected x1..xp) in '" + path + "'");

    const auto n = static_cast<Index>(file.rows.size());
    if (n < 2) fail("experimental sample needs at least 2 rows");

    ExperimentalSample sample;
    sample.y.resize(n);
    sample.a.resize(n);
    sample.x.resize(n, p);
    for (Index i = 0; i < n; ++i) {
        const auto& row = file.rows[static_cast<std::size_t>(i)];
        const std::size_t row_no = static_cast<std::size_t>(i) + 1;
        sample.y(i) = parse_cell(row[static_cast<std::size_t>(mapping[0])], row_no, "y");
        const double a = parse_cell(row[static_cast<std::size_t>(mapping[1])], row_no, "a");
        if (a != 0.0 && a != 1.0)
            fail("treatment must be 0 or 1; found '" +
                 row[static_cast<std::size_t>(mapping[1])] + "' at row " +
                 std::to_string(row_no) + ", column 'a'");
        sample.a(i) = a;
        for (int j = 0; j < p; ++j) {
            sample.x(i, j) = parse_cell(row[static_cast<std::size_t>(mapping[2 + j])],
                                        row_no, "x" + std::to_string(j + 1));
        }
    }
    return sample;
}

TargetSample ingest_target_csv(const std::string& path, bool allow_extra) {
    const CsvFile file = read_csv(path);
    int p = 0, weight_col = -1;
    const std::vector<int> mapping =
        map_columns(file.header, {}, true, allow_extra, &p, &weight_col);
    if (p < 1) fail("no covariate columns (expected x1..xp) in '" + path + "'");

    const auto m = static_cast<Index>(file.rows.size());
    if (m < 1) fail("target sample needs at least 1 row");

    TargetSample sample;
    sample.x_star.resize(m, p);
    if (weight_col >= 0) sample.raw_weights = Vector(m);
    for (Index i = 0; i < m; ++i) {
        const auto& row = file.rows[static_cast<std::size_t>(i)];
        const std::size_t row_no = static_cast<std::size_t>(i) + 1;
        for (int j = 0; j < p; ++j) {
            sample.x_star(i, j) = parse_cell(row[static_cast<std::size_t>(mapping[j])],
                                             row_no, "x" + std::to_string(j + 1));
        }
        if (weight_col >= 0) {
            const double w =
                parse_cell(row[static_cast<std::size_t>(weight_col)], row_no, "weight");
            if (w <= 0.0)
                fail("non-positive weight at row " + std::to_string(row_no) +
                     ", column 'weight'");
            (*sample.raw_weights)(i) = w;
        }
    }
    return sample;
}

std::string format_number(double value) {
    if (!std::isfinite(value)) return "NA";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

Cell Cell::num(double v) {
    Cell c;
    if (std::isfinite(v)) {
        c.is_number = true;
        c.number = v;
    } else {
        c.text = "NA";
    }
    return c;
}

Cell Cell::na() {
    Cell c;
    c.text = "NA";
    return c;
}

Cell Cell::str(std::string s) {
    Cell c;
    c.text = std::move(s);
    return c;
}

std::string to_csv(const Table& table) {
    std::string out;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        if (c) out += ',';
        out += table.columns[c];
    }
    out += '\n';
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out += ',';
            append_cell(out, row[c]);
        }
        out += '\n';
    }
    return out;
}

std::string to_json(const Table& table) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : table.rows) {
        nlohmann::json obj = nlohmann::json::object();
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (row[c].is_number) {
                obj[table.columns[c]] = row[c].number;
            } else {
                obj[table.columns[c]] = row[c].text;
            }
        }
        rows.push_back(std::move(obj));
    }
    nlohmann::json doc;
    doc["rows"] = std::move(rows);
    return doc.dump(2) + "\n";
}

std::string to_display(const Table& table) {
    std::vector<std::vector<std::string>> cells;
    cells.emplace_back(table.columns);
    for (const auto& row : table.rows) {
        std::vector<std::string> printed;
        for (const auto& cell : row) {
            if (cell.is_number) {
                char buf[40];
                std::snprintf(buf, sizeof(buf), "%.3f", cell.number);
                printed.emplace_back(buf);
            } else {
                printed.push_back(cell.text);
            }
        }
        cells.push_back(std::move(printed));
    }
    std::vector<std::size_t> width(table.columns.size(), 0);
    for (const auto& row : cells)
        for (std::size_t c = 0; c < row.size(); ++c)
            width[c] = std::max(width[c], row[c].size());

    std::string out;
    for (const auto& row : cells) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out += "  ";
            out += row[c];
            out.append(width[c] - row[c].size(), ' ');
        }
        while (!out.empty() && out.back() == ' ') out.pop_back();
        out += '\n';
    }
    return out;
}

}  // namespace glaves
